import io
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conceptlink.context import (
    ContextParseError,
    FormalContext,
    closure,
    derive_extent,
    derive_intent,
    generate_test_set,
    load_context,
    read_labeled_pairs,
    removal_count,
    split_input_target,
    write_context,
    write_test_set,
)

from conftest import ids


@st.composite
def contexts(draw, max_side=7):
    n_obj = draw(st.integers(1, max_side))
    n_attr = draw(st.integers(1, max_side))
    cells = draw(st.lists(st.booleans(), min_size=n_obj * n_attr, max_size=n_obj * n_attr))
    inc = [(i // n_attr, i % n_attr) for i, c in enumerate(cells) if c]
    return FormalContext([f"g{i}" for i in range(n_obj)], [f"m{j}" for j in range(n_attr)], inc)


def subsets(n):
    return st.sets(st.integers(0, n - 1)) if n else st.just(set())


class TestLoad:
    def test_single_line(self):
        ctx = load_context(io.StringIO("g1\tm1\n"))
        assert (ctx.n_objects, ctx.n_attributes, ctx.n_incidences) == (1, 1, 1)

    def test_duplicate_lines_are_idempotent(self):
        once = load_context(io.StringIO("g1\tm1\n"))
        twice = load_context(io.StringIO("g1\tm1\ng1\tm1\n"))
        assert once == twice

    def test_k1_counts(self, k1):
        assert (k1.n_objects, k1.n_attributes, k1.n_incidences) == (3, 3, 6)
        assert k1.objects == ("g1", "g2", "g3")

    @pytest.mark.parametrize("text, lineno", [("g1\tm1\ng1m2\n", 2), ("a\tb\tc\n", 1), ("\tm1\n", 1)])
    def test_malformed_line_reports_line_number(self, text, lineno):
        with pytest.raises(ContextParseError) as err:
            load_context(io.StringIO(text))
        assert err.value.lineno == lineno

    def test_empty_stream(self):
        with pytest.raises(ContextParseError):
            load_context(io.StringIO("\n\n"))

    def test_same_identifier_on_both_sides(self):
        ctx = load_context(io.StringIO("x\tx\n"))
        assert ctx.object_token(0) == "o:x" and ctx.attribute_token(0) == "a:x"
        assert ctx.object_token(0) != ctx.attribute_token(0)

    def test_roundtrip(self, k1, tmp_path):
        path = tmp_path / "k1.tsv"
        write_context(path, k1, header=["a comment"])
        assert load_context(path) == k1

    def test_universe_keeps_isolated_nodes(self):
        ctx = load_context(io.StringIO("g2\tm1\n"), objects=["g1", "g2"], attributes=["m0", "m1"])
        assert ctx.objects == ("g1", "g2") and ctx.attributes == ("m0", "m1")
        assert ctx.n_incidences == 1 and ctx.has_edge(1, 1)

    def test_transpose_consistency(self, k1):
        for g in range(k1.n_objects):
            for m in range(k1.n_attributes):
                assert bool(k1.rows[g] >> m & 1) == bool(k1.cols[m] >> g & 1)

    def test_out_of_range_incidence(self):
        with pytest.raises(IndexError):
            FormalContext(["a"], ["b"], [(0, 1)])


class TestDerivation:
    def test_empty_object_set_gives_all_attributes(self, k1):
        assert derive_intent(k1, []) == {0, 1, 2}

    def test_k1_intent(self, k1):
        assert ids(k1, derive_intent(k1, [0, 1]), "a") == {"m1", "m2"}

    def test_complete_context(self):
        ctx = FormalContext(["a", "b"], ["x", "y", "z"], [(g, m) for g in range(2) for m in range(3)])
        for objs in ([], [0], [1], [0, 1]):
            assert derive_intent(ctx, objs) == {0, 1, 2}

    def test_empty_attribute_set_gives_all_objects(self, k1):
        assert derive_extent(k1, []) == {0, 1, 2}

    def test_k1_extent(self, k1):
        assert ids(k1, derive_extent(k1, [2]), "o") == {"g2", "g3"}
        assert ids(k1, derive_extent(k1, [0, 1, 2]), "o") == {"g2"}

    def test_out_of_range(self, k1):
        with pytest.raises(IndexError):
            derive_intent(k1, [3])
        with pytest.raises(IndexError):
            derive_extent(k1, [-1])

    def test_closure_k1(self, k1):
        c = closure(k1, [0])
        assert ids(k1, c.extent, "o") == {"g1", "g2"}
        assert ids(k1, c.intent, "a") == {"m1", "m2"}

    def test_closure_empty_incidence(self):
        ctx = FormalContext(["a", "b"], ["x"], [])
        c = closure(ctx, [])
        assert c.extent == (0, 1) and c.intent == ()

    @settings(max_examples=150, deadline=None)
    @given(st.data())
    def test_galois_connection(self, data):
        ctx = data.draw(contexts())
        a = data.draw(subsets(ctx.n_objects))
        b = data.draw(subsets(ctx.n_attributes))
        assert (a <= derive_extent(ctx, b)) == (b <= derive_intent(ctx, a))

    @settings(max_examples=150, deadline=None)
    @given(st.data())
    def test_antitone(self, data):
        ctx = data.draw(contexts())
        a2 = data.draw(subsets(ctx.n_objects))
        a1 = data.draw(st.sets(st.sampled_from(sorted(a2)))) if a2 else set()
        assert derive_intent(ctx, a2) <= derive_intent(ctx, a1)

    @settings(max_examples=150, deadline=None)
    @given(st.data())
    def test_closure_idempotent_and_extensive(self, data):
        ctx = data.draw(contexts())
        b = data.draw(subsets(ctx.n_attributes))
        c = closure(ctx, b)
        assert b <= set(c.intent)
        assert closure(ctx, c.intent) == c
        assert set(derive_intent(ctx, c.extent)) == set(c.intent)
        assert set(derive_extent(ctx, c.intent)) == set(c.extent)


class TestSplit:
    def _ctx(self, n):
        return FormalContext([f"g{i}" for i in range(n)], [f"m{i}" for i in range(n)], [(i, i) for i in range(n)])

    def test_ten_edges(self):
        split = split_input_target(self._ctx(10), 0.1, seed=3)
        assert len(split.removed_edges) == 1 and split.input_context.n_incidences == 9

    def test_deterministic(self):
        ctx = self._ctx(50)
        assert split_input_target(ctx, 0.2, 7).removed_edges == split_input_target(ctx, 0.2, 7).removed_edges

    def test_ctd_rounding(self):
        assert removal_count(103845, 0.1) == 10385
        assert removal_count(5, 0.1) == 1  # 0.5 rounds up

    def test_zero_removals(self):
        with pytest.raises(ValueError, match="larger fraction"):
            split_input_target(self._ctx(10), 1e-9, 0)

    @settings(max_examples=60, deadline=None)
    @given(st.data())
    def test_partition(self, data):
        ctx = data.draw(contexts())
        if ctx.n_incidences == 0:
            return
        fraction = data.draw(st.floats(0.05, 0.95))
        if removal_count(ctx.n_incidences, fraction) < 1:
            return
        split = split_input_target(ctx, fraction, data.draw(st.integers(0, 2**31)))
        removed = set(split.removed_edges)
        kept = split.input_context.incidence()
        assert len(removed) == len(split.removed_edges) == removal_count(ctx.n_incidences, fraction)
        assert not removed & kept
        assert removed | kept == ctx.incidence()
        assert split.input_context.objects == ctx.objects


class TestTestSet:
    def test_one_removed_edge(self):
        ctx = FormalContext(["a", "b"], ["x", "y"], [(0, 0), (1, 1)])
        split = split_input_target(ctx, 0.5, 0)
        test = generate_test_set(split, [], seed=1)
        assert len(test.positives) == 1 and len(test.negatives) == 1
        neg = test.negatives[0]
        assert neg not in ctx.incidence()

    def test_complete_context_warns(self):
        ctx = FormalContext(["a", "b"], ["x", "y"], [(g, m) for g in range(2) for m in range(2)])
        split = split_input_target(ctx, 0.5, 0)
        with pytest.warns(RuntimeWarning):
            test = generate_test_set(split, [], seed=1)
        assert test.negatives == [] and test.warnings

    def test_excludes_context_negatives_and_removed_edges(self):
        rng = random.Random(0)
        inc = [(g, m) for g in range(8) for m in range(8) if rng.random() < 0.4]
        ctx = FormalContext([f"g{i}" for i in range(8)], [f"m{i}" for i in range(8)], inc)
        split = split_input_target(ctx, 0.3, 4)
        t_n = [(frozenset({0}), frozenset({m})) for m in range(8) if (0, m) not in ctx.incidence()]
        test = generate_test_set(split, t_n, seed=9)
        banned = ctx.incidence() | {(0, m) for m in range(8)}
        assert not set(test.negatives) & banned
        assert len(set(test.negatives)) == len(test.negatives)

    def test_exhaustion_caps_at_available(self):
        # 3x3 with 7 edges: removing 2 leaves 2 non-edges of the original relation... none
        inc = [(g, m) for g in range(3) for m in range(3) if (g, m) != (2, 2)]
        ctx = FormalContext(["a", "b", "c"], ["x", "y", "z"], inc)
        split = split_input_target(ctx, 0.3, 0)
        with pytest.warns(RuntimeWarning):
            test = generate_test_set(split, [], seed=0)
        assert test.negatives == [(2, 2)]

    def test_file_deterministic(self, tmp_path):
        rng = random.Random(1)
        inc = [(g, m) for g in range(20) for m in range(20) if rng.random() < 0.2]
        ctx = FormalContext([f"g{i}" for i in range(20)], [f"m{i}" for i in range(20)], inc)
        texts = []
        for run in range(2):
            split = split_input_target(ctx, 0.1, 5)
            test = generate_test_set(split, [], seed=6)
            path = tmp_path / f"t{run}.tsv"
            write_test_set(path, split.input_context, test)
            texts.append(path.read_bytes())
        assert texts[0] == texts[1]
        rows = read_labeled_pairs(tmp_path / "t0.tsv")
        assert sum(r[2] for r in rows) == len(rows) // 2
