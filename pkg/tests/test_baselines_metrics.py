import io
import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conceptlink.baselines import HEURISTICS, HeuristicScorer, SVDScorer, score_heuristic, score_mf_svd, write_predictions
from conceptlink.context import FormalContext
from conceptlink.metrics import aupr, compute_metrics, confusion, f1_score, roc_auc

from conftest import random_context


@pytest.fixture
def four_edges():
    return FormalContext.from_pairs([("u1", "v1"), ("u1", "v2"), ("u2", "v1"), ("u2", "v3")])


class TestHeuristics:
    def test_common_neighbours(self, four_edges):
        assert score_heuristic(four_edges, "u1", "v3", "cn") == 1

    def test_jaccard(self, four_edges):
        assert score_heuristic(four_edges, "u1", "v3", "jc") == pytest.approx(1 / 3, abs=1e-12)

    def test_adamic_adar_and_resource_allocation(self, four_edges):
        # the single shared attribute v1 has degree 2
        assert score_heuristic(four_edges, "u1", "v3", "aa") == pytest.approx(1 / math.log(2))
        assert score_heuristic(four_edges, "u1", "v3", "ra") == pytest.approx(0.5)

    def test_self_excluded(self, four_edges):
        # v2's only neighbour is u1 itself
        assert score_heuristic(four_edges, "u1", "v2", "cn") == 0

    @pytest.mark.parametrize("kind", HEURISTICS)
    def test_isolated_object(self, kind):
        ctx = FormalContext(["a", "b", "lonely"], ["x", "y"], [(0, 0), (1, 0), (1, 1)])
        scorer = HeuristicScorer(ctx, kind)
        assert all(scorer.score("lonely", m) == 0 for m in ctx.attributes)

    def test_unknown_node_and_kind(self, four_edges):
        with pytest.raises(KeyError):
            score_heuristic(four_edges, "zz", "v1", "cn")
        with pytest.raises(ValueError):
            HeuristicScorer(four_edges, "katz")

    @pytest.mark.parametrize("seed", range(10))
    def test_against_direct_formula(self, seed):
        ctx = random_context(random.Random(seed), 9, 7, 0.35)
        obj_nb = [set(ctx.object_neighbors(g)) for g in range(ctx.n_objects)]
        deg = [len(ctx.attribute_neighbors(m)) for m in range(ctx.n_attributes)]
        sims = {
            "cn": lambda a, b: len(a & b),
            "jc": lambda a, b: len(a & b) / len(a | b) if a | b else 0.0,
            "aa": lambda a, b: sum(1 / math.log(deg[m]) for m in a & b if deg[m] > 1),
            "ra": lambda a, b: sum(1 / deg[m] for m in a & b),
        }
        for kind, sim in sims.items():
            scorer = HeuristicScorer(ctx, kind)
            for u in range(ctx.n_objects):
                for v in range(ctx.n_attributes):
                    ref = sum(sim(obj_nb[u], obj_nb[w]) for w in ctx.attribute_neighbors(v) if w != u)
                    got = scorer.score_index(u, v)
                    assert got >= 0
                    assert got == pytest.approx(ref, abs=1e-9), (kind, u, v)


class TestSVD:
    def test_all_ones_rank_one(self):
        ctx = FormalContext(["a", "b"], ["x", "y"], [(0, 0), (0, 1), (1, 0), (1, 1)])
        for o in ("a", "b"):
            for a in ("x", "y"):
                assert abs(score_mf_svd(ctx, 1, o, a) - 1.0) <= 1e-9

    def test_full_rank(self):
        ctx = random_context(random.Random(3), 8, 6, 0.4)
        rec = SVDScorer(ctx, rank=6).reconstruction()
        assert np.max(np.abs(rec - ctx.to_dense())) <= 1e-6

    def test_k1_rank_three(self, k1):
        assert np.max(np.abs(SVDScorer(k1, 3).reconstruction() - k1.to_dense())) <= 1e-6

    @pytest.mark.parametrize("rank", [0, 4, -1])
    def test_rank_range(self, k1, rank):
        with pytest.raises(ValueError):
            SVDScorer(k1, rank)

    def test_sparse_path_matches_dense(self):
        ctx = random_context(random.Random(8), 12, 10, 0.3)
        dense = SVDScorer(ctx, rank=3).reconstruction()
        import numpy.linalg as la

        u, s, vt = la.svd(ctx.to_dense(), full_matrices=False)
        assert np.allclose(dense, (u[:, :3] * s[:3]) @ vt[:3], atol=1e-9)


class TestMetrics:
    def test_hand_case(self):
        r = compute_metrics([0.9, 0.8, 0.4, 0.2], [1, 0, 1, 0], threshold=0.5)
        assert r.auc == pytest.approx(0.75) and r.f1 == pytest.approx(0.5)
        assert (r.tp, r.fp, r.tn, r.fn) == (1, 1, 1, 1)

    def test_perfect(self):
        r = compute_metrics([0.9, 0.8, 0.3, 0.1], [1, 1, 0, 0], threshold=0.5)
        assert (r.auc, r.aupr, r.f1) == (1.0, 1.0, 1.0)

    def test_ties(self):
        assert roc_auc([0.3] * 6, [1, 0, 1, 0, 0, 1]) == 0.5

    def test_threshold_inclusive(self):
        assert confusion([0.5, 0.4], [1, 0], 0.5) == (1, 0, 1, 0)

    def test_f1_zero_when_nothing_predicted(self):
        assert f1_score(0, 0, 3) == 0.0

    @pytest.mark.parametrize("labels", [[1, 1, 1], [0, 0], []])
    def test_single_class(self, labels):
        with pytest.raises(ValueError):
            compute_metrics([0.1] * len(labels), labels)

    def test_aupr_hand(self):
        # descending sweep: P/R points (1, .5), (.5, .5), (2/3, 1), (.5, 1)
        assert aupr([0.9, 0.8, 0.4, 0.2], [1, 0, 1, 0]) == pytest.approx(0.5 * 1 + 0.5 * 2 / 3)

    def test_report_json(self):
        r = compute_metrics([0.9, 0.8, 0.4, 0.2], [1, 0, 1, 0])
        d = r.to_dict()
        assert set(d) == {"f1", "auc", "aupr", "threshold", "counts"}
        assert set(d["counts"]) == {"tp", "fp", "tn", "fn"}
        p, rc = r.precision, r.recall
        assert r.f1 == pytest.approx(2 * p * rc / (p + rc))


def brute_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    total = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return total / (len(pos) * len(neg))


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 500), st.integers(0, 2**31), st.sampled_from([3, 20, None]))
def test_auc_matches_pair_count(n, seed, levels):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, n)
    labels[0], labels[1] = 0, 1
    scores = rng.random(n) if levels is None else rng.integers(0, levels, n) / levels
    assert abs(roc_auc(scores, labels) - brute_auc(scores, labels)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_monotone_transform_invariance(seed):
    rng = np.random.default_rng(seed)
    labels = np.r_[0, 1, rng.integers(0, 2, 60)]
    scores = rng.integers(0, 10, len(labels)) / 10
    f = lambda s: np.exp(3 * s) - 7  # noqa: E731
    a = compute_metrics(scores, labels, threshold=0.5)
    b = compute_metrics(f(scores), labels, threshold=f(0.5))
    assert a.auc == pytest.approx(b.auc, abs=1e-12)
    assert a.aupr == pytest.approx(b.aupr, abs=1e-12)
    assert a.f1 == b.f1


def test_predictions_file():
    buf = io.StringIO()
    write_predictions(buf, [("u1", "v1", 0.25, 1), ("u2", "v3", 3.0, 0)])
    assert buf.getvalue() == "u1\tv1\t0.25\t1\nu2\tv3\t3\t0\n"
