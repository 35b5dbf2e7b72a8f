"""Command-line pipeline: split, mine, prepare, train, evaluate, pipeline.

Every stage reads and writes plain files under ``--out-dir`` so it can be
rerun on its own.  Randomness comes from one root ``--seed`` split into
named sub-streams, so rerunning a stage reproduces its output exactly.

Exit codes: 0 success, 2 usage error, 3 invalid input or parameters,
4 file-system error.
"""

import argparse
import json
import logging
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ._rng import derive_seed
from .baselines import HEURISTICS, HeuristicScorer, SVDScorer, write_predictions
from .context import (
    ContextParseError,
    generate_test_set,
    load_context,
    read_labeled_pairs,
    split_input_target,
    write_pairs,
    write_test_set,
)
from .metrics import compute_metrics
from .miner import SizeBounds, mine_significant, read_concepts, write_concepts
from .samples import Vocabulary, generate_context_samples, prepare_samples, read_samples, write_samples

logger = logging.getLogger("conceptlink")

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_IO = 0, 2, 3, 4

METHODS = ("model", "svd") + HEURISTICS


class CommandError(Exception):
    def __init__(self, message, code=EXIT_INVALID):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    out_dir: str = "run"
    context: str = None
    input_context: str = None
    removed_edges: str = None
    test_set: str = None
    concepts: str = None
    samples: str = None
    checkpoint: str = None
    train_log: str = None
    l1: int = None
    u1: str = None
    l2: int = None
    u2: str = None
    k: float = 0.5
    fraction: float = 0.1
    profile: str = "desk"
    num_layers: int = None
    num_heads: int = None
    model_dim: int = None
    ffn_dim: int = None
    mlp_hidden: int = None
    dropout: float = 0.1
    epochs: int = 180
    batch_size: int = 24
    lr: float = 1e-4
    seed: int = 0
    threads: int = 1
    method: str = "model"
    methods: list = field(default_factory=lambda: ["model", "cn"])
    rank: int = 64
    threshold: float = None

    PATH_FIELDS = (
        "out_dir", "context", "input_context", "removed_edges", "test_set",
        "concepts", "samples", "checkpoint", "train_log",
    )

    def path(self, name, default_file):
        value = getattr(self, name)
        return value if value else os.path.join(self.out_dir, default_file)

    def provenance(self):
        """Effective parameters echoed into every output.

        File paths and the scorer selection are left out; reports carry
        their own ``method`` key.
        """
        d = asdict(self)
        for name in self.PATH_FIELDS + ("method", "methods"):
            d.pop(name, None)
        return d

    def bounds(self):
        missing = [n for n in ("l1", "u1", "l2", "u2") if getattr(self, n) is None]
        if missing:
            raise CommandError(f"size bounds {', '.join(missing)} are required (use 'inf' for no upper bound)")

        def upper(v):
            if isinstance(v, str) and v.lower() in ("inf", "none", "unbounded"):
                return None
            return int(v)

        try:
            return SizeBounds(int(self.l1), upper(self.u1), int(self.l2), upper(self.u2))
        except ValueError as exc:
            raise CommandError(f"invalid size bounds: {exc}") from None


def _header(cfg, stage):
    return [f"stage={stage} seed={cfg.seed}", "config=" + json.dumps(cfg.provenance(), sort_keys=True)]


def _load_universe(cfg):
    """Original context (all nodes) if available, else ``None``."""
    path = cfg.context
    if path and os.path.exists(path):
        return load_context(path)
    return None


def _load_input_context(cfg):
    path = cfg.path("input_context", "input_context.tsv")
    if not os.path.exists(path):
        if cfg.context and os.path.exists(cfg.context):
            return load_context(cfg.context)
        raise CommandError(f"input context {path} not found; run 'split' first or pass --input-context", EXIT_IO)
    universe = _load_universe(cfg)
    if universe is None:
        return load_context(path)
    return load_context(path, objects=universe.objects, attributes=universe.attributes)


# -- stages ----------------------------------------------------------------------


def cmd_split(cfg):
    if not cfg.context:
        raise CommandError("--context is required for split")
    ctx = load_context(cfg.context)
    split = split_input_target(ctx, cfg.fraction, derive_seed(cfg.seed, "split"))
    _, t_n, _ = generate_context_samples(split.input_context, derive_seed(cfg.seed, "context_negatives"))
    test = generate_test_set(split, t_n, derive_seed(cfg.seed, "test_negatives"))
    header = _header(cfg, "split")
    write_pairs(cfg.path("input_context", "input_context.tsv"), split.input_context.edges(), header)
    write_pairs(cfg.path("removed_edges", "removed_edges.tsv"), split.removed_ids(), header)
    write_test_set(cfg.path("test_set", "test_set.tsv"), split.input_context, test, header)
    logger.info(
        "split: %d edges kept, %d removed, %d test negatives",
        split.input_context.n_incidences, len(split.removed_edges), len(test.negatives),
    )
    return split, test


def cmd_mine(cfg):
    bounds = cfg.bounds()
    ctx = _load_input_context(cfg)
    concepts = mine_significant(ctx, bounds)
    if not len(concepts):
        warnings.warn(f"no concepts satisfy {bounds.describe()}", RuntimeWarning, stacklevel=2)
    write_concepts(cfg.path("concepts", "concepts.tsv"), concepts, _header(cfg, "mine"))
    logger.info("mine: %d concepts with %s", len(concepts), bounds.describe())
    return concepts


def cmd_prepare(cfg):
    ctx = _load_input_context(cfg)
    concepts_path = cfg.path("concepts", "concepts.tsv")
    if not os.path.exists(concepts_path):
        raise CommandError(f"concepts file {concepts_path} not found; run 'mine' first", EXIT_IO)
    concepts = read_concepts(concepts_path, ctx)
    sample_set = prepare_samples(
        concepts,
        ctx,
        k=cfg.k,
        distractor_seed=derive_seed(cfg.seed, "distractor"),
        context_seed=derive_seed(cfg.seed, "context_negatives"),
    )
    meta = {
        "k": cfg.k,
        "seed": cfg.seed,
        "bounds": concepts.bounds.describe(),
        "vocabulary": Vocabulary.from_context(ctx).to_dict(),
        "notes": sample_set.notes,
        "config": cfg.provenance(),
    }
    write_samples(cfg.path("samples", "samples.jsonl"), sample_set, meta)
    logger.info(
        "prepare: %d samples (C_p=%d C_n=%d T_p=%d T_n=%d), l_ext=%d l_int=%d",
        len(sample_set), len(sample_set.c_p), len(sample_set.c_n), len(sample_set.t_p),
        len(sample_set.t_n), sample_set.l_ext, sample_set.l_int,
    )
    return sample_set


def _encoder_config(cfg, vocab, l_ext, l_int):
    from .model import EncoderConfig

    dims = {
        name: getattr(cfg, name)
        for name in ("num_layers", "num_heads", "model_dim", "ffn_dim", "mlp_hidden")
        if getattr(cfg, name) is not None
    }
    try:
        return EncoderConfig.profile(
            cfg.profile, len(vocab), l_ext, l_int, dropout=cfg.dropout, seed=derive_seed(cfg.seed, "init"), **dims
        )
    except (TypeError, ValueError) as exc:
        raise CommandError(f"invalid encoder configuration: {exc}") from None


def cmd_train(cfg):
    from .model import save_checkpoint, train

    samples_path = cfg.path("samples", "samples.jsonl")
    if not os.path.exists(samples_path):
        raise CommandError(f"samples file {samples_path} not found; run 'prepare' first", EXIT_IO)
    meta, samples = read_samples(samples_path)
    vocab = Vocabulary(**meta["vocabulary"])
    enc_cfg = _encoder_config(cfg, vocab, meta["l_ext"], meta["l_int"])

    def progress(epoch, loss):
        logger.info("epoch %d/%d loss %.6f", epoch, cfg.epochs, loss)

    model, report = train(
        samples, vocab, enc_cfg, epochs=cfg.epochs, batch_size=cfg.batch_size, lr=cfg.lr,
        shuffle_seed=derive_seed(cfg.seed, "shuffle"), callback=progress,
    )
    extra = {"seed": cfg.seed, "epochs": cfg.epochs, "config": cfg.provenance(),
             "final_loss": report.epoch_losses[-1] if report.epoch_losses else None}
    save_checkpoint(cfg.path("checkpoint", "model.ckpt"), model, vocab, extra)
    with open(cfg.path("train_log", "train_log.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.log_csv())
    return model, report


def _scores(cfg, method, pairs):
    if method == "model":
        from .model import load_checkpoint, predict_pairs

        path = cfg.path("checkpoint", "model.ckpt")
        if not os.path.exists(path):
            raise CommandError(f"checkpoint {path} not found; run 'train' first", EXIT_IO)
        model, vocab, _ = load_checkpoint(path)
        try:
            return predict_pairs(model, vocab, pairs), 0.5
        except KeyError as exc:
            raise CommandError(f"test pair outside the model vocabulary: {exc}") from None
    ctx = _load_input_context(cfg)
    if method == "svd":
        try:
            scorer = SVDScorer(ctx, min(cfg.rank, ctx.n_objects, ctx.n_attributes))
        except ValueError as exc:
            raise CommandError(str(exc)) from None
        return scorer.score_pairs(pairs), 0.5
    scores = HeuristicScorer(ctx, method).score_pairs(pairs)
    # heuristic scores are unnormalized; on a balanced test set the median splits it in half
    return scores, float(np.median(scores))


def cmd_evaluate(cfg, method=None):
    method = (method or cfg.method).lower()
    if method not in METHODS:
        raise CommandError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    test_path = cfg.path("test_set", "test_set.tsv")
    if not os.path.exists(test_path):
        raise CommandError(f"test set {test_path} not found; run 'split' first", EXIT_IO)
    rows = read_labeled_pairs(test_path)
    pairs = [(o, a) for o, a, _ in rows]
    labels = np.array([lab for _, _, lab in rows])
    scores, default_threshold = _scores(cfg, method, pairs)
    threshold = default_threshold if cfg.threshold is None else cfg.threshold
    try:
        report = compute_metrics(scores, labels, threshold)
    except ValueError as exc:
        raise CommandError(f"cannot evaluate: {exc}") from None
    write_predictions(
        os.path.join(cfg.out_dir, f"predictions_{method}.tsv"),
        [(o, a, s, lab) for (o, a), s, lab in zip(pairs, scores, labels)],
    )
    out = report.to_dict()
    out.update(method=method, seed=cfg.seed, config=cfg.provenance())
    with open(os.path.join(cfg.out_dir, f"report_{method}.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(out, indent=2, sort_keys=True) + "\n")
    logger.info("evaluate[%s]: F1 %.4f AUC %.4f AUPR %.4f", method, report.f1, report.auc, report.aupr)
    return report


def cmd_pipeline(cfg):
    cmd_split(cfg)
    cmd_mine(cfg)
    cmd_prepare(cfg)
    if "model" in cfg.methods:
        cmd_train(cfg)
    return {m: cmd_evaluate(cfg, m) for m in cfg.methods}


COMMANDS = {
    "split": cmd_split,
    "mine": cmd_mine,
    "prepare": cmd_prepare,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "pipeline": cmd_pipeline,
}


# -- argument handling -----------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common")
    g.add_argument("--config", help="JSON file of parameters; flags override it")
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int, help="torch intra-op threads (1 = bit-deterministic)")
    g.add_argument("--out-dir", dest="out_dir")
    g.add_argument("-v", "--verbose", action="store_true")
    p = common.add_argument_group("paths")
    for name in ("context", "input-context", "removed-edges", "test-set", "concepts", "samples", "checkpoint",
                 "train-log"):
        p.add_argument(f"--{name}", dest=name.replace("-", "_"))
    b = common.add_argument_group("mining")
    b.add_argument("--l1", type=int, help="minimum extent size")
    b.add_argument("--u1", help="maximum extent size or 'inf'")
    b.add_argument("--l2", type=int, help="minimum intent size")
    b.add_argument("--u2", help="maximum intent size or 'inf'")
    s = common.add_argument_group("sampling and split")
    s.add_argument("--k", type=float, help="distractor replacement fraction in (0, 1)")
    s.add_argument("--fraction", type=float, help="fraction of edges held out")
    m = common.add_argument_group("model and training")
    m.add_argument("--profile", choices=("desk", "paper", "custom"))
    m.add_argument("--num-layers", dest="num_layers", type=int)
    m.add_argument("--num-heads", dest="num_heads", type=int)
    m.add_argument("--model-dim", dest="model_dim", type=int)
    m.add_argument("--ffn-dim", dest="ffn_dim", type=int)
    m.add_argument("--mlp-hidden", dest="mlp_hidden", type=int)
    m.add_argument("--dropout", type=float)
    m.add_argument("--epochs", type=int)
    m.add_argument("--batch-size", dest="batch_size", type=int)
    m.add_argument("--lr", type=float)
    e = common.add_argument_group("evaluation")
    e.add_argument("--method", choices=METHODS)
    e.add_argument("--methods", type=lambda s: [x.strip() for x in s.split(",") if x.strip()],
                   help="comma-separated methods evaluated by 'pipeline'")
    e.add_argument("--rank", type=int, help="truncated SVD rank")
    e.add_argument("--threshold", type=float, help="decision threshold for F1")

    parser = argparse.ArgumentParser(prog="conceptlink", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=COMMANDS[name].__name__.replace("cmd_", "") + " stage")
    return parser


def resolve_config(args):
    values = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                values.update(json.load(fh))
        except OSError as exc:
            raise CommandError(f"cannot read config: {exc}", EXIT_IO) from None
        except json.JSONDecodeError as exc:
            raise CommandError(f"config is not valid JSON: {exc}") from None
    known = {f.name for f in fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise CommandError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for name in known:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    return RunConfig(**values)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        cfg = resolve_config(args)
        if cfg.method not in METHODS or any(m not in METHODS for m in cfg.methods):
            raise CommandError(f"methods must be among {', '.join(METHODS)}")
        os.makedirs(cfg.out_dir, exist_ok=True)
        if "torch" in sys.modules or args.command in ("train", "evaluate", "pipeline"):
            import torch

            torch.set_num_threads(max(1, cfg.threads))
        result = COMMANDS[args.command](cfg)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ContextParseError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.command == "evaluate" or args.command == "pipeline":
        reports = result if isinstance(result, dict) else {cfg.method: result}
        for name, rep in reports.items():
            print(f"{name}: F1={rep.f1:.4f} AUC={rep.auc:.4f} AUPR={rep.aupr:.4f}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
