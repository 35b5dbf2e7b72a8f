"""F1, ROC AUC and area under the precision-recall curve."""

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass
class EvalReport:
    f1: float
    auc: float
    aupr: float
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def precision(self):
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self):
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    def to_dict(self):
        d = asdict(self)
        counts = {k: d.pop(k) for k in ("tp", "fp", "tn", "fn")}
        d["counts"] = counts
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _check(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-d arrays of equal length")
    if not np.isfinite(scores).all():
        raise ValueError("scores must be finite")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    labels = labels.astype(bool)
    if labels.all() or not labels.any():
        raise ValueError("need at least one positive and one negative label")
    return scores, labels


def roc_auc(scores, labels):
    """Mann-Whitney U / (n_pos * n_neg); tied scores count one half."""
    scores, labels = _check(scores, labels)
    ranks = rankdata(scores)  # average ranks for ties
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def precision_recall_curve(scores, labels):
    """Precision and recall at every distinct score threshold, highest first."""
    scores, labels = _check(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    y = labels[order].astype(np.float64)
    tps = np.cumsum(y)
    fps = np.cumsum(1.0 - y)
    # last index of every run of equal scores
    ends = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tps, fps = tps[ends], fps[ends]
    precision = tps / (tps + fps)
    recall = tps / labels.sum()
    return precision, recall, s[ends]


def aupr(scores, labels):
    """Step-interpolated area: sum of precision times recall increment.

    The segment from recall 0 to the first point uses the first point's
    precision.
    """
    precision, recall, _ = precision_recall_curve(scores, labels)
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def confusion(scores, labels, threshold):
    """``(tp, fp, tn, fn)`` with ``score >= threshold`` predicted positive."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    pred = scores >= threshold
    tp = int(np.sum(pred & labels))
    fp = int(np.sum(pred & ~labels))
    tn = int(np.sum(~pred & ~labels))
    fn = int(np.sum(~pred & labels))
    return tp, fp, tn, fn


def f1_score(tp, fp, fn):
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def compute_metrics(scores, labels, threshold=0.5):
    """Evaluate scored pairs; returns an :class:`EvalReport`."""
    scores, labels = _check(scores, labels)
    tp, fp, tn, fn = confusion(scores, labels, threshold)
    return EvalReport(
        f1=float(f1_score(tp, fp, fn)),
        auc=roc_auc(scores, labels),
        aupr=aupr(scores, labels),
        threshold=float(threshold),
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
    )
