"""Classification metrics and stratified cross-validation.

PR-AUC is average precision: the step-wise sum AP = sum_k (R_k - R_{k-1}) P_k
over distinct score thresholds in descending order, with tied scores collapsed
into one threshold group. No trapezoidal interpolation.

Ratio metrics that would divide by zero return None ("undefined"), never NaN.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .boosting import BoostParams, GradientBoostedEnsemble, predict_proba, train
from .dataset import Dataset, stratified_kfold
from .resample import HybridConfig, hybrid_balance
from .seeding import stream_seed

METRIC_NAMES = ("pr_auc", "recall", "specificity", "accuracy")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


def confusion(labels, scores, threshold: float = 0.5) -> ConfusionCounts:
    """Tally the confusion table; predicted positive iff score >= threshold."""
    y = np.asarray(labels)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 1:
        raise ValueError("labels and scores must be equal-length vectors")
    if not (0.0 < threshold < 1.0):
        raise ValueError("threshold must lie in (0,1)")
    pred = s >= threshold
    pos = y == 1
    return ConfusionCounts(
        tp=int(np.sum(pred & pos)),
        fp=int(np.sum(pred & ~pos)),
        tn=int(np.sum(~pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
    )


def metrics_from_confusion(c: ConfusionCounts) -> dict:
    """Accuracy, recall, specificity; None where the denominator is zero."""
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn > 0 else None
    specificity = c.tn / (c.tn + c.fp) if c.tn + c.fp > 0 else None
    accuracy = (c.tp + c.tn) / c.total if c.total > 0 else None
    return {"accuracy": accuracy, "recall": recall, "specificity": specificity}


def pr_auc(labels, scores) -> float:
    """Average precision over descending distinct-score threshold groups."""
    y = np.asarray(labels)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 1:
        raise ValueError("labels and scores must be equal-length vectors")
    n_pos = int(np.sum(y == 1))
    if n_pos == 0:
        raise ValueError("pr_auc needs at least one positive label")

    order = np.argsort(-s, kind="stable")
    y_sorted = (y[order] == 1).astype(np.int64)
    s_sorted = s[order]
    # last index of each tied-score group
    group_end = np.nonzero(np.diff(s_sorted))[0]
    group_end = np.append(group_end, len(s_sorted) - 1)

    cum_tp = np.cumsum(y_sorted)[group_end]
    cum_n = group_end + 1
    delta_tp = np.diff(cum_tp, prepend=0)
    precision = cum_tp / cum_n
    return float(np.sum((delta_tp / n_pos) * precision))


@dataclass(frozen=True)
class FoldMetrics:
    index: int
    pr_auc: float | None
    recall: float | None
    specificity: float | None
    accuracy: float | None
    positives: int

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "pr_auc": self.pr_auc,
            "recall": self.recall,
            "specificity": self.specificity,
            "accuracy": self.accuracy,
            "positives": self.positives,
        }


def fold_metrics(index, labels, scores, threshold: float = 0.5) -> FoldMetrics:
    """Score one test fold; pr_auc/recall are None when it has no positives."""
    c = confusion(labels, scores, threshold)
    m = metrics_from_confusion(c)
    positives = c.tp + c.fn
    ap = pr_auc(labels, scores) if positives > 0 else None
    return FoldMetrics(
        index=int(index),
        pr_auc=ap,
        recall=m["recall"],
        specificity=m["specificity"],
        accuracy=m["accuracy"],
        positives=positives,
    )


@dataclass(frozen=True)
class MetricsSummary:
    folds: tuple
    means: dict
    stds: dict
    k: int
    seed: int
    excluded_positive_free: int

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "excluded_positive_free": self.excluded_positive_free,
            "means": dict(self.means),
            "stds": dict(self.stds),
            "folds": [f.to_dict() for f in self.folds],
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text

    def table(self) -> str:
        """Fixed-width `metric  mean (std)` block, five decimals."""
        width = max(len(m) for m in METRIC_NAMES)
        lines = []
        for m in METRIC_NAMES:
            lines.append(f"{m:<{width}}  {render_mean_std(self.means[m], self.stds[m])}")
        return "\n".join(lines)


def render_mean_std(mean, std) -> str:
    if mean is None:
        return "undefined"
    return f"{mean:.5f} ({std:.5f})"


def aggregate_folds(folds, k: int, seed: int) -> MetricsSummary:
    """Mean and sample std (n-1) per metric over folds where it is defined."""
    means, stds = {}, {}
    for name in METRIC_NAMES:
        vals = [getattr(f, name) for f in folds if getattr(f, name) is not None]
        if not vals:
            means[name] = None
            stds[name] = None
        else:
            means[name] = float(np.mean(vals))
            stds[name] = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
    excluded = sum(1 for f in folds if f.positives == 0)
    return MetricsSummary(
        folds=tuple(folds),
        means=means,
        stds=stds,
        k=k,
        seed=seed,
        excluded_positive_free=excluded,
    )


@dataclass(frozen=True)
class PreparedFold:
    """One CV fold with its training portion already (optionally) rebalanced."""

    index: int
    train: Dataset
    test: Dataset


def prepare_cv_folds(
    ds: Dataset, k: int, seed: int, resample: HybridConfig = None
) -> tuple:
    """Split and rebalance once; fitting against the result is seed-stable.

    Rebalancing depends only on (fold, seed), not on model parameters, so a
    tuning loop can reuse the prepared folds across every candidate it scores.
    Each fold's oversampler reseeds from (seed, fold index), which keeps folds
    independent of evaluation order.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    plan = stratified_kfold(ds, k, seed)
    prepared = []
    for i in range(k):
        train_ds = ds.subset(plan.train_indices(i))
        if resample is not None:
            ad = replace(resample.adasyn, seed=stream_seed(seed, "fold", i))
            train_ds, _ = hybrid_balance(train_ds, ad, resample.nearmiss, resample.alpha)
        prepared.append(PreparedFold(i, train_ds, ds.subset(plan.test_indices(i))))
    return tuple(prepared)


def score_prepared_folds(
    prepared, params: BoostParams, k: int, seed: int, threshold: float = 0.5
) -> MetricsSummary:
    folds = []
    for pf in prepared:
        model = train(pf.train, params, seed=stream_seed(seed, "fold", pf.index))
        scores = predict_proba(model, pf.test.rows)
        folds.append(fold_metrics(pf.index, pf.test.labels, scores, threshold))
    return aggregate_folds(folds, k, seed)


def cross_validate(
    ds: Dataset,
    params: BoostParams,
    k: int = 100,
    seed: int = 0,
    resample: HybridConfig = None,
    threshold: float = 0.5,
) -> MetricsSummary:
    """Stratified k-fold CV; any rebalancing touches training portions only.

    Test folds are scored untouched. Positive-free test folds contribute to
    accuracy/specificity but are excluded from recall/PR-AUC aggregation and
    counted in the summary's exclusion field.
    """
    prepared = prepare_cv_folds(ds, k, seed, resample)
    return score_prepared_folds(prepared, params, k, seed, threshold)


def evaluate_holdout(
    model: GradientBoostedEnsemble, ds: Dataset, threshold: float = 0.5
) -> FoldMetrics:
    """Score a fitted model on one untouched dataset (fold index -1)."""
    scores = predict_proba(model, ds.rows)
    return fold_metrics(-1, ds.labels, scores, threshold)
