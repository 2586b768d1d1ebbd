"""Dataset container, CSV interchange, synthetic generation and fold planning.

The customer base is a plain numeric matrix with a rare binary target
(1 = customer shared data). Everything downstream (rebalancing, boosting,
explanation) consumes and produces this one type.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .seeding import rng_stream

KINDS = ("continuous", "count", "binary")


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature names with a per-feature kind tag."""

    names: tuple
    kinds: tuple

    def __post_init__(self):
        names = tuple(self.names)
        kinds = tuple(self.kinds)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "kinds", kinds)
        if len(names) == 0:
            raise ValueError("schema needs at least one feature")
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        if any(not n for n in names):
            raise ValueError("feature names must be nonempty")
        if len(kinds) != len(names):
            raise ValueError("kinds and names must have the same length")
        for k in kinds:
            if k not in KINDS:
                raise ValueError(f"unknown feature kind {k!r}")

    @property
    def n_features(self) -> int:
        return len(self.names)

    def to_dict(self) -> dict:
        return {"names": list(self.names), "kinds": list(self.kinds)}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(names=tuple(d["names"]), kinds=tuple(d["kinds"]))


class Dataset:
    """Immutable feature matrix plus binary labels (1 = shared data).

    Validates on construction: all entries finite, labels in {0,1},
    binary-tagged columns restricted to {0,1}.
    """

    def __init__(self, schema: FeatureSchema, rows: np.ndarray, labels: np.ndarray):
        rows = np.ascontiguousarray(rows, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if rows.ndim != 2:
            raise ValueError("rows must be a 2-D matrix")
        if rows.shape[1] != schema.n_features:
            raise ValueError(
                f"row width {rows.shape[1]} does not match schema ({schema.n_features} features)"
            )
        if labels.shape != (rows.shape[0],):
            raise ValueError("labels length must equal row count")
        if not np.all(np.isfinite(rows)):
            raise ValueError("matrix entries must be finite (no NaN/Inf)")
        bad = (labels != 0) & (labels != 1)
        if bad.any():
            raise ValueError(f"label outside {{0,1}} at row {int(np.flatnonzero(bad)[0])}")
        for j, kind in enumerate(schema.kinds):
            if kind == "binary":
                col = rows[:, j]
                if not np.all((col == 0.0) | (col == 1.0)):
                    raise ValueError(f"binary feature {schema.names[j]!r} has values outside {{0,1}}")
        rows.setflags(write=False)
        labels.setflags(write=False)
        self.schema = schema
        self.rows = rows
        self.labels = labels

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())

    @property
    def n_negative(self) -> int:
        return self.n - self.n_positive

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.schema, self.rows[idx], self.labels[idx])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.schema == other.schema
            and self.rows.shape == other.rows.shape
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.labels, other.labels)
        )

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, d={self.d}, positives={self.n_positive})"


@dataclass(frozen=True)
class ScalerParams:
    """Per-column centering/scaling constants (zero spread replaced by 1)."""

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        stds = np.asarray(self.stds, dtype=np.float64)
        if np.any(stds <= 0):
            raise ValueError("stddev entries must be strictly positive")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)


@dataclass(frozen=True)
class FoldPlan:
    """Stratified fold assignment for k-fold cross-validation.

    ``positive_free`` flags folds that received no positive instance, which
    is unavoidable at rare-event prevalence when k exceeds the positive
    count; metric aggregation downstream excludes those folds from the
    positive-dependent metrics.
    """

    k: int
    assignments: np.ndarray
    seed: int
    positive_free: np.ndarray = field(default=None)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


# ---------------------------------------------------------------------------
# Synthetic generator
# ---------------------------------------------------------------------------

# Default feature family: engagement counts, digital/credit flags and credit
# values, named after the behavioural drivers the reports should surface.
# Draw parameters are (kind, args) consumed by _draw_feature. Spreads are
# deliberately comparable across features: a single dominant heavy tail
# would concentrate ADASYN synthesis at the class boundary and fail the
# distribution audit, and coarse count supports do the same.
DEFAULT_FEATURES = (
    ("mobile_interactions", "count", (2.3, 0.30)),
    ("mobile_transactions", "count", (1.95, 0.40)),
    ("digital_activity_flag", "binary", (0.7,)),
    ("credit_value_total", "continuous", (1.35, 0.45)),
    ("natsys_cc_credit_value", "continuous", (0.9, 0.55)),
    ("overdue_credit_flag", "binary", (0.18,)),
    ("education_level", "count", (1.8, 0.35)),
)

DEFAULT_SCHEMA = FeatureSchema(
    names=tuple(f[0] for f in DEFAULT_FEATURES),
    kinds=tuple(f[1] for f in DEFAULT_FEATURES),
)

# Planted logit coefficients; mobile_interactions carries the largest
# weight AND the largest score-variance contribution so it is recoverable
# by importance ranking. Flags stay small: their coefficient would blow up
# relative to their tiny spread otherwise.
DEFAULT_COEFFICIENTS = (0.40, 0.38, 0.20, 0.37, 0.39, 0.18, 0.34)

# Observed base-rate presets: data import (inflow) vs export (outflow).
PREVALENCE_INFLOW = 0.00093
PREVALENCE_OUTFLOW = 0.0038


@dataclass(frozen=True)
class GeneratorConfig:
    n: int
    prevalence: float = PREVALENCE_OUTFLOW
    coefficients: tuple = DEFAULT_COEFFICIENTS
    intercept: float = 0.0
    noise_sd: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.prevalence < 1.0):
            raise ValueError("prevalence must lie in (0,1)")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")
        if self.n * self.prevalence < 1.0:
            raise ValueError("n too small: n * prevalence must be at least 1")
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))


def _draw_feature(rng: np.random.Generator, n: int, kind: str, args: tuple) -> np.ndarray:
    if kind == "count":
        mu, sigma = args
        return np.floor(rng.lognormal(mean=mu, sigma=sigma, size=n))
    if kind == "binary":
        (p,) = args
        return (rng.random(n) < p).astype(np.float64)
    mu, sigma = args
    return rng.lognormal(mean=mu, sigma=sigma, size=n)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def generate_synthetic(cfg: GeneratorConfig, features=DEFAULT_FEATURES) -> Dataset:
    """Draw a synthetic customer base with a planted rare-event signal.

    Features are drawn per kind (heavy-tailed integer counts, Bernoulli
    flags, log-normal positive values). A logit score
    ``rows @ coefficients + intercept + noise`` ranks the rows and exactly
    ``round(n * prevalence)`` top-scoring rows get label 1, ties broken by
    row index. Fully determined by ``cfg.seed``.
    """
    schema = FeatureSchema(
        names=tuple(f[0] for f in features), kinds=tuple(f[1] for f in features)
    )
    if len(cfg.coefficients) != schema.n_features:
        raise ValueError(
            f"{len(cfg.coefficients)} coefficients for {schema.n_features} features"
        )
    rng = rng_stream(cfg.seed, "generate")
    n = int(cfg.n)
    X = np.empty((n, schema.n_features), dtype=np.float64)
    for j, (_, kind, args) in enumerate(features):
        X[:, j] = _draw_feature(rng, n, kind, args)
    score = X @ np.asarray(cfg.coefficients) + cfg.intercept
    if cfg.noise_sd > 0:
        score = score + cfg.noise_sd * rng.standard_normal(n)
    n_pos = _round_half_up(n * cfg.prevalence)
    # descending score, ties resolved by ascending row index
    order = np.lexsort((np.arange(n), -score))
    labels = np.zeros(n, dtype=np.int64)
    labels[order[:n_pos]] = 1
    return Dataset(schema, X, labels)


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------


def _infer_kinds(X: np.ndarray) -> tuple:
    kinds = []
    for j in range(X.shape[1]):
        col = X[:, j]
        if np.all((col == 0.0) | (col == 1.0)):
            kinds.append("binary")
        elif np.all(col == np.floor(col)):
            kinds.append("count")
        else:
            kinds.append("continuous")
    return tuple(kinds)


def load_csv(path, schema="infer") -> Dataset:
    """Parse a dataset CSV (header row, final column ``label``).

    ``schema`` may be a FeatureSchema (validated against the header) or
    "infer", which tags {0,1}-valued columns binary, integer-valued columns
    count and everything else continuous.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row")
        if len(header) < 2:
            raise ValueError(f"{path}: need at least one feature column plus 'label'")
        if header[-1] != "label":
            raise ValueError(f"{path}: last column must be named 'label', got {header[-1]!r}")
        names = header[:-1]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise ValueError(f"{path}: duplicate header name {dup!r}")
        rows = []
        labels = []
        for i, rec in enumerate(reader, start=1):
            if len(rec) != len(header):
                raise ValueError(f"{path}: row {i} has {len(rec)} cells, expected {len(header)}")
            vals = []
            for j, cell in enumerate(rec[:-1]):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: non-numeric cell {cell!r} at row {i}, column {names[j]}"
                    ) from None
            try:
                lab = float(rec[-1])
            except ValueError:
                raise ValueError(
                    f"{path}: non-numeric cell {rec[-1]!r} at row {i}, column label"
                ) from None
            if lab not in (0.0, 1.0):
                raise ValueError(f"{path}: label value {rec[-1]!r} outside {{0,1}} at row {i}")
            rows.append(vals)
            labels.append(int(lab))
    X = np.asarray(rows, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.size == 0:
        raise ValueError(f"{path}: no data rows")
    if isinstance(schema, str):
        if schema != "infer":
            raise ValueError(f"schema must be a FeatureSchema or 'infer', got {schema!r}")
        schema = FeatureSchema(names=tuple(names), kinds=_infer_kinds(X))
    else:
        if tuple(schema.names) != tuple(names):
            raise ValueError(f"{path}: header does not match the provided schema names")
    return Dataset(schema, X, y)


def write_csv(ds: Dataset, path) -> None:
    """Write a dataset CSV with full round-trip float precision."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.schema.names) + ["label"])
        for i in range(ds.n):
            writer.writerow([repr(float(v)) for v in ds.rows[i]] + [int(ds.labels[i])])


def write_schema_sidecar(schema: FeatureSchema, path) -> None:
    Path(path).write_text(json.dumps(schema.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_schema_sidecar(path) -> FeatureSchema:
    return FeatureSchema.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------


def fit_scaler(ds: Dataset) -> ScalerParams:
    """Mean/stddev per continuous/count column (sample stddev, n-1).

    Binary and constant columns get (0, 1) so scaling passes them through
    unchanged.
    """
    if ds.n == 0:
        raise ValueError("cannot standardize an empty dataset")
    means = np.zeros(ds.d)
    stds = np.ones(ds.d)
    for j, kind in enumerate(ds.schema.kinds):
        if kind == "binary":
            continue
        col = ds.rows[:, j]
        sd = col.std(ddof=1) if ds.n > 1 else 0.0
        if sd > 0:
            means[j] = col.mean()
            stds[j] = sd
    return ScalerParams(means=means, stds=stds)


def apply_scaler(ds: Dataset, params: ScalerParams) -> Dataset:
    X = (ds.rows - params.means) / params.stds
    return Dataset(ds.schema, X, ds.labels)


def scale_matrix(X: np.ndarray, params: ScalerParams) -> np.ndarray:
    return (X - params.means) / params.stds


def standardize(ds: Dataset) -> tuple:
    """Standardize continuous/count columns to mean 0, stddev 1 (sample
    convention); binary and constant columns untouched. Returns the scaled
    dataset and the fitted ScalerParams."""
    params = fit_scaler(ds)
    return apply_scaler(ds, params), params


# ---------------------------------------------------------------------------
# Stratified fold planning
# ---------------------------------------------------------------------------


def stratified_kfold(ds: Dataset, k: int, seed: int) -> FoldPlan:
    """Assign rows to k folds, balancing size and per-fold positive counts.

    Fold sizes differ by at most 1, per-fold positive counts differ by at
    most 1. Folds that end up without a positive (possible when positives
    < k) are flagged rather than rejected.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > ds.n:
        raise ValueError(f"k={k} exceeds the row count n={ds.n}")
    if ds.n_positive == 0 or ds.n_negative == 0:
        raise ValueError("both classes must be present for stratified folding")
    rng = rng_stream(seed, "kfold")
    pos = np.flatnonzero(ds.labels == 1)
    neg = np.flatnonzero(ds.labels == 0)
    rng.shuffle(pos)
    rng.shuffle(neg)
    fold_order = rng.permutation(k)

    assignments = np.empty(ds.n, dtype=np.int64)
    for i, idx in enumerate(pos):
        assignments[idx] = fold_order[i % k]
    # target fold sizes: n//k, +1 for the first n%k folds (in shuffled order)
    sizes = np.full(k, ds.n // k, dtype=np.int64)
    sizes[fold_order[: ds.n % k]] += 1
    pos_counts = np.bincount(assignments[pos], minlength=k)
    remaining = sizes - pos_counts
    cursor = 0
    for f in fold_order:
        take = int(remaining[f])
        for idx in neg[cursor : cursor + take]:
            assignments[idx] = f
        cursor += take
    positive_free = np.bincount(assignments[pos], minlength=k) == 0
    return FoldPlan(k=k, assignments=assignments, seed=int(seed), positive_free=positive_free)
