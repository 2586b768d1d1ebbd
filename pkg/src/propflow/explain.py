"""Attribution and surrogate explanation for boosted-tree models.

Per-feature attributions use the path-dependent tree convention: stored node
covers act as conditional-expectation weights, so the base value is the
cover-weighted mean prediction over the training set. Attributions live on
the margin (logit) scale; probabilities come from applying the sigmoid to
the reconstructed total, never per feature.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._kernels import expected_leaf_value, shap_matrix_kernel
from .boosting import GradientBoostedEnsemble, predict_margin
from .dataset import Dataset, FeatureSchema, stratified_kfold


# ---------------------------------------------------------------------------
# attribution containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShapRow:
    """Additive decomposition: base_value + phi.sum() reconstructs margin."""

    phi: np.ndarray
    base_value: float
    margin: float

    def additivity_residual(self) -> float:
        return abs(self.base_value + float(self.phi.sum()) - self.margin)

    def to_dict(self) -> dict:
        return {
            "phi": [float(v) for v in self.phi],
            "base_value": self.base_value,
            "margin": self.margin,
        }


class ShapMatrix:
    """Per-instance attributions for a whole dataset; base value is shared."""

    __slots__ = ("schema", "phi", "base_value", "margins")

    def __init__(self, schema: FeatureSchema, phi, base_value: float, margins):
        phi = np.ascontiguousarray(phi, dtype=np.float64)
        margins = np.ascontiguousarray(margins, dtype=np.float64)
        if phi.ndim != 2 or phi.shape[1] != schema.n_features:
            raise ValueError("phi width does not match the schema")
        if margins.shape != (phi.shape[0],):
            raise ValueError("margins length does not match phi rows")
        phi.setflags(write=False)
        margins.setflags(write=False)
        self.schema = schema
        self.phi = phi
        self.base_value = float(base_value)
        self.margins = margins

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    def row(self, i: int) -> ShapRow:
        return ShapRow(self.phi[i], self.base_value, float(self.margins[i]))

    def to_csv(self, path) -> None:
        header = list(self.schema.names) + ["base_value", "margin"]
        lines = [",".join(header)]
        for i in range(self.n):
            cells = [repr(float(v)) for v in self.phi[i]]
            cells.append(repr(self.base_value))
            cells.append(repr(float(self.margins[i])))
            lines.append(",".join(cells))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# exact tree-path attribution
# ---------------------------------------------------------------------------


def _check_covers(model: GradientBoostedEnsemble) -> None:
    for t, tree in enumerate(model.trees):
        if np.any(tree.cover <= 0.0):
            raise ValueError(f"tree {t} has a node with nonpositive cover")


def base_value(model: GradientBoostedEnsemble) -> float:
    """Cover-weighted mean margin: base margin plus each tree's expectation."""
    total = model.base_margin
    for tree in model.trees:
        total += expected_leaf_value(
            tree.feature, tree.left, tree.right, tree.value, tree.cover
        )
    return float(total)


def tree_shap(model: GradientBoostedEnsemble, row) -> ShapRow:
    """Exact path-dependent attribution of one prediction."""
    x = np.ascontiguousarray(row, dtype=np.float64).reshape(1, -1)
    sm = shap_matrix_rows(model, x)
    return sm.row(0)


def shap_matrix_rows(model: GradientBoostedEnsemble, X) -> ShapMatrix:
    """Attributions for a bare feature matrix (no labels needed)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    model._check_width(X)
    _check_covers(model)
    tf, tt, tl, tr, tv, tc, offsets = model._pack()
    phi = shap_matrix_kernel(X, tf, tt, tl, tr, tv, tc, offsets)
    margins = predict_margin(model, X)
    return ShapMatrix(model.schema, phi, base_value(model), margins)


def shap_matrix(model: GradientBoostedEnsemble, ds: Dataset) -> ShapMatrix:
    if ds.schema != model.schema:
        raise ValueError("dataset schema does not match the model schema")
    return shap_matrix_rows(model, ds.rows)


def exact_shapley_oracle(model: GradientBoostedEnsemble, row) -> ShapRow:
    """Brute-force Shapley sum over all feature subsets; exponential in d.

    The coalition value v(S) conditions each tree on the features in S and
    averages the rest by cover, matching the path-dependent convention of
    tree_shap. Usable as an independent correctness oracle for d <= 12.
    """
    d = model.schema.n_features
    if d > 12:
        raise ValueError("exact_shapley_oracle is limited to d <= 12 features")
    x = np.ascontiguousarray(row, dtype=np.float64).reshape(-1)
    if x.shape[0] != d:
        raise ValueError("row width does not match the model schema")
    _check_covers(model)

    def cond_expect(tree, node: int, mask: int) -> float:
        if tree.feature[node] < 0:
            return float(tree.value[node])
        j = int(tree.feature[node])
        left, right = int(tree.left[node]), int(tree.right[node])
        if mask >> j & 1:
            child = left if x[j] <= tree.threshold[node] else right
            return cond_expect(tree, child, mask)
        wl = tree.cover[left] / tree.cover[node]
        wr = tree.cover[right] / tree.cover[node]
        return wl * cond_expect(tree, left, mask) + wr * cond_expect(tree, right, mask)

    cache = {}

    def value(mask: int) -> float:
        if mask not in cache:
            cache[mask] = model.base_margin + sum(
                cond_expect(tree, 0, mask) for tree in model.trees
            )
        return cache[mask]

    fact = [math.factorial(i) for i in range(d + 1)]
    phi = np.zeros(d)
    full = (1 << d) - 1
    for j in range(d):
        rest = [i for i in range(d) if i != j]
        for sub in range(1 << (d - 1)):
            mask = 0
            size = 0
            for b, i in enumerate(rest):
                if sub >> b & 1:
                    mask |= 1 << i
                    size += 1
            weight = fact[size] * fact[d - size - 1] / fact[d]
            phi[j] += weight * (value(mask | (1 << j)) - value(mask))
    return ShapRow(phi, value(0), value(full))


def importance_ranking(sm: ShapMatrix) -> "RankedImportance":
    """Mean |phi| per feature, descending, as absolute mass and % shares."""
    if sm.n == 0:
        raise ValueError("cannot rank an empty attribution matrix")
    mean_abs = np.abs(sm.phi).mean(axis=0)
    total = float(mean_abs.sum())
    d = mean_abs.shape[0]
    if total > 0.0:
        shares = mean_abs / total * 100.0
    else:
        shares = np.full(d, 100.0 / d)  # no attribution mass anywhere
    order = np.lexsort((np.arange(d), -mean_abs))
    entries = tuple(
        ImportanceEntry(sm.schema.names[j], float(mean_abs[j]), float(shares[j]))
        for j in order
    )
    return RankedImportance(entries)


@dataclass(frozen=True)
class ImportanceEntry:
    feature: str
    mean_abs_shap: float
    share_pct: float

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "mean_abs_shap": self.mean_abs_shap,
            "share_pct": self.share_pct,
        }


@dataclass(frozen=True)
class RankedImportance:
    entries: tuple

    def to_dict(self) -> list:
        return [e.to_dict() for e in self.entries]

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text

    def report(self) -> str:
        width = max(len(e.feature) for e in self.entries)
        return "\n".join(
            f"{e.feature:<{width}}  {e.share_pct:.2f}%" for e in self.entries
        )


# ---------------------------------------------------------------------------
# CART surrogate over attribution values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CartConfig:
    max_depth: int = 4
    min_leaf: int = 20
    cv_folds: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValueError("max_depth must be nonnegative")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be at least 1")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be at least 2")


class CartNode:
    """Binary Gini tree node; class counts kept at every node."""

    __slots__ = ("feature", "threshold", "left", "right", "n0", "n1")

    def __init__(self, n0, n1, feature=-1, threshold=0.0, left=None, right=None):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.n0 = int(n0)
        self.n1 = int(n1)

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    @property
    def klass(self) -> int:
        # majority class; exact tie resolves to 0
        return 1 if self.n1 > self.n0 else 0

    @property
    def purity(self) -> float:
        return max(self.n0, self.n1) / (self.n0 + self.n1)

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"class": self.klass, "counts": [self.n0, self.n1]}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "counts": [self.n0, self.n1],
            "class": self.klass,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }


def _gini(n0: int, n1: int) -> float:
    n = n0 + n1
    p = n1 / n
    return 2.0 * p * (1.0 - p)


def _best_split(X: np.ndarray, y: np.ndarray, idx: np.ndarray, min_leaf: int):
    """Lowest weighted child impurity; ties keep the first (feature, threshold)."""
    n = idx.size
    best = None
    for j in range(X.shape[1]):
        v = X[idx, j]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        cum1 = np.cumsum(y[idx][order])
        pos = np.nonzero(np.diff(vs) > 0)[0]
        if pos.size == 0:
            continue
        nl = pos + 1
        nr = n - nl
        ok = (nl >= min_leaf) & (nr >= min_leaf)
        if not ok.any():
            continue
        pos, nl, nr = pos[ok], nl[ok], nr[ok]
        l1 = cum1[pos]
        r1 = cum1[n - 1] - l1
        pl = l1 / nl
        pr = r1 / nr
        weighted = (nl * 2.0 * pl * (1.0 - pl) + nr * 2.0 * pr * (1.0 - pr)) / n
        i = int(np.argmin(weighted))  # first minimum: lowest threshold wins
        if best is None or weighted[i] < best[0]:
            a, b = vs[pos[i]], vs[pos[i] + 1]
            thr = 0.5 * (a + b)
            if thr >= b:  # midpoint rounded up to the right value
                thr = a
            best = (float(weighted[i]), j, thr)
    return best


def _grow(X, y, idx, depth, cfg: CartConfig) -> CartNode:
    n1 = int(y[idx].sum())
    n0 = idx.size - n1
    node = CartNode(n0, n1)
    if depth >= cfg.max_depth or n0 == 0 or n1 == 0 or idx.size < 2 * cfg.min_leaf:
        return node
    found = _best_split(X, y, idx, cfg.min_leaf)
    if found is None or found[0] >= _gini(n0, n1):
        return node
    _, j, thr = found
    mask = X[idx, j] <= thr
    node.feature = j
    node.threshold = thr
    node.left = _grow(X, y, idx[mask], depth + 1, cfg)
    node.right = _grow(X, y, idx[~mask], depth + 1, cfg)
    return node


def _predict_node(node: CartNode, X: np.ndarray, idx: np.ndarray, out: np.ndarray):
    if node.is_leaf:
        out[idx] = node.klass
        return
    mask = X[idx, node.feature] <= node.threshold
    _predict_node(node.left, X, idx[mask], out)
    _predict_node(node.right, X, idx[~mask], out)


class ExplanationTree:
    """Gini CART over attribution values, with fidelity and CV accuracy."""

    __slots__ = ("root", "feature_names", "cfg", "n", "fidelity", "cv_accuracy")

    def __init__(self, root, feature_names, cfg, n, fidelity, cv_accuracy):
        self.root = root
        self.feature_names = tuple(feature_names)
        self.cfg = cfg
        self.n = int(n)
        self.fidelity = float(fidelity)
        self.cv_accuracy = float(cv_accuracy)

    def predict(self, phi) -> np.ndarray:
        X = np.ascontiguousarray(phi, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise ValueError("phi width does not match the surrogate's features")
        out = np.empty(X.shape[0], dtype=np.int64)
        _predict_node(self.root, X, np.arange(X.shape[0]), out)
        return out

    def depth(self) -> int:
        def height(node):
            if node.is_leaf:
                return 0
            return 1 + max(height(node.left), height(node.right))

        return height(self.root)

    def n_leaves(self) -> int:
        def count(node):
            if node.is_leaf:
                return 1
            return count(node.left) + count(node.right)

        return count(self.root)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "max_depth": self.cfg.max_depth,
            "min_leaf": self.cfg.min_leaf,
            "fidelity": self.fidelity,
            "cv_accuracy": self.cv_accuracy,
            "features": list(self.feature_names),
            "root": self.root.to_dict(),
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text


def fit_shap_cart(sm: ShapMatrix, labels, cfg: CartConfig = CartConfig()) -> ExplanationTree:
    """Fit the surrogate on (attributions, true labels).

    Fidelity is the agreement rate between the surrogate and the underlying
    ensemble's own predicted classes (margin >= 0); CV accuracy is a
    stratified k-fold estimate against the true labels.
    """
    y = np.asarray(labels)
    if y.shape != (sm.n,):
        raise ValueError("labels length does not match attribution rows")
    y = y.astype(np.int64)
    if len(np.unique(y)) < 2:
        raise ValueError("surrogate fitting needs both classes present")

    root = _grow(sm.phi, y, np.arange(sm.n), 0, cfg)
    tree = ExplanationTree(root, sm.schema.names, cfg, sm.n, 0.0, 0.0)

    ens_class = (sm.margins >= 0.0).astype(np.int64)
    fidelity = float((tree.predict(sm.phi) == ens_class).mean())

    phi_schema = FeatureSchema(sm.schema.names, ("continuous",) * sm.schema.n_features)
    phi_ds = Dataset(phi_schema, sm.phi, y)
    plan = stratified_kfold(phi_ds, cfg.cv_folds, cfg.seed)
    accs = []
    for i in range(cfg.cv_folds):
        tr, te = plan.train_indices(i), plan.test_indices(i)
        fold_root = _grow(sm.phi, y, tr, 0, cfg)
        fold_tree = ExplanationTree(fold_root, sm.schema.names, cfg, tr.size, 0.0, 0.0)
        accs.append(float((fold_tree.predict(sm.phi[te]) == y[te]).mean()))
    cv_accuracy = float(np.mean(accs))

    return ExplanationTree(root, sm.schema.names, cfg, sm.n, fidelity, cv_accuracy)


# ---------------------------------------------------------------------------
# rule extraction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rule:
    """One root-to-leaf path: conditions over attribution values."""

    conditions: tuple  # of (feature_name, "<=" or ">", threshold)
    klass: int
    purity: float
    coverage: int

    def render(self) -> str:
        if self.conditions:
            body = " AND ".join(
                f"phi({name}) {op} {thr:.6g}" for name, op, thr in self.conditions
            )
        else:
            body = "TRUE"
        return (
            f"IF {body} THEN class={self.klass} "
            f"(purity {self.purity:.2f}, coverage {self.coverage})"
        )

    def to_dict(self) -> dict:
        return {
            "conditions": [
                {"feature": n, "op": op, "threshold": t} for n, op, t in self.conditions
            ],
            "class": self.klass,
            "purity": self.purity,
            "coverage": self.coverage,
        }


def extract_rules(tree: ExplanationTree) -> tuple:
    """One rule per leaf, in left-to-right order; coverages partition n."""
    rules = []

    def walk(node, conds):
        if node.is_leaf:
            rules.append(
                Rule(tuple(conds), node.klass, node.purity, node.n0 + node.n1)
            )
            return
        name = tree.feature_names[node.feature]
        walk(node.left, conds + [(name, "<=", node.threshold)])
        walk(node.right, conds + [(name, ">", node.threshold)])

    walk(tree.root, [])
    return tuple(rules)


def rules_report(rules) -> str:
    return "\n".join(r.render() for r in rules)


def rules_to_json(rules, path=None) -> str:
    text = json.dumps([r.to_dict() for r in rules], indent=2)
    if path is not None:
        Path(path).write_text(text + "\n", encoding="utf-8")
    return text
