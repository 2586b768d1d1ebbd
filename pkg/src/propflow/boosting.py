"""Phase-2 core: CART regression trees boosted under second-order logistic loss.

Leaf weights are eta-scaled Newton steps and are stored post-shrinkage, so
prediction and SHAP consume identical trees. Training is deterministic in
(data, params); the seed is recorded for provenance only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .dataset import Dataset, FeatureSchema


@dataclass(frozen=True)
class BoostParams:
    n_trees: int = 200
    max_depth: int = 4
    learning_rate: float = 0.1
    min_split_gain: float = 0.0
    l2_reg: float = 1.0
    min_child_hessian: float = 1.0

    def __post_init__(self):
        if self.n_trees < 0:
            raise ValueError("n_trees must be nonnegative")
        if self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if not (0.0 < self.learning_rate <= 1.0):
            raise ValueError("learning_rate must lie in (0,1]")
        if self.min_split_gain < 0:
            raise ValueError("min_split_gain must be nonnegative")
        if self.l2_reg < 0:
            raise ValueError("l2_reg must be nonnegative")
        if self.min_child_hessian < 0:
            raise ValueError("min_child_hessian must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "learning_rate": self.learning_rate,
            "min_split_gain": self.min_split_gain,
            "l2_reg": self.l2_reg,
            "min_child_hessian": self.min_child_hessian,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoostParams":
        return cls(**d)


class Tree:
    """One regression tree as flat parallel arrays; feature < 0 marks a leaf."""

    __slots__ = ("feature", "threshold", "left", "right", "value", "cover")

    def __init__(self, feature, threshold, left, right, value, cover):
        self.feature = np.ascontiguousarray(feature, dtype=np.int32)
        self.threshold = np.ascontiguousarray(threshold, dtype=np.float64)
        self.left = np.ascontiguousarray(left, dtype=np.int32)
        self.right = np.ascontiguousarray(right, dtype=np.int32)
        self.value = np.ascontiguousarray(value, dtype=np.float64)
        self.cover = np.ascontiguousarray(cover, dtype=np.float64)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        best = 0
        for nd in range(self.n_nodes):
            if self.feature[nd] >= 0:
                depths[self.left[nd]] = depths[nd] + 1
                depths[self.right[nd]] = depths[nd] + 1
            else:
                best = max(best, int(depths[nd]))
        return best

    def leaf_values(self, X: np.ndarray) -> np.ndarray:
        return _kernels.tree_leaf_values(
            self.feature, self.threshold, self.left, self.right, self.value,
            np.ascontiguousarray(X, dtype=np.float64),
        )

    def to_node_dict(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {"leaf": float(self.value[node]), "cover": float(self.cover[node])}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "cover": float(self.cover[node]),
            "left": self.to_node_dict(int(self.left[node])),
            "right": self.to_node_dict(int(self.right[node])),
        }

    @classmethod
    def from_node_dict(cls, d: dict) -> "Tree":
        feature, threshold, left, right, value, cover = [], [], [], [], [], []

        def walk(nd: dict) -> int:
            idx = len(feature)
            if "leaf" in nd:
                feature.append(-1)
                threshold.append(0.0)
                left.append(-1)
                right.append(-1)
                value.append(float(nd["leaf"]))
                cover.append(float(nd["cover"]))
                return idx
            feature.append(int(nd["feature"]))
            threshold.append(float(nd["threshold"]))
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            cover.append(float(nd["cover"]))
            left[idx] = walk(nd["left"])
            right[idx] = walk(nd["right"])
            return idx

        walk(d)
        return cls(feature, threshold, left, right, value, cover)


def sigmoid(m: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    m = np.asarray(m, dtype=np.float64)
    out = np.empty_like(m)
    pos = m >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    em = np.exp(m[~pos])
    out[~pos] = em / (1.0 + em)
    return out


def grad_hess_logistic(labels, margins):
    """First/second derivatives of the logistic loss -[y ln p + (1-y) ln(1-p)]
    with respect to the margin: grad = p - y, hess = p (1 - p)."""
    y = np.asarray(labels, dtype=np.float64)
    m = np.asarray(margins, dtype=np.float64)
    if y.shape != m.shape:
        raise ValueError("labels and margins must have the same length")
    p = sigmoid(m)
    return p - y, p * (1.0 - p)


def logistic_loss(labels, margins) -> float:
    """Mean logistic loss, computed via the stable log1p(exp(-|m|)) form."""
    y = np.asarray(labels, dtype=np.float64)
    m = np.asarray(margins, dtype=np.float64)
    # -[y ln p + (1-y) ln (1-p)] = ln(1+e^-m) + (1-y) m  rearranged stably
    loss = np.log1p(np.exp(-np.abs(m))) + np.maximum(m, 0.0) - y * m
    return float(loss.mean())


def _presort(X: np.ndarray):
    n, d = X.shape
    rows_sorted = np.empty((d, n), dtype=np.int64)
    vals_sorted = np.empty((d, n), dtype=np.float64)
    for j in range(d):
        order = np.argsort(X[:, j], kind="stable")
        rows_sorted[j] = order
        vals_sorted[j] = X[order, j]
    return vals_sorted, rows_sorted


def fit_tree(X, gradients, hessians, params: BoostParams, _presorted=None) -> Tree:
    """Fit one tree by exact greedy search over midpoint candidates."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    g = np.ascontiguousarray(gradients, dtype=np.float64)
    h = np.ascontiguousarray(hessians, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("feature matrix must be nonempty")
    if g.shape != (X.shape[0],) or h.shape != (X.shape[0],):
        raise ValueError("gradients/hessians must align with feature rows")
    vals_sorted, rows_sorted = _presorted if _presorted is not None else _presort(X)
    out = _kernels.build_tree(
        vals_sorted, rows_sorted, X, g, h,
        params.max_depth, params.l2_reg, params.min_split_gain,
        params.min_child_hessian, params.learning_rate,
    )
    return Tree(*out)


class GradientBoostedEnsemble:
    def __init__(self, trees, base_margin: float, params: BoostParams,
                 schema: FeatureSchema, seed: int = 0):
        self.trees = list(trees)
        self.base_margin = float(base_margin)
        self.params = params
        self.schema = schema
        self.seed = int(seed)
        self._packed = None

    def _pack(self):
        if self._packed is None:
            if self.trees:
                offsets = np.zeros(len(self.trees) + 1, dtype=np.int64)
                for t, tree in enumerate(self.trees):
                    offsets[t + 1] = offsets[t] + tree.n_nodes
                self._packed = (
                    np.concatenate([t.feature for t in self.trees]),
                    np.concatenate([t.threshold for t in self.trees]),
                    np.concatenate([t.left for t in self.trees]),
                    np.concatenate([t.right for t in self.trees]),
                    np.concatenate([t.value for t in self.trees]),
                    np.concatenate([t.cover for t in self.trees]),
                    offsets,
                )
            else:
                self._packed = (
                    np.empty(0, np.int32), np.empty(0), np.empty(0, np.int32),
                    np.empty(0, np.int32), np.empty(0), np.empty(0),
                    np.zeros(1, dtype=np.int64),
                )
        return self._packed

    def _check_width(self, X: np.ndarray):
        if X.ndim != 2 or X.shape[1] != self.schema.n_features:
            raise ValueError(
                f"row width {X.shape[1] if X.ndim == 2 else '?'} does not match "
                f"the model schema ({self.schema.n_features} features)"
            )

    def to_dict(self) -> dict:
        return {
            "base_margin": self.base_margin,
            "params": self.params.to_dict(),
            "schema": self.schema.to_dict(),
            "seed": self.seed,
            "trees": [t.to_node_dict() for t in self.trees],
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "GradientBoostedEnsemble":
        return cls(
            trees=[Tree.from_node_dict(t) for t in d["trees"]],
            base_margin=d["base_margin"],
            params=BoostParams.from_dict(d["params"]),
            schema=FeatureSchema.from_dict(d["schema"]),
            seed=d.get("seed", 0),
        )

    @classmethod
    def from_json(cls, text_or_path) -> "GradientBoostedEnsemble":
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            text = Path(text_or_path).read_text(encoding="utf-8")
        return cls.from_dict(json.loads(text))


def train(ds: Dataset, params: BoostParams, seed: int = 0) -> GradientBoostedEnsemble:
    """Boost n_trees rounds from the prevalence log-odds base margin."""
    n_pos = ds.n_positive
    if n_pos == 0 or n_pos == ds.n:
        raise ValueError("training requires both classes")
    p_hat = n_pos / ds.n
    base_margin = math.log(p_hat / (1.0 - p_hat))
    X = ds.rows
    y = ds.labels.astype(np.float64)
    presorted = _presort(X)
    margins = np.full(ds.n, base_margin)
    trees = []
    for _ in range(params.n_trees):
        g, h = grad_hess_logistic(y, margins)
        tree = fit_tree(X, g, h, params, _presorted=presorted)
        trees.append(tree)
        margins = margins + tree.leaf_values(X)
    return GradientBoostedEnsemble(trees, base_margin, params, ds.schema, seed=seed)


def predict_margin(model: GradientBoostedEnsemble, rows) -> np.ndarray:
    X = np.ascontiguousarray(rows, dtype=np.float64)
    model._check_width(X)
    tf, tt, tl, tr, tv, tc, offsets = model._pack()
    return _kernels.forest_margins(X, model.base_margin, tf, tt, tl, tr, tv, offsets)


def predict_proba(model: GradientBoostedEnsemble, rows) -> np.ndarray:
    return sigmoid(predict_margin(model, rows))
