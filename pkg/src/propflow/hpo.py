"""Bayesian tuning of boosting hyperparameters against cross-validated PR-AUC.

Surrogate: Gaussian process with a Matern-5/2 kernel on the normalized unit
cube (learning rate on log scale, integer axes relaxed then rounded),
observation noise 1e-6, kernel hyperparameters picked by log marginal
likelihood over a fixed 5x5 grid. Acquisition: Expected Improvement argmax
over a seeded quasi-random candidate set plus coordinate-perturbed neighbors
of the incumbent. Everything is deterministic given the master seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import solve_triangular
from scipy.spatial.distance import cdist
from scipy.special import ndtr
from scipy.stats import qmc

from .boosting import BoostParams
from .dataset import Dataset
from .metrics import prepare_cv_folds, score_prepared_folds
from .resample import HybridConfig
from .seeding import rng_stream

N_INIT = 8
GP_NOISE = 1e-6
N_CANDIDATES = 2048
NEIGHBOR_STEP = 0.05
_LENGTHSCALES = (0.1, 0.25, 0.5, 1.0, 2.0)
_SIGNAL_MULTS = (0.25, 0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class SearchSpace:
    """Axis bounds; integer axes are stored as inclusive integer ranges."""

    n_trees: tuple = (50, 500)
    max_depth: tuple = (2, 8)
    learning_rate: tuple = (0.01, 0.3)
    min_split_gain: tuple = (0.0, 5.0)

    def __post_init__(self):
        for name in ("n_trees", "max_depth", "learning_rate", "min_split_gain"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} bounds must satisfy lower < upper")
        if self.n_trees[0] < 1 or self.max_depth[0] < 1:
            raise ValueError("integer axes need positive lower bounds")
        if self.learning_rate[0] <= 0.0 or self.learning_rate[1] > 1.0:
            raise ValueError("learning_rate bounds must lie in (0,1]")
        if self.min_split_gain[0] < 0.0:
            raise ValueError("min_split_gain lower bound must be nonnegative")

    def from_unit(self, u) -> BoostParams:
        """Map a point of [0,1]^4 to parameters; integer axes round half up."""
        u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
        lo, hi = self.n_trees
        n_trees = int(math.floor(lo + u[0] * (hi - lo) + 0.5))
        lo, hi = self.max_depth
        depth = int(math.floor(lo + u[1] * (hi - lo) + 0.5))
        llo, lhi = math.log(self.learning_rate[0]), math.log(self.learning_rate[1])
        lr = float(min(max(math.exp(llo + u[2] * (lhi - llo)), self.learning_rate[0]),
                       self.learning_rate[1]))
        lo, hi = self.min_split_gain
        gamma = float(lo + u[3] * (hi - lo))
        return BoostParams(
            n_trees=n_trees, max_depth=depth, learning_rate=lr, min_split_gain=gamma
        )

    def to_unit(self, params: BoostParams) -> np.ndarray:
        llo, lhi = math.log(self.learning_rate[0]), math.log(self.learning_rate[1])
        return np.array([
            (params.n_trees - self.n_trees[0])
            / (self.n_trees[1] - self.n_trees[0]),
            (params.max_depth - self.max_depth[0])
            / (self.max_depth[1] - self.max_depth[0]),
            (math.log(params.learning_rate) - llo) / (lhi - llo),
            (params.min_split_gain - self.min_split_gain[0])
            / (self.min_split_gain[1] - self.min_split_gain[0]),
        ])

    def contains(self, params: BoostParams) -> bool:
        return (
            self.n_trees[0] <= params.n_trees <= self.n_trees[1]
            and self.max_depth[0] <= params.max_depth <= self.max_depth[1]
            and self.learning_rate[0] <= params.learning_rate <= self.learning_rate[1]
            and self.min_split_gain[0] <= params.min_split_gain <= self.min_split_gain[1]
        )


@dataclass(frozen=True)
class TrialRecord:
    params: BoostParams
    objective: float | None
    objective_std: float | None
    status: str  # "ok" or "failed"

    def __post_init__(self):
        if self.status not in ("ok", "failed"):
            raise ValueError("status must be 'ok' or 'failed'")
        if self.status == "ok":
            if self.objective is None or not (0.0 <= self.objective <= 1.0):
                raise ValueError("ok trials need an objective in [0,1]")

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "objective": self.objective,
            "objective_std": self.objective_std,
            "status": self.status,
        }


@dataclass(frozen=True)
class TuneResult:
    best: TrialRecord
    history: tuple
    seed: int

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "best": self.best.to_dict(),
            "history": [t.to_dict() for t in self.history],
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text


# ---------------------------------------------------------------------------
# Gaussian-process surrogate
# ---------------------------------------------------------------------------


def _matern52(a: np.ndarray, b: np.ndarray, ell: float, sig2: float) -> np.ndarray:
    s = math.sqrt(5.0) / ell * cdist(a, b)
    return sig2 * (1.0 + s + s * s / 3.0) * np.exp(-s)


@dataclass(frozen=True)
class GpSurrogate:
    X: np.ndarray
    y_mean: float
    ell: float
    sig2: float
    chol: np.ndarray
    alpha: np.ndarray


def fit_gp(X, y, noise: float = GP_NOISE) -> GpSurrogate:
    """Grid-fit (lengthscale, signal variance) by log marginal likelihood."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    y_mean = float(y.mean())
    yc = y - y_mean
    scale = max(float(yc.var()), 1e-8)
    best = None
    for ell in _LENGTHSCALES:
        K = _matern52(X, X, ell, 1.0)
        for mult in _SIGNAL_MULTS:
            sig2 = scale * mult
            Kn = sig2 * K + noise * np.eye(n)
            try:
                L = np.linalg.cholesky(Kn)
            except np.linalg.LinAlgError:
                continue
            z = solve_triangular(L, yc, lower=True)
            lml = (
                -0.5 * float(z @ z)
                - float(np.log(np.diag(L)).sum())
                - 0.5 * n * math.log(2.0 * math.pi)
            )
            if best is None or lml > best[0]:
                alpha = solve_triangular(L.T, z, lower=False)
                best = (lml, ell, sig2, L, alpha)
    if best is None:
        raise np.linalg.LinAlgError("no kernel configuration factorized")
    _, ell, sig2, L, alpha = best
    return GpSurrogate(X=X, y_mean=y_mean, ell=ell, sig2=sig2, chol=L, alpha=alpha)


def gp_posterior(gp: GpSurrogate, points) -> tuple:
    """Posterior mean and variance at the query points."""
    C = np.asarray(points, dtype=np.float64)
    ks = _matern52(C, gp.X, gp.ell, gp.sig2)
    mu = ks @ gp.alpha + gp.y_mean
    v = solve_triangular(gp.chol, ks.T, lower=True)
    var = np.maximum(gp.sig2 - np.einsum("ij,ij->j", v, v), 0.0)
    return mu, var


def expected_improvement(mu, var, f_best: float) -> np.ndarray:
    """EI for maximization; zero wherever the posterior is deterministic."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.sqrt(np.asarray(var, dtype=np.float64))
    improve = mu - f_best
    ei = np.where(sigma > 0.0, 0.0, np.maximum(improve, 0.0))
    live = sigma > 0.0
    if live.any():
        z = improve[live] / sigma[live]
        pdf = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        ei[live] = improve[live] * ndtr(z) + sigma[live] * pdf
    return np.maximum(ei, 0.0)


# ---------------------------------------------------------------------------
# suggestion and tuning loop
# ---------------------------------------------------------------------------


def random_params(space: SearchSpace, rng: np.random.Generator) -> BoostParams:
    return space.from_unit(rng.random(4))


def suggest(history, space: SearchSpace, rng: np.random.Generator,
            n_init: int = N_INIT) -> BoostParams:
    """Next point to evaluate.

    The caller must pass an identically seeded generator on every call of one
    tuning run: the initial design is regenerated from it verbatim, and the
    candidate stream is fast-forwarded by the history length, so suggestions
    depend only on (history, space, seed).
    """
    lhs_rng, cand_rng = rng.spawn(2)
    design = qmc.LatinHypercube(d=4, seed=lhs_rng).random(n_init)
    if len(history) < n_init:
        return space.from_unit(design[len(history)])

    sobol = qmc.Sobol(d=4, scramble=True, seed=cand_rng)
    sobol.fast_forward(N_CANDIDATES * len(history))
    candidates = sobol.random(N_CANDIDATES)

    ok = [t for t in history if t.status == "ok"]
    if not ok:
        return space.from_unit(candidates[0])  # nothing to model: explore

    X = np.stack([space.to_unit(t.params) for t in ok])
    y = np.array([t.objective for t in ok])
    incumbent = X[int(np.argmax(y))]
    neighbors = np.repeat(incumbent[None, :], 8, axis=0)
    for axis in range(4):
        neighbors[2 * axis, axis] += NEIGHBOR_STEP
        neighbors[2 * axis + 1, axis] -= NEIGHBOR_STEP
    points = np.clip(np.vstack([candidates, neighbors]), 0.0, 1.0)

    gp = fit_gp(X, y)
    mu, var = gp_posterior(gp, points)
    ei = expected_improvement(mu, var, float(y.max()))
    return space.from_unit(points[int(np.argmax(ei))])


def tune(
    ds: Dataset,
    space: SearchSpace = SearchSpace(),
    budget: int = 32,
    cv: int = 10,
    seed: int = 0,
    resample: HybridConfig = None,
    threshold: float = 0.5,
    n_init: int = N_INIT,
) -> TuneResult:
    """Run `budget` trials of GP-EI tuning scored by cross-validated PR-AUC.

    Fold rebalancing does not depend on the candidate parameters, so the
    rebalanced folds are prepared once and shared by every trial. Trials
    whose scoring degenerates (single-class training portion, no fold with a
    defined PR-AUC) are recorded as failed and excluded from the surrogate.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    prepared = prepare_cv_folds(ds, cv, seed, resample)
    history = []
    for _ in range(budget):
        params = suggest(history, space, rng_stream(seed, "tune"), n_init)
        try:
            summary = score_prepared_folds(prepared, params, cv, seed, threshold)
            objective = summary.means["pr_auc"]
        except ValueError:
            objective = None
            summary = None
        if objective is None:
            history.append(TrialRecord(params, None, None, "failed"))
        else:
            history.append(
                TrialRecord(params, float(objective), summary.stds["pr_auc"], "ok")
            )
    ok = [t for t in history if t.status == "ok"]
    if not ok:
        raise ValueError("every tuning trial failed; nothing to select")
    best = max(ok, key=lambda t: t.objective)
    return TuneResult(best=best, history=tuple(history), seed=seed)
