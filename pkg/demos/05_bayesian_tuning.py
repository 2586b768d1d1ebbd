"""Tune the booster with a Gaussian-process surrogate and Expected Improvement.

Eight Latin-hypercube probes seed the surrogate, then each further trial
maximizes EI over a fresh Sobol candidate sweep. The objective is
cross-validated PR-AUC; fold rebalancing is shared across trials because it
does not depend on the candidate parameters. Identical seeds replay the
identical history.
"""

from propflow.dataset import GeneratorConfig, generate_synthetic
from propflow.hpo import SearchSpace, tune
from propflow.resample import AdasynConfig, HybridConfig, NearmissConfig

ds = generate_synthetic(GeneratorConfig(n=4000, prevalence=0.04, seed=1))
space = SearchSpace(
    n_trees=(20, 200),
    max_depth=(2, 5),
    learning_rate=(0.02, 0.3),
    min_split_gain=(0.0, 2.0),
)
resample = HybridConfig(AdasynConfig(beta=0.4), NearmissConfig(variant=1))

result = tune(ds, space=space, budget=16, cv=5, seed=1, resample=resample)

print("trial  phase      trees depth     lr   gamma   cv pr_auc")
for i, t in enumerate(result.history):
    phase = "design" if i < 8 else "surrogate"
    p = t.params
    obj = "failed" if t.status != "ok" else f"{t.objective:.4f}"
    star = " *" if t is result.best else ""
    print(f"{i:>5}  {phase:<9} {p.n_trees:>5} {p.max_depth:>5} {p.learning_rate:>6.3f} "
          f"{p.min_split_gain:>7.3f}   {obj}{star}")

print()
b = result.best.params
print(f"best: {b.n_trees} trees, depth {b.max_depth}, lr {b.learning_rate:.3f}, "
      f"gamma {b.min_split_gain:.3f} -> PR-AUC {result.best.objective:.4f} "
      f"(+- {result.best.objective_std:.4f} across folds)")

replay = tune(ds, space=space, budget=16, cv=5, seed=1, resample=resample)
print(f"same seed replays the same history: {replay.to_json() == result.to_json()}")
