"""Attribution exactness vs brute-force Shapley, ranking, CART surrogate."""

import json
import math
import re

import numpy as np
import pytest

from propflow.boosting import (
    BoostParams,
    GradientBoostedEnsemble,
    Tree,
    predict_proba,
    sigmoid,
    train,
)
from propflow.dataset import Dataset, FeatureSchema, GeneratorConfig, generate_synthetic
from propflow.explain import (
    CartConfig,
    ShapMatrix,
    exact_shapley_oracle,
    extract_rules,
    fit_shap_cart,
    importance_ranking,
    rules_report,
    rules_to_json,
    shap_matrix,
    shap_matrix_rows,
    tree_shap,
)


def make_ds(X, y):
    X = np.asarray(X, dtype=np.float64)
    schema = FeatureSchema(
        names=tuple(f"x{j+1}" for j in range(X.shape[1])),
        kinds=("continuous",) * X.shape[1],
    )
    return Dataset(schema, X, np.asarray(y))


def schema_of(d):
    return FeatureSchema(tuple(f"x{j+1}" for j in range(d)), ("continuous",) * d)


def leaf_tree(weight, cover=10.0):
    return Tree(
        feature=[-1], threshold=[0.0], left=[-1], right=[-1],
        value=[weight], cover=[cover],
    )


def stump(feature, threshold, a, b, n_left, n_right):
    return Tree(
        feature=[feature, -1, -1],
        threshold=[threshold, 0.0, 0.0],
        left=[1, -1, -1],
        right=[2, -1, -1],
        value=[0.0, a, b],
        cover=[n_left + n_right, n_left, n_right],
    )


def random_model(seed, d, n_trees, depth, n=200):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    w = rng.standard_normal(d)
    y = (X @ w + 0.5 * rng.standard_normal(n) > 0).astype(np.int64)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    ds = make_ds(X, y)
    params = BoostParams(n_trees=n_trees, max_depth=depth, min_child_hessian=0.1)
    return train(ds, params), X


# ---------------------------------------------------------------------------
# tree_shap exactness
# ---------------------------------------------------------------------------


def test_single_leaf_tree_no_attribution():
    model = GradientBoostedEnsemble(
        [leaf_tree(0.7)], 0.3, BoostParams(n_trees=1), schema_of(2)
    )
    row = tree_shap(model, [5.0, -2.0])
    assert np.all(row.phi == 0.0)
    assert row.base_value == 1.0
    assert row.margin == row.base_value


def test_stump_attribution_closed_form():
    # instance routed right: phi = b - (nL*a + nR*b)/(nL+nR) on the split
    # feature, zero elsewhere
    a, b, n_left, n_right = -0.4, 0.8, 30.0, 10.0
    model = GradientBoostedEnsemble(
        [stump(1, 0.5, a, b, n_left, n_right)], 0.3, BoostParams(n_trees=1),
        schema_of(3),
    )
    row = tree_shap(model, [9.9, 1.0, -3.0])
    expected = b - (n_left * a + n_right * b) / (n_left + n_right)
    assert row.phi[1] == pytest.approx(expected, abs=1e-12)
    assert row.phi[0] == 0.0 and row.phi[2] == 0.0
    assert row.base_value == pytest.approx(
        0.3 + (n_left * a + n_right * b) / (n_left + n_right), abs=1e-12
    )
    assert row.additivity_residual() <= 1e-12


def test_additivity_on_trained_ensemble():
    ds = generate_synthetic(GeneratorConfig(n=2000, prevalence=0.1, seed=0))
    model = train(ds, BoostParams(n_trees=60, max_depth=4))
    sm = shap_matrix(model, ds)
    resid = np.abs(sm.base_value + sm.phi.sum(axis=1) - sm.margins)
    assert resid.max() <= 1e-6


def test_zero_cover_node_rejected():
    bad = leaf_tree(0.5, cover=0.0)
    model = GradientBoostedEnsemble([bad], 0.0, BoostParams(n_trees=1), schema_of(1))
    with pytest.raises(ValueError):
        tree_shap(model, [1.0])
    with pytest.raises(ValueError):
        exact_shapley_oracle(model, [1.0])


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------


def test_oracle_single_leaf_zero_phi():
    model = GradientBoostedEnsemble(
        [leaf_tree(1.1)], -0.2, BoostParams(n_trees=1), schema_of(4)
    )
    row = exact_shapley_oracle(model, [0.0, 1.0, 2.0, 3.0])
    assert np.all(row.phi == 0.0)
    assert row.base_value == pytest.approx(0.9, abs=1e-15)


def test_oracle_rejects_wide_models():
    model, X = random_model(0, d=13, n_trees=2, depth=2)
    with pytest.raises(ValueError):
        exact_shapley_oracle(model, X[0])


@pytest.mark.parametrize("seed,d,n_trees,depth", [
    (1, 3, 5, 2), (2, 5, 10, 3), (3, 7, 20, 3), (4, 10, 8, 3),
])
def test_tree_shap_matches_exact_shapley(seed, d, n_trees, depth):
    model, X = random_model(seed, d, n_trees, depth)
    for i in range(4):
        fast = tree_shap(model, X[i])
        slow = exact_shapley_oracle(model, X[i])
        assert np.max(np.abs(fast.phi - slow.phi)) <= 1e-9
        assert abs(fast.base_value - slow.base_value) <= 1e-9
        assert abs(fast.margin - slow.margin) <= 1e-9


def permuted_model(model, perm):
    """Reorder feature columns of a serialized model consistently."""
    blob = json.loads(model.to_json())
    inv = {old: new for new, old in enumerate(perm)}

    def remap(node):
        if "leaf" not in node:
            node["feature"] = inv[node["feature"]]
            remap(node["left"])
            remap(node["right"])

    for t in blob["trees"]:
        remap(t)
    blob["schema"]["names"] = [model.schema.names[j] for j in perm]
    blob["schema"]["kinds"] = [model.schema.kinds[j] for j in perm]
    return GradientBoostedEnsemble.from_dict(blob)


def test_phi_permutation_equivariance():
    model, X = random_model(5, d=5, n_trees=8, depth=3)
    perm = [3, 0, 4, 1, 2]
    model_p = permuted_model(model, perm)
    x = X[7]
    phi = tree_shap(model, x).phi
    phi_p = tree_shap(model_p, x[perm]).phi
    np.testing.assert_allclose(phi_p, phi[perm], atol=1e-12)
    slow_p = exact_shapley_oracle(model_p, x[perm]).phi
    np.testing.assert_allclose(slow_p, phi[perm], atol=1e-9)


def test_dummy_feature_gets_zero_phi():
    # both trees split only feature 0; features 1 and 2 are dummies
    trees = [stump(0, 0.0, -0.3, 0.5, 12.0, 8.0), stump(0, 1.0, 0.2, -0.1, 15.0, 5.0)]
    model = GradientBoostedEnsemble(trees, 0.1, BoostParams(n_trees=2), schema_of(3))
    rng = np.random.default_rng(0)
    for x in rng.standard_normal((10, 3)):
        row = tree_shap(model, x)
        assert row.phi[1] == 0.0 and row.phi[2] == 0.0


def test_linearity_across_trees():
    t1 = stump(0, 0.0, -0.3, 0.5, 12.0, 8.0)
    t2 = stump(1, 0.5, 0.4, -0.2, 6.0, 14.0)
    base = 0.25
    params = BoostParams(n_trees=2)
    both = GradientBoostedEnsemble([t1, t2], base, params, schema_of(2))
    only1 = GradientBoostedEnsemble([t1], base, params, schema_of(2))
    only2 = GradientBoostedEnsemble([t2], base, params, schema_of(2))
    x = [0.7, 0.1]
    r, r1, r2 = tree_shap(both, x), tree_shap(only1, x), tree_shap(only2, x)
    np.testing.assert_allclose(r.phi, r1.phi + r2.phi, atol=1e-12)
    assert r.base_value == pytest.approx(r1.base_value + r2.base_value - base, abs=1e-12)


# ---------------------------------------------------------------------------
# shap_matrix
# ---------------------------------------------------------------------------


def test_shap_matrix_shape_and_consistency():
    ds = generate_synthetic(GeneratorConfig(n=500, prevalence=0.1, seed=1))
    model = train(ds, BoostParams(n_trees=25, max_depth=3))
    sm = shap_matrix(model, ds)
    assert sm.n == ds.n
    assert sm.phi.shape == (ds.n, ds.schema.n_features)
    # mean margin decomposes through the shared base value
    assert np.mean(sm.margins) == pytest.approx(
        sm.base_value + np.mean(sm.phi.sum(axis=1)), abs=1e-9
    )
    # sigmoid of the reconstructed total matches predict_proba
    proba = predict_proba(model, ds.rows)
    np.testing.assert_allclose(
        sigmoid(sm.base_value + sm.phi.sum(axis=1)), proba, atol=1e-9
    )
    np.testing.assert_array_equal(sigmoid(sm.margins), proba)


def test_shap_matrix_rejects_schema_mismatch():
    ds = generate_synthetic(GeneratorConfig(n=200, prevalence=0.1, seed=2))
    model = train(ds, BoostParams(n_trees=3))
    other = make_ds(np.zeros((4, 7)), [0, 1, 0, 1])
    with pytest.raises(ValueError):
        shap_matrix(model, other)


def test_shap_matrix_csv_round_trip(tmp_path):
    ds = generate_synthetic(GeneratorConfig(n=50, prevalence=0.2, seed=3))
    model = train(ds, BoostParams(n_trees=5, max_depth=3))
    sm = shap_matrix(model, ds)
    path = tmp_path / "shap.csv"
    sm.to_csv(path)
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    assert header == list(ds.schema.names) + ["base_value", "margin"]
    assert len(lines) == sm.n + 1
    cells = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])
    np.testing.assert_array_equal(cells[:, :7], sm.phi)
    np.testing.assert_array_equal(cells[:, 8], sm.margins)


# ---------------------------------------------------------------------------
# importance ranking
# ---------------------------------------------------------------------------


def test_importance_single_feature_mass():
    phi = np.zeros((10, 3))
    phi[:, 1] = 0.5
    sm = ShapMatrix(schema_of(3), phi, 0.0, phi.sum(axis=1))
    rank = importance_ranking(sm)
    assert rank.entries[0].feature == "x2"
    assert rank.entries[0].share_pct == 100.0
    assert rank.entries[1].share_pct == 0.0


def test_importance_shares_sum_and_order():
    ds = generate_synthetic(GeneratorConfig(n=800, prevalence=0.1, seed=4))
    model = train(ds, BoostParams(n_trees=30, max_depth=4))
    rank = importance_ranking(shap_matrix(model, ds))
    shares = [e.share_pct for e in rank.entries]
    masses = [e.mean_abs_shap for e in rank.entries]
    assert abs(sum(shares) - 100.0) <= 1e-9
    assert all(s >= 0 for s in shares)
    assert masses == sorted(masses, reverse=True)


def test_importance_tie_breaks_by_feature_index():
    phi = np.full((4, 3), 0.25)
    sm = ShapMatrix(schema_of(3), phi, 0.0, phi.sum(axis=1))
    rank = importance_ranking(sm)
    assert [e.feature for e in rank.entries] == ["x1", "x2", "x3"]


def test_importance_report_format():
    phi = np.abs(np.random.default_rng(0).standard_normal((20, 3)))
    sm = ShapMatrix(schema_of(3), phi, 0.0, phi.sum(axis=1))
    report = importance_ranking(sm).report()
    for line in report.splitlines():
        assert re.fullmatch(r"x\d\s+\d+\.\d{2}%", line)


# ---------------------------------------------------------------------------
# CART surrogate
# ---------------------------------------------------------------------------


def separable_shap(n=200, d=3, gap_col=1, seed=0):
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], n // 2)
    phi = 0.1 * rng.standard_normal((n, d))
    phi[:, gap_col] = np.where(y == 1, 1.0, -1.0) + 0.1 * rng.random(n)
    margins = np.where(y == 1, 2.0, -2.0).astype(np.float64)
    return ShapMatrix(schema_of(d), phi, 0.0, margins), y


def test_cart_depth_zero_majority_leaf():
    sm, y = separable_shap()
    y2 = y.copy()
    y2[:150] = 0  # 150 zeros vs 50 ones
    tree = fit_shap_cart(sm, y2, CartConfig(max_depth=0, cv_folds=2))
    assert tree.root.is_leaf
    assert tree.root.klass == 0
    assert np.all(tree.predict(sm.phi) == 0)


def test_cart_perfect_single_column_split():
    sm, y = separable_shap()
    tree = fit_shap_cart(sm, y, CartConfig(max_depth=4, min_leaf=20))
    assert tree.depth() == 1
    assert tree.root.feature == 1
    lo = sm.phi[y == 0, 1].max()
    hi = sm.phi[y == 1, 1].min()
    assert lo < tree.root.threshold < hi
    assert np.all(tree.predict(sm.phi) == y)
    assert tree.cv_accuracy == 1.0


def test_cart_fidelity_against_ensemble_classes():
    sm, y = separable_shap()
    tree = fit_shap_cart(sm, y, CartConfig())
    assert tree.fidelity == 1.0  # margins agree with labels by construction


def test_cart_rejects_single_class_and_mismatch():
    sm, y = separable_shap()
    with pytest.raises(ValueError):
        fit_shap_cart(sm, np.zeros(sm.n, dtype=np.int64), CartConfig())
    with pytest.raises(ValueError):
        fit_shap_cart(sm, y[:-1], CartConfig())


def test_cart_min_leaf_respected():
    ds = generate_synthetic(GeneratorConfig(n=1000, prevalence=0.2, seed=5))
    model = train(ds, BoostParams(n_trees=20, max_depth=3))
    sm = shap_matrix(model, ds)
    tree = fit_shap_cart(sm, ds.labels, CartConfig(max_depth=4, min_leaf=30))
    for rule in extract_rules(tree):
        assert rule.coverage >= 30


def test_cart_json_fields():
    sm, y = separable_shap()
    tree = fit_shap_cart(sm, y, CartConfig())
    blob = json.loads(tree.to_json())
    assert blob["n"] == sm.n
    assert 0.0 <= blob["fidelity"] <= 1.0
    assert 0.0 <= blob["cv_accuracy"] <= 1.0
    assert blob["root"]["feature"] == 1


# ---------------------------------------------------------------------------
# rules
# ---------------------------------------------------------------------------


def test_rules_single_leaf_unconditional():
    sm, y = separable_shap()
    tree = fit_shap_cart(sm, y, CartConfig(max_depth=0, cv_folds=2))
    rules = extract_rules(tree)
    assert len(rules) == 1
    assert rules[0].conditions == ()
    assert rules[0].coverage == sm.n
    assert rules[0].render().startswith("IF TRUE THEN class=")


def test_rules_depth_one_partition():
    sm, y = separable_shap()
    tree = fit_shap_cart(sm, y, CartConfig(max_depth=1, min_leaf=20))
    rules = extract_rules(tree)
    assert len(rules) == 2
    assert sum(r.coverage for r in rules) == sm.n


def test_rules_partition_and_text_shape():
    ds = generate_synthetic(GeneratorConfig(n=1500, prevalence=0.15, seed=6))
    model = train(ds, BoostParams(n_trees=25, max_depth=4))
    sm = shap_matrix(model, ds)
    tree = fit_shap_cart(sm, ds.labels, CartConfig())
    rules = extract_rules(tree)
    assert sum(r.coverage for r in rules) == ds.n
    pat = re.compile(
        r"^IF (TRUE|phi\(\w+\) (<=|>) -?\d(\.\d+)?([eE]-?\d+)?"
        r"( AND phi\(\w+\) (<=|>) -?\d(\.\d+)?([eE]-?\d+)?)*) "
        r"THEN class=[01] \(purity \d\.\d{2}, coverage \d+\)$"
    )
    for rule in rules:
        assert pat.match(rule.render()), rule.render()
    # a pure-negative leaf reads as the non-event pattern
    pure_neg = [r for r in rules if r.klass == 0 and r.purity >= 0.97]
    assert pure_neg


def test_rules_json_round_trip(tmp_path):
    sm, y = separable_shap()
    tree = fit_shap_cart(sm, y, CartConfig(max_depth=1, min_leaf=20))
    rules = extract_rules(tree)
    path = tmp_path / "rules.json"
    rules_to_json(rules, path)
    blob = json.loads(path.read_text())
    assert len(blob) == 2
    assert blob[0]["conditions"][0]["op"] == "<="
    assert rules_report(rules).count("\n") == 1
