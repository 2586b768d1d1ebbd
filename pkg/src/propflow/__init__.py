"""Rare-event data-sharing propensity pipeline.

Three phases: hybrid ADASYN/NEARMISS rebalancing with KS audits, boosted
CART trees tuned by Gaussian-process Bayesian optimization and scored by
cross-validated PR-AUC/recall/specificity/accuracy, and exact TreeSHAP
explanations distilled into a CART surrogate over SHAP values.
"""

__version__ = "0.1.0"
