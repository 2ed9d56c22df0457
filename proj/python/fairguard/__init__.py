"""Fair classification that stays fair when protected attributes are perturbed."""

import json as _json

from ._core import (
    compute_scaling_s,
    fit,
    generate_synthetic,
    group_performance,
    perturb_true_negatives,
    predict,
    robust_fairness_threshold,
)
from . import _core


def verify_theory(params=None):
    """Runs every exact theory check; `params` overrides the defaults."""
    return _json.loads(_core.verify_theory_json(_json.dumps(params) if params else ""))


def run_experiment(**kwargs):
    """Repeated split / perturb / fit / evaluate trials on synthetic data."""
    return _json.loads(_core.run_experiment_json(**kwargs))


__all__ = [
    "compute_scaling_s",
    "fit",
    "generate_synthetic",
    "group_performance",
    "perturb_true_negatives",
    "predict",
    "robust_fairness_threshold",
    "run_experiment",
    "verify_theory",
]
