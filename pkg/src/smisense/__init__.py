"""Sensing mutual information of MIMO radar with random probing signals.

Large-system approximations of the SMI, Jensen-type bounds, a Monte-Carlo
reference, analytic precoder gradients and Riemannian ascent on the power
sphere.
"""
from .gradient import euclidean_gradient, upper_bound_gradient
from .manifold import OptimizerConfig, SmiPrecoder, baseline_ub_precoder, optimize_precoder
from .model import (
    CorrelationPair,
    Scenario,
    TargetSet,
    build_correlations,
    eigenbeam_precoder,
    random_precoder,
)
from .montecarlo import smi_monte_carlo
from .rmt import (
    dof_bounds,
    dof_estimate,
    smi_asymptotic,
    smi_lower_bound,
    smi_upper_bound,
    solve_delta,
)

__version__ = "0.1.0"

__all__ = [
    "CorrelationPair",
    "OptimizerConfig",
    "Scenario",
    "SmiPrecoder",
    "TargetSet",
    "baseline_ub_precoder",
    "build_correlations",
    "dof_bounds",
    "dof_estimate",
    "eigenbeam_precoder",
    "euclidean_gradient",
    "optimize_precoder",
    "random_precoder",
    "smi_asymptotic",
    "smi_lower_bound",
    "smi_monte_carlo",
    "smi_upper_bound",
    "solve_delta",
    "upper_bound_gradient",
]
