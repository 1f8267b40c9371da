"""Steepest ascent on the power sphere ``{F : ||F||_F^2 = P}``."""
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_positive_real, check_precoder
from .gradient import objective_and_gradient
from .model import eigenbeam_precoder, random_precoder
from .rmt import smi_asymptotic, smi_upper_bound

SPHERE_RTOL = 1e-9

OBJECTIVES = ("asymptotic-smi", "upper-bound-smi")
INITS = ("eigenbeam", "scaled-random")

GRADIENT_TOLERANCE = "gradient-tolerance"
MAX_ITERS = "max-iters"
LINE_SEARCH_FAILURE = "line-search-failure"


class LineSearchFailure(RuntimeError):
    """No step satisfying the Armijo condition was found."""


@dataclass(frozen=True)
class ArmijoConfig:
    initial_step: float = 1.0
    contraction: float = 0.5
    sufficient_decrease: float = 1e-4
    max_backtracks: int = 40

    def __post_init__(self):
        check_positive_real(self.initial_step, "initial_step")
        if not 0 < self.contraction < 1:
            raise ValueError("contraction must lie in (0, 1)")
        if not 0 < self.sufficient_decrease < 1:
            raise ValueError("sufficient_decrease must lie in (0, 1)")
        if self.max_backtracks < 0:
            raise ValueError("max_backtracks must be >= 0")


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 50
    grad_norm_tol: float = 1e-5
    armijo: ArmijoConfig = field(default_factory=ArmijoConfig)
    objective: str = "asymptotic-smi"
    init: str = "eigenbeam"
    seed: int = 0

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    objective: float
    grad_norm: float
    step: float
    backtracks: int


@dataclass
class OptimizerTrace:
    records: list
    precoder: np.ndarray
    termination: str

    @property
    def objective(self):
        return self.records[-1].objective

    @property
    def n_iters(self):
        return len(self.records) - 1

    def objectives(self):
        return np.array([r.objective for r in self.records])


@dataclass(frozen=True)
class ArmijoResult:
    step: float
    precoder: np.ndarray
    evals: int
    value: float
    backtracks: int


def _inner(a, b):
    """Real inner product ``Re tr(a b^H)``."""
    return float(np.vdot(b, a).real)


def _check_on_sphere(f, power):
    norm2 = float(np.vdot(f, f).real)
    if abs(norm2 - power) > SPHERE_RTOL * power:
        raise ValueError(f"precoder is off the sphere: ||F||^2 = {norm2!r}, P = {power!r}")


def riemannian_gradient(precoder, eucl_grad, power):
    """Project a Euclidean gradient onto the tangent space of the sphere at F."""
    f = np.asarray(precoder, dtype=complex)
    g = np.asarray(eucl_grad, dtype=complex)
    _check_on_sphere(f, power)
    return g - (_inner(f, g) / power) * f


def retract(precoder, tangent, power):
    """``sqrt(P) (F + D) / ||F + D||``."""
    x = np.asarray(precoder, dtype=complex) + np.asarray(tangent, dtype=complex)
    norm = np.linalg.norm(x)
    if not norm > 0:
        raise ValueError("F + D vanishes; retraction undefined")
    return x * (np.sqrt(power) / norm)


def armijo_search(objective, precoder, direction, config, power, grad=None, value=None):
    """Backtracking line search along ``direction`` on the power sphere.

    Accepts the first ``beta = initial_step * contraction**t`` with
    ``L(R_F(beta d)) >= L(F) + sufficient_decrease * beta * Re tr(d grad^H)``.
    ``grad`` defaults to ``direction`` (steepest ascent).
    """
    armijo = getattr(config, "armijo", config)
    grad = direction if grad is None else grad
    f0 = np.asarray(precoder, dtype=complex)
    v0 = objective(f0) if value is None else value
    slope = _inner(direction, grad)
    if not slope > 0:
        raise LineSearchFailure("direction is not an ascent direction")
    evals = 0
    beta = armijo.initial_step
    for t in range(armijo.max_backtracks + 1):
        cand = retract(f0, beta * direction, power)
        v = objective(cand)
        evals += 1
        if not np.isfinite(v):
            raise FloatingPointError("objective evaluation returned a non-finite value")
        if v >= v0 + armijo.sufficient_decrease * beta * slope:
            return ArmijoResult(beta, cand, evals, float(v), t)
        beta *= armijo.contraction
    raise LineSearchFailure(
        f"no acceptable step after {armijo.max_backtracks} backtracks"
    )


def initial_precoder(corr, scenario, config):
    k, power = scenario.n_targets, scenario.power_budget
    if config.init == "eigenbeam":
        return eigenbeam_precoder(corr, k, power)
    return random_precoder(corr.n_tx, k, power, config.seed)


def optimize_precoder(corr, scenario, config=None, initial=None):
    """Riemannian steepest ascent of the configured objective.

    The inequality budget ``||F||^2 <= P`` is handled on its boundary sphere.
    Non-convergence is reported through ``OptimizerTrace.termination``.
    """
    config = OptimizerConfig() if config is None else config
    power = scenario.power_budget
    value_fn, grad_fn = objective_and_gradient(corr, scenario, config.objective)
    if initial is None:
        f = initial_precoder(corr, scenario, config)
    else:
        f = retract(check_precoder(initial, corr.n_tx, scenario.n_targets), 0.0, power)

    value = value_fn(f)
    rgrad = riemannian_gradient(f, grad_fn(f), power)
    gnorm = float(np.linalg.norm(rgrad))
    records = [IterationRecord(0, value, gnorm, 0.0, 0)]
    termination = MAX_ITERS
    for m in range(1, config.max_iters + 1):
        if gnorm <= config.grad_norm_tol:
            termination = GRADIENT_TOLERANCE
            break
        try:
            res = armijo_search(value_fn, f, rgrad, config, power, value=value)
        except LineSearchFailure:
            termination = LINE_SEARCH_FAILURE
            break
        f, value = res.precoder, res.value
        rgrad = riemannian_gradient(f, grad_fn(f), power)
        gnorm = float(np.linalg.norm(rgrad))
        records.append(IterationRecord(m, value, gnorm, res.step, res.backtracks))
    else:
        if gnorm <= config.grad_norm_tol:
            termination = GRADIENT_TOLERANCE
    return OptimizerTrace(records, f, termination)


def baseline_ub_precoder(corr, scenario, config=None, initial=None):
    """Same ascent machinery applied to the Jensen upper bound."""
    config = OptimizerConfig() if config is None else config
    config = OptimizerConfig(config.max_iters, config.grad_norm_tol, config.armijo,
                             "upper-bound-smi", config.init, config.seed)
    return optimize_precoder(corr, scenario, config, initial)


class SmiPrecoder(BaseEstimator):
    """Estimator-style wrapper around :func:`optimize_precoder`.

    ``fit(corr, scenario)`` runs the ascent and stores ``precoder_``,
    ``trace_`` and ``objective_``; ``score`` evaluates the asymptotic SMI of
    the fitted precoder under another (or the same) scenario.

    Examples
    --------
    >>> est = SmiPrecoder(max_iters=20).fit(corr, scenario)   # doctest: +SKIP
    >>> est.score(corr, scenario)                              # doctest: +SKIP
    """

    def __init__(self, objective="asymptotic-smi", init="eigenbeam", max_iters=50,
                 grad_norm_tol=1e-5, initial_step=1.0, contraction=0.5,
                 sufficient_decrease=1e-4, max_backtracks=40, seed=0):
        self.objective = objective
        self.init = init
        self.max_iters = max_iters
        self.grad_norm_tol = grad_norm_tol
        self.initial_step = initial_step
        self.contraction = contraction
        self.sufficient_decrease = sufficient_decrease
        self.max_backtracks = max_backtracks
        self.seed = seed

    def _config(self):
        return OptimizerConfig(
            max_iters=self.max_iters,
            grad_norm_tol=self.grad_norm_tol,
            armijo=ArmijoConfig(self.initial_step, self.contraction,
                                self.sufficient_decrease, self.max_backtracks),
            objective=self.objective,
            init=self.init,
            seed=self.seed,
        )

    def fit(self, corr, scenario):
        self.trace_ = optimize_precoder(corr, scenario, self._config())
        self.precoder_ = self.trace_.precoder
        self.objective_ = self.trace_.objective
        return self

    def score(self, corr, scenario):
        if not hasattr(self, "precoder_"):
            raise AttributeError("SmiPrecoder is not fitted yet; call fit first")
        if self.objective == "upper-bound-smi":
            return smi_upper_bound(corr, self.precoder_, scenario).nats
        return smi_asymptotic(corr, self.precoder_, scenario).nats
