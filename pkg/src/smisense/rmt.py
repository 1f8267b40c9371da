"""Deterministic-equivalent sensing MI, its bounds, and the sensing DoF.

Everything here depends on the precoder only through the eigenvalues of
``T(F) = R_T^{1/2} F F^H R_T^{1/2}`` and on the receive side only through the
eigenvalues ``lambda_j`` of ``R_R / sigma_N^2``, so each per-target term is a
scalar function of those spectra.
"""
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._validation import PSD_RTOL, check_hermitian_psd, matrix_rank_gram, numerical_rank
from .model import effective_gram, receive_eigenvalues

FIXED_POINT = "fixed-point-iteration"
BISECTION = "bisection"

DEFAULT_TOL = 1e-12
MAX_FIXED_POINT_ITERS = 1000
_MAX_BISECTIONS = 400


class SolverError(ArithmeticError):
    """The fixed-point equation could not be solved to tolerance."""


class UndefinedDofError(ZeroDivisionError):
    """The sensing DoF ratio is undefined because the upper bound vanishes."""


@dataclass(frozen=True)
class FixedPointSolution:
    rho: float
    delta: float
    residual: float
    iterations: int
    method: str

    @property
    def alpha(self):
        """``rho / (1 + rho * delta)``, the resolvent weight."""
        return self.rho / (1.0 + self.rho * self.delta)


@dataclass(frozen=True)
class SmiEstimate:
    nats: float
    method: str
    stderr: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def bits(self):
        return self.nats / np.log(2.0)


@dataclass(frozen=True)
class DofBounds:
    lower: int
    upper: int


class DofEstimate(NamedTuple):
    value: float
    sequence: np.ndarray
    noise_sweep: np.ndarray


def gram_eigenvalues(gram):
    """Eigenvalues of a Hermitian PSD matrix, clamped at zero."""
    _, ev = check_hermitian_psd(gram, "gram")
    return np.clip(ev, 0.0, None)


def fixed_point_rhs(delta, t, rho, n_frames):
    """Right-hand side of the delta equation, in the eigenbasis of T.

    ``(1/N_S) tr T (I + rho/(1+rho*delta) T)^{-1}`` written as
    ``(1/N_S) sum_i t_i (1+rho*delta) / (1 + rho*delta + rho*t_i)``.
    Broadcasts over leading axes of ``delta``/``rho``.
    """
    delta = np.asarray(delta, dtype=float)[..., None]
    rho = np.asarray(rho, dtype=float)[..., None]
    x = 1.0 + rho * delta
    return np.sum(t * x / (x + rho * t), axis=-1) / n_frames


def _bisect(t, rho, n_frames, tol):
    """Bisection on sign(delta - RHS(delta)) over [0, tr(T)/N_S]."""
    lo = np.zeros_like(rho)
    hi = np.full_like(rho, t.sum() / n_frames)
    iters = np.zeros(rho.shape, dtype=int)
    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        active = (hi - lo) > 2 * np.finfo(float).eps * np.maximum(hi, np.finfo(float).tiny)
        if not active.any():
            break
        g = mid - fixed_point_rhs(mid, t, rho, n_frames)
        up = active & (g > 0)
        down = active & ~(g > 0)
        hi = np.where(up, mid, hi)
        lo = np.where(down, mid, lo)
        iters += active
    # pick the endpoint with the smaller residual
    r_lo = np.abs(lo - fixed_point_rhs(lo, t, rho, n_frames))
    r_hi = np.abs(hi - fixed_point_rhs(hi, t, rho, n_frames))
    return np.where(r_lo <= r_hi, lo, hi), iters


def solve_delta_spectrum(t, rho, n_frames, tol=DEFAULT_TOL, method="auto",
                         max_iter=MAX_FIXED_POINT_ITERS):
    """Solve the delta equation for a vector of loads ``rho`` at once.

    Parameters
    ----------
    t : array, shape (n,)
        Eigenvalues of T (non-negative).
    rho : array_like
        Loads; any shape.
    n_frames : float
        Number of frames N_S (may be non-integer).
    method : {"auto", "fixed-point-iteration", "bisection"}
        ``auto`` iterates from ``delta_0 = tr(T)/N_S`` and falls back to
        bisection for entries that have not converged after ``max_iter``
        iterations.

    Returns
    -------
    delta, residual, iterations, methods : arrays shaped like ``rho``
    """
    t = np.clip(np.asarray(t, dtype=float).ravel(), 0.0, None)
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0) or not np.all(np.isfinite(rho)):
        raise ValueError("rho must be finite and >= 0")
    if not n_frames > 0:
        raise ValueError(f"n_frames must be > 0, got {n_frames!r}")
    if method not in ("auto", FIXED_POINT, BISECTION):
        raise ValueError(f"unknown method {method!r}")

    shape = rho.shape
    rho = rho.ravel()
    delta0 = t.sum() / n_frames
    delta = np.full(rho.shape, delta0)
    iters = np.zeros(rho.shape, dtype=int)
    used = np.full(rho.shape, FIXED_POINT, dtype=object)

    if method == BISECTION:
        delta, iters = _bisect(t, rho, n_frames, tol)
        used[:] = BISECTION
    elif delta0 > 0:
        # The right-hand side is increasing in delta and delta_0 lies above the
        # root, so plain iteration decreases monotonically to the solution.
        todo = np.ones(rho.shape, dtype=bool)
        prev_res = np.full(rho.shape, np.inf)
        for _ in range(max_iter):
            idx = np.flatnonzero(todo)
            if idx.size == 0:
                break
            d = delta[idx]
            nxt = fixed_point_rhs(d, t, rho[idx], n_frames)
            if not np.all(np.isfinite(nxt)):
                raise SolverError("non-finite value during fixed-point iteration")
            res = np.abs(d - nxt)
            scale = np.maximum(1.0, d)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = res / prev_res[idx]
                # a-posteriori error of d is about res / (1 - ratio)
                err = np.where(ratio < 1.0, res / (1.0 - ratio), res)
            done = (res <= tol * scale) & (err <= 0.1 * tol * scale)
            prev_res[idx] = res
            delta[idx] = np.where(done, d, nxt)
            iters[idx] += 1
            todo[idx[done]] = False
        if todo.any():
            if method == FIXED_POINT:
                raise SolverError(
                    f"fixed-point iteration did not converge in {max_iter} iterations"
                )
            idx = np.flatnonzero(todo)
            d, it = _bisect(t, rho[idx], n_frames, tol)
            delta[idx] = d
            iters[idx] += it
            used[idx] = BISECTION

    residual = np.abs(delta - fixed_point_rhs(delta, t, rho, n_frames))
    bad = residual > tol * np.maximum(1.0, delta)
    if np.any(bad):
        raise SolverError(
            f"fixed-point residual {residual[bad].max():.3e} exceeds tolerance {tol:.1e}"
        )
    return (delta.reshape(shape), residual.reshape(shape),
            iters.reshape(shape), used.reshape(shape))


def solve_delta(gram, rho, n_frames, tol=DEFAULT_TOL, method="auto"):
    """Unique non-negative root of ``delta = (1/N_S) tr T (I + rho/(1+rho delta) T)^{-1}``.

    Parameters
    ----------
    gram : array, shape (n, n)
        The Hermitian PSD matrix T.
    rho : float
        Load, >= 0.
    n_frames : float
        N_S.
    tol : float
        Bound on ``|delta - RHS(delta)| / max(1, delta)``.
    method : str
        ``"auto"`` (iteration with bisection fallback), or force one method.

    Returns
    -------
    FixedPointSolution
    """
    t = gram_eigenvalues(gram)
    rho = float(rho)
    d, r, it, m = solve_delta_spectrum(t, np.array([rho]), n_frames, tol, method)
    return FixedPointSolution(rho, float(d[0]), float(r[0]), int(it[0]), str(m[0]))


def delta_upper_bound(rank_t, rho, n_frames):
    """``r_T / (rho (N_S - r_T))``; valid when N_S > r_T."""
    return rank_t / (rho * (n_frames - rank_t))


def asymptotic_terms(lams, t, n_frames, tol=DEFAULT_TOL):
    """Per-target deterministic-equivalent terms and the solved deltas.

    Zero loads contribute exactly zero and are skipped.
    """
    lams = np.asarray(lams, dtype=float)
    terms = np.zeros(lams.shape)
    deltas = np.zeros(lams.shape)
    live = lams > 0
    if not live.any() or not np.any(t > 0):
        return terms, deltas
    lam = lams[live]
    delta, *_ = solve_delta_spectrum(t, lam, n_frames, tol)
    ld = lam * delta
    alpha = lam / (1.0 + ld)
    logdet = np.sum(np.log1p(alpha[:, None] * t[None, :]), axis=1)
    terms[live] = logdet + n_frames * (np.log1p(ld) - ld / (1.0 + ld))
    deltas[live] = delta
    return terms, deltas


def upper_bound_terms(lams, t):
    """``log det(I + lambda_j T)`` for each j."""
    lams = np.asarray(lams, dtype=float)
    return np.sum(np.log1p(lams[:, None] * t[None, :]), axis=1)


def _spectra(corr, precoder, scenario):
    lams = receive_eigenvalues(corr, scenario.noise_power, scenario.n_targets)
    t = gram_eigenvalues(effective_gram(corr, precoder))
    return lams, t


def _meta(scenario):
    return {
        "n_tx": scenario.n_tx,
        "n_rx": scenario.n_rx,
        "n_targets": scenario.n_targets,
        "n_frames": scenario.n_frames,
        "noise_power": scenario.noise_power,
    }


def smi_asymptotic(corr, precoder, scenario):
    """Large-N_S approximation of the sensing MI, in nats."""
    lams, t = _spectra(corr, precoder, scenario)
    terms, _ = asymptotic_terms(lams, t, scenario.n_frames)
    return SmiEstimate(max(float(terms.sum()), 0.0), "asymptotic", meta=_meta(scenario))


def smi_upper_bound(corr, precoder, scenario):
    """Jensen bound ``log det(I + sigma^-2 R_R kron T)`` via the per-eigenvalue sum."""
    lams, t = _spectra(corr, precoder, scenario)
    return SmiEstimate(float(upper_bound_terms(lams, t).sum()), "upper-bound",
                       meta=_meta(scenario))


def lower_bound_factor(scenario, precoder):
    if scenario.n_frames < scenario.n_targets:
        raise ValueError("the lower bound requires n_frames >= n_targets")
    r = min(scenario.n_targets, matrix_rank_gram(precoder))
    return (scenario.n_frames - r) / scenario.n_frames


def smi_lower_bound(corr, precoder, scenario):
    """Upper bound scaled by ``(N_S - min(K, rank(F F^H))) / N_S``."""
    factor = lower_bound_factor(scenario, precoder)
    ub = smi_upper_bound(corr, precoder, scenario).nats
    return SmiEstimate(factor * ub, "lower-bound", meta=_meta(scenario))


def dof_bounds(scenario, precoder):
    r = min(scenario.n_targets, matrix_rank_gram(precoder))
    return DofBounds(max(scenario.n_frames - r, 0), scenario.n_frames)


def dof_estimate(corr, precoder, scenario, noise_sweep):
    """``N_S * I / I_upper`` along a decreasing noise sweep.

    Returns the value at the smallest noise power together with the whole
    sequence so convergence can be inspected.
    """
    sweep = np.asarray(noise_sweep, dtype=float)
    if sweep.ndim != 1 or sweep.size < 3:
        raise ValueError("noise_sweep needs at least 3 points")
    if np.any(np.diff(sweep) >= 0) or np.any(sweep <= 0):
        raise ValueError("noise_sweep must be positive and strictly decreasing")
    seq = np.empty(sweep.size)
    for i, s in enumerate(sweep):
        sc = scenario.replace(noise_power=float(s))
        ub = smi_upper_bound(corr, precoder, sc).nats
        if ub <= 0:
            raise UndefinedDofError("upper bound is zero; sensing DoF undefined")
        seq[i] = sc.n_frames * smi_asymptotic(corr, precoder, sc).nats / ub
    return DofEstimate(float(seq[-1]), seq, sweep)


def smi_ns_derivative(corr, precoder, scenario):
    """``d I / d N_S = sum_j log(1 + lambda_j delta_j) - lambda_j delta_j / (1 + lambda_j delta_j)``."""
    lams, t = _spectra(corr, precoder, scenario)
    _, deltas = asymptotic_terms(lams, t, scenario.n_frames)
    ld = lams * deltas
    return float(np.sum(np.log1p(ld) - ld / (1.0 + ld)))


def rank_of_gram(gram):
    return numerical_rank(gram_eigenvalues(gram), PSD_RTOL)
