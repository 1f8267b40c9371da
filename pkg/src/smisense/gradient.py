"""Wirtinger gradients of the sensing-MI objectives with respect to the precoder.

All gradients follow the ``d/dF*`` convention: for a real objective ``L``,
the first-order change is ``dL = 2 Re tr(G^H dF)`` with ``G`` the returned
matrix, so ``G`` itself is an ascent direction.
"""
from dataclasses import dataclass

import numpy as np

from ._validation import check_precoder
from .model import effective_gram, receive_eigenvalues
from .rmt import asymptotic_terms, gram_eigenvalues, smi_asymptotic, smi_upper_bound

FD_STEP = 1e-5


class SingularSensitivityError(ArithmeticError):
    """The linear equation for the delta sensitivity is (nearly) singular."""


@dataclass
class GradientReport:
    grad: np.ndarray
    per_term: list = None
    fd_check: float = None


def _resolvent(gram, alpha):
    n = gram.shape[0]
    m = np.linalg.inv(np.eye(n) + alpha * gram)
    return 0.5 * (m + m.conj().T)


def _delta_gradient(corr, f, gram, alpha, n_frames):
    if alpha == 0.0:
        return corr.r_tx @ f / n_frames
    m = _resolvent(gram, alpha)
    tm = gram @ m
    denom = n_frames - alpha**2 * np.trace(tm @ tm).real
    if not denom > 1e-12 * n_frames:
        raise SingularSensitivityError(
            f"delta sensitivity denominator {denom:.3e} is not positive"
        )
    r_half = corr.r_tx_sqrt
    return r_half @ (m @ m) @ r_half @ f / denom


def delta_gradient(corr, precoder, rho, fixed_point, scenario):
    """Gradient of ``delta(rho)`` with respect to ``F*``.

    ``R_T^{1/2} M^2 R_T^{1/2} F / (N_S - alpha^2 tr((T M)^2))`` with
    ``M = (I + alpha T)^{-1}`` and ``alpha = rho / (1 + rho delta)``.
    """
    f = check_precoder(precoder, corr.n_tx)
    gram = effective_gram(corr, f)
    alpha = rho / (1.0 + rho * fixed_point.delta)
    return _delta_gradient(corr, f, gram, alpha, scenario.n_frames)


def euclidean_gradient(corr, precoder, scenario, per_term=False, fd_check=False,
                       fd_step=FD_STEP):
    """Gradient of the asymptotic SMI ``sum_j rho_bar_j(F)`` with respect to ``F*``.

    Each term is the chain-rule expansion
    ``-alpha^2 tr(M T) D' + alpha R^{1/2} M R^{1/2} F + N_S alpha D'
    - N_S lambda / (1 + lambda delta)^2 D'`` where ``D'`` is the delta
    gradient at ``rho = lambda_j``.
    """
    f = check_precoder(precoder, corr.n_tx)
    n_frames = scenario.n_frames
    lams = receive_eigenvalues(corr, scenario.noise_power, scenario.n_targets)
    gram = effective_gram(corr, f)
    t = gram_eigenvalues(gram)
    _, deltas = asymptotic_terms(lams, t, n_frames)
    r_half = corr.r_tx_sqrt

    grad = np.zeros_like(f)
    terms = []
    for lam, delta in zip(lams, deltas):
        if lam <= 0:
            terms.append(np.zeros_like(f))
            continue
        alpha = lam / (1.0 + lam * delta)
        m = _resolvent(gram, alpha)
        d_prime = _delta_gradient(corr, f, gram, alpha, n_frames)
        g = (
            -alpha**2 * np.trace(m @ gram).real * d_prime
            + alpha * (r_half @ m @ r_half @ f)
            + n_frames * alpha * d_prime
            - n_frames * lam / (1.0 + lam * delta) ** 2 * d_prime
        )
        terms.append(g)
        grad += g

    report = GradientReport(grad, terms if per_term else None)
    if fd_check:
        fd = finite_difference_gradient(
            lambda x: smi_asymptotic(corr, x, scenario).nats, f, fd_step
        )
        report.fd_check = relative_deviation(grad, fd)
    return report


def upper_bound_gradient(corr, precoder, scenario):
    """Gradient of the Jensen bound: ``sum_j lambda_j R^{1/2} (I + lambda_j T)^{-1} R^{1/2} F``."""
    f = check_precoder(precoder, corr.n_tx)
    lams = receive_eigenvalues(corr, scenario.noise_power, scenario.n_targets)
    gram = effective_gram(corr, f)
    r_half = corr.r_tx_sqrt
    acc = np.zeros_like(gram)
    for lam in lams:
        if lam > 0:
            acc += lam * _resolvent(gram, lam)
    return r_half @ acc @ r_half @ f


def objective_and_gradient(corr, scenario, objective):
    """Return ``(value_fn, grad_fn)`` for ``"asymptotic-smi"`` or ``"upper-bound-smi"``."""
    if objective == "asymptotic-smi":
        return (lambda f: smi_asymptotic(corr, f, scenario).nats,
                lambda f: euclidean_gradient(corr, f, scenario).grad)
    if objective == "upper-bound-smi":
        return (lambda f: smi_upper_bound(corr, f, scenario).nats,
                lambda f: upper_bound_gradient(corr, f, scenario))
    raise ValueError(f"unknown objective {objective!r}")


def finite_difference_gradient(objective, precoder, step=FD_STEP):
    """Central-difference ``d/dF*``: ``(d/dRe + i d/dIm) / 2`` per entry."""
    if not step > 0:
        raise ValueError("step must be > 0")
    f = np.asarray(precoder, dtype=complex)
    grad = np.zeros_like(f)
    for idx in np.ndindex(f.shape):
        parts = []
        for unit in (1.0, 1j):
            fp = f.copy()
            fm = f.copy()
            fp[idx] += step * unit
            fm[idx] -= step * unit
            vp, vm = objective(fp), objective(fm)
            if not (np.isfinite(vp) and np.isfinite(vm)):
                raise FloatingPointError(f"non-finite objective near entry {idx}")
            parts.append((vp - vm) / (2 * step))
        grad[idx] = 0.5 * (parts[0] + 1j * parts[1])
    return grad


def relative_deviation(analytic, reference):
    """``max |analytic - reference| / max(1, max |analytic|)``."""
    analytic = np.asarray(analytic)
    scale = max(1.0, np.abs(analytic).max(initial=0.0))
    return float(np.abs(analytic - np.asarray(reference)).max(initial=0.0) / scale)
