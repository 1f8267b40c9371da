"""Monte-Carlo reference for the sensing MI with Gaussian random signals."""
from dataclasses import dataclass

import numpy as np

from ._validation import check_positive_int, check_precoder
from .model import receive_eigenvalues
from .rmt import SmiEstimate

EIGEN_SUM = "eigen-sum"
KRON_DIRECT = "kron-direct"
KRON_MAX_DIM = 64


@dataclass(frozen=True)
class RandomSignal:
    """A K x N_S signal matrix with i.i.d. CN(0, 1/N_S) entries."""

    s: np.ndarray
    seed: object = None

    @property
    def n_streams(self):
        return self.s.shape[0]

    @property
    def n_frames(self):
        return self.s.shape[1]


@dataclass(frozen=True)
class McReport:
    mean_nats: float
    stderr: float
    n_trials: int
    seed: int
    per_trial_path: str

    def as_estimate(self):
        return SmiEstimate(self.mean_nats, "monte-carlo", self.stderr)


def _trial_rng(seed, trial=None):
    # seed may itself be a tuple, e.g. (master seed, sweep point)
    entropy = [int(x) for x in np.atleast_1d(np.asarray(seed, dtype=object))]
    if trial is not None:
        entropy.append(int(trial))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _draw(rng, k, n_frames):
    scale = np.sqrt(0.5 / n_frames)
    return scale * (rng.standard_normal((k, n_frames)) + 1j * rng.standard_normal((k, n_frames)))


def sample_signal(k, n_frames, seed, trial=None):
    """Draw S with entries of variance ``1/N_S`` so that ``E[S S^H] = I``.

    ``(seed, trial)`` feeds a ``SeedSequence``, so the draw is a pure
    function of the pair.
    """
    k = check_positive_int(k, "k")
    n_frames = check_positive_int(n_frames, "n_frames")
    if n_frames < k:
        raise ValueError(f"n_frames ({n_frames}) must be >= k ({k})")
    return RandomSignal(_draw(_trial_rng(seed, trial), k, n_frames), (seed, trial))


def _signal_gram(corr, precoder):
    """Square root of ``F^H R_T F``; the K x K core shared by all trials."""
    b = corr.r_tx_sqrt @ precoder
    c = b.conj().T @ b
    w, v = np.linalg.eigh(0.5 * (c + c.conj().T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def _logdet_eigen_sum(lams, c_sqrt, s):
    """``sum_j log det(I + lambda_j R_T^{1/2} F S S^H F^H R_T^{1/2})``.

    The non-zero spectrum of ``R_T^{1/2} F S S^H F^H R_T^{1/2}`` equals that
    of ``C^{1/2} S S^H C^{1/2}`` with ``C = F^H R_T F``. ``s`` may carry a
    leading batch axis.
    """
    q = c_sqrt @ s
    mu = np.clip(np.linalg.eigvalsh(q @ np.swapaxes(q.conj(), -1, -2)), 0.0, None)
    return np.sum(np.log1p(lams[:, None] * mu[..., None, :]), axis=(-2, -1))


def _logdet_kron(corr, precoder, s, noise_power):
    if corr.n_tx * corr.n_rx > KRON_MAX_DIM:
        raise ValueError(
            f"kron-direct path limited to n_tx * n_rx <= {KRON_MAX_DIM}"
        )
    g = corr.r_tx_sqrt @ precoder @ s
    a = np.kron(corr.r_rx, g @ g.conj().T) / noise_power
    sign, logdet = np.linalg.slogdet(np.eye(a.shape[0]) + a)
    if sign.real <= 0 or not np.isfinite(logdet):
        raise FloatingPointError("non-finite log-determinant")
    return float(logdet)


def smi_realization(corr, precoder, signal, scenario, path=EIGEN_SUM):
    """Exact MI for one signal realization, in nats."""
    f = check_precoder(precoder, corr.n_tx)
    s = signal.s if isinstance(signal, RandomSignal) else np.asarray(signal)
    if s.shape[0] != f.shape[1]:
        raise ValueError(f"signal has {s.shape[0]} rows, precoder has {f.shape[1]} columns")
    if path == KRON_DIRECT:
        return _logdet_kron(corr, f, s, scenario.noise_power)
    if path != EIGEN_SUM:
        raise ValueError(f"unknown path {path!r}")
    lams = receive_eigenvalues(corr, scenario.noise_power, scenario.n_targets)
    value = float(_logdet_eigen_sum(lams, _signal_gram(corr, f), s))
    if not np.isfinite(value):
        raise FloatingPointError("non-finite log-determinant")
    return value


def smi_monte_carlo(corr, precoder, scenario, n_trials=5000, seed=0, path=EIGEN_SUM):
    """Average of per-realization MI over ``n_trials`` independent signals.

    Trial ``i`` draws its signal from ``SeedSequence([seed, i])``, so the
    report depends only on ``(seed, n_trials)``.
    """
    n_trials = check_positive_int(n_trials, "n_trials")
    if n_trials < 2:
        raise ValueError("n_trials must be >= 2")
    f = check_precoder(precoder, corr.n_tx, scenario.n_targets)
    k, n_frames = scenario.n_targets, scenario.n_frames
    signals = np.stack([_draw(_trial_rng(seed, i), k, n_frames) for i in range(n_trials)])
    if path == EIGEN_SUM:
        lams = receive_eigenvalues(corr, scenario.noise_power, k)
        values = _logdet_eigen_sum(lams, _signal_gram(corr, f), signals)
    elif path == KRON_DIRECT:
        values = np.array([_logdet_kron(corr, f, s, scenario.noise_power) for s in signals])
    else:
        raise ValueError(f"unknown path {path!r}")
    if not np.all(np.isfinite(values)):
        raise FloatingPointError("non-finite log-determinant")
    return McReport(
        mean_nats=float(values.mean()),
        stderr=float(values.std(ddof=1) / np.sqrt(n_trials)),
        n_trials=n_trials,
        seed=seed,
        per_trial_path=path,
    )
