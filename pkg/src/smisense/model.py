"""Sensing scenarios: targets, steering vectors, Kronecker correlations."""
import dataclasses
from dataclasses import dataclass, field

import numpy as np

from ._validation import (
    RANK_RTOL,
    check_hermitian_psd,
    check_positive_int,
    check_positive_real,
    check_precoder,
    numerical_rank,
)


def dbm_to_watts(x_dbm):
    """Convert a power level in dBm to watts."""
    out = 10.0 ** ((np.asarray(x_dbm, dtype=float) - 30.0) / 10.0)
    return float(out) if out.ndim == 0 else out


def watts_to_dbm(x_watts):
    """Convert a power level in watts to dBm."""
    out = 10.0 * np.log10(np.asarray(x_watts, dtype=float)) + 30.0
    return float(out) if out.ndim == 0 else out


def db_to_linear(x_db):
    return 10.0 ** (x_db / 10.0)


@dataclass(frozen=True)
class Scenario:
    """Array sizes, power budget and noise level of a bistatic sensing link.

    Powers are linear (watts). ``snr_db`` is the per-target SNR
    ``P * sigma_k^2 / sigma_N^2`` used when target reflection variances are
    derived rather than given explicitly.
    """

    n_tx: int
    n_rx: int
    n_targets: int
    n_frames: int
    noise_power: float = 1e-12
    power_budget: float = 1.0
    carrier_hz: float = 28e9
    snr_db: float = 20.0

    def __post_init__(self):
        for name in ("n_tx", "n_rx", "n_targets", "n_frames"):
            check_positive_int(getattr(self, name), name)
        for name in ("noise_power", "power_budget", "carrier_hz"):
            object.__setattr__(self, name, check_positive_real(getattr(self, name), name))
        if not np.isfinite(self.snr_db):
            raise ValueError(f"snr_db must be finite, got {self.snr_db!r}")
        if self.n_frames < self.n_targets:
            raise ValueError(
                f"n_frames ({self.n_frames}) must be >= n_targets ({self.n_targets})"
            )

    @property
    def reflect_var(self):
        """Per-target reflection variance that realises ``snr_db``."""
        return db_to_linear(self.snr_db) * self.noise_power / self.power_budget

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class TargetSet:
    """Angles of departure/arrival (radians) and reflection variances."""

    aod: np.ndarray
    aoa: np.ndarray
    reflect_var: np.ndarray

    def __post_init__(self):
        aod = np.atleast_1d(np.asarray(self.aod, dtype=float))
        aoa = np.atleast_1d(np.asarray(self.aoa, dtype=float))
        var = np.broadcast_to(np.asarray(self.reflect_var, dtype=float), aod.shape).copy()
        if aod.ndim != 1 or aod.shape != aoa.shape:
            raise ValueError("aod and aoa must be 1-D arrays of equal length")
        if aod.size == 0:
            raise ValueError("at least one target is required")
        if not (np.all(np.isfinite(aod)) and np.all(np.isfinite(aoa))):
            raise ValueError("target angles must be finite")
        if not np.all(np.isfinite(var)) or np.any(var < 0):
            raise ValueError("reflection variances must be finite and >= 0")
        object.__setattr__(self, "aod", aod)
        object.__setattr__(self, "aoa", aoa)
        object.__setattr__(self, "reflect_var", var)

    def __len__(self):
        return self.aod.size

    @classmethod
    def random(cls, n_targets, reflect_var, seed=None, angle_range_deg=(30.0, 60.0)):
        """Draw AoD/AoA uniformly in ``angle_range_deg`` (degrees).

        Angles are drawn target by target, so with a fixed seed the first K
        targets do not depend on ``n_targets``.
        """
        n_targets = check_positive_int(n_targets, "n_targets")
        lo, hi = np.deg2rad(angle_range_deg)
        rng = np.random.default_rng(seed)
        angles = rng.uniform(lo, hi, (n_targets, 2))
        return cls(angles[:, 0], angles[:, 1], np.full(n_targets, float(reflect_var)))


def steering_vector(n_antennas, angle):
    """Half-wavelength ULA response, element m equal to exp(i pi m sin(angle))."""
    n_antennas = check_positive_int(n_antennas, "n_antennas")
    if not np.isfinite(angle):
        raise ValueError(f"angle must be finite, got {angle!r}")
    return np.exp(1j * np.pi * np.arange(n_antennas) * np.sin(angle))


def hermitian_sqrt(a):
    """PSD square root via eigendecomposition, negative eigenvalues clamped at 0."""
    w, v = np.linalg.eigh(a)
    w = np.clip(w, 0.0, None)
    root = (v * np.sqrt(w)) @ v.conj().T
    return 0.5 * (root + root.conj().T)


@dataclass(frozen=True)
class CorrelationPair:
    """Transmit/receive correlation factors of ``E[h h^H] ~ R_R kron R_T``.

    Parameters
    ----------
    r_tx : array, shape (n_tx, n_tx)
        Hermitian PSD transmit correlation.
    r_rx : array, shape (n_rx, n_rx)
        Hermitian PSD receive correlation.
    max_rank : int, optional
        If given, both factors must have numerical rank at most ``max_rank``.
    """

    r_tx: np.ndarray
    r_rx: np.ndarray
    max_rank: int = None
    r_tx_sqrt: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        r_tx, ev_tx = check_hermitian_psd(self.r_tx, "r_tx")
        r_rx, ev_rx = check_hermitian_psd(self.r_rx, "r_rx")
        if self.max_rank is not None:
            for name, ev in (("r_tx", ev_tx), ("r_rx", ev_rx)):
                rank = numerical_rank(ev, RANK_RTOL)
                if rank > self.max_rank:
                    raise ValueError(f"rank({name}) = {rank} exceeds {self.max_rank}")
        object.__setattr__(self, "r_tx", r_tx)
        object.__setattr__(self, "r_rx", r_rx)
        object.__setattr__(self, "r_tx_sqrt", hermitian_sqrt(r_tx))

    @property
    def n_tx(self):
        return self.r_tx.shape[0]

    @property
    def n_rx(self):
        return self.r_rx.shape[0]

    def kron(self):
        """Full ``R_R kron R_T``; only sensible for small arrays."""
        return np.kron(self.r_rx, self.r_tx)


def build_correlations(targets, scenario):
    """Correlation factors induced by a target set.

    ``R_T = sum_k a(aod_k) a(aod_k)^H`` and
    ``R_R = sum_k sigma_k^2 b(aoa_k) b(aoa_k)^H``, so each has rank at most K.
    """
    if len(targets) < 1:
        raise ValueError("at least one target is required")
    half_pi = np.pi / 2 + 1e-12
    if np.any(np.abs(targets.aod) > half_pi) or np.any(np.abs(targets.aoa) > half_pi):
        raise ValueError("target angles must lie within [-pi/2, pi/2]")
    a = np.stack([steering_vector(scenario.n_tx, t) for t in targets.aod], axis=1)
    b = np.stack([steering_vector(scenario.n_rx, t) for t in targets.aoa], axis=1)
    r_tx = a @ a.conj().T
    r_rx = (b * targets.reflect_var) @ b.conj().T
    return CorrelationPair(r_tx, r_rx, max_rank=len(targets))


@dataclass(frozen=True)
class TargetResponse:
    """A realisation of H and its vectorisation ``h = vec(H^H)``."""

    h_matrix: np.ndarray
    h_vec: np.ndarray

    @classmethod
    def from_matrix(cls, h_matrix):
        h_matrix = np.asarray(h_matrix, dtype=complex)
        return cls(h_matrix, h_matrix.conj().T.reshape(-1, order="F"))

    def unvec(self):
        """Recover ``H^H`` from ``h_vec`` (column stacking inverse)."""
        n_rx, n_tx = self.h_matrix.shape
        return self.h_vec.reshape((n_tx, n_rx), order="F")


def sample_target_response(targets, scenario, rng_seed=None):
    """Draw ``H = sum_k eps_k b(aoa_k) a(aod_k)^H`` with ``eps_k ~ CN(0, sigma_k^2)``."""
    rng = np.random.default_rng(rng_seed)
    k = len(targets)
    eps = np.sqrt(targets.reflect_var / 2.0) * (
        rng.standard_normal(k) + 1j * rng.standard_normal(k)
    )
    a = np.stack([steering_vector(scenario.n_tx, t) for t in targets.aod], axis=1)
    b = np.stack([steering_vector(scenario.n_rx, t) for t in targets.aoa], axis=1)
    return TargetResponse.from_matrix((b * eps) @ a.conj().T)


def response_covariance(targets, scenario):
    """Exact ``E[h h^H]`` for ``h = vec(H^H)`` under independent reflections.

    ``vec(a b^H) = conj(b) kron a``, so the covariance is
    ``sum_k sigma_k^2 (conj(b_k) b_k^T) kron (a_k a_k^H)``.
    """
    n = scenario.n_tx * scenario.n_rx
    cov = np.zeros((n, n), dtype=complex)
    for phi, theta, var in zip(targets.aod, targets.aoa, targets.reflect_var):
        u = np.kron(steering_vector(scenario.n_rx, theta).conj(), steering_vector(scenario.n_tx, phi))
        cov += var * np.outer(u, u.conj())
    return cov


def receive_eigenvalues(corr, noise_power, n_targets=None):
    """Largest eigenvalues of ``R_R / sigma_N^2`` in descending order.

    Returns ``n_targets`` values (zero padded if ``n_rx < n_targets``); every
    discarded eigenvalue must be numerically zero.
    """
    noise_power = check_positive_real(noise_power, "noise_power")
    ev = np.linalg.eigvalsh(corr.r_rx)[::-1] / noise_power
    ev = np.clip(ev, 0.0, None)
    k = corr.max_rank if n_targets is None else n_targets
    if k is None:
        k = ev.size
    k = check_positive_int(k, "n_targets")
    top = ev[0] if ev.size else 0.0
    if ev.size > k and np.any(ev[k:] > RANK_RTOL * top):
        raise ValueError(
            f"R_R has more than {k} eigenvalues above the rank tolerance"
        )
    out = np.zeros(k)
    m = min(k, ev.size)
    out[:m] = ev[:m]
    return out


def effective_gram(corr, precoder):
    """``T(F) = R_T^{1/2} F F^H R_T^{1/2}`` (Hermitian PSD, n_tx x n_tx)."""
    f = check_precoder(precoder, corr.n_tx)
    b = corr.r_tx_sqrt @ f
    t = b @ b.conj().T
    return 0.5 * (t + t.conj().T)


def eigenbeam_precoder(corr, n_streams, power):
    """Top ``n_streams`` eigenvectors of R_T with equal power, ``||F||^2 = power``."""
    w, v = np.linalg.eigh(corr.r_tx)
    order = np.argsort(w)[::-1]
    f = np.zeros((corr.n_tx, n_streams), dtype=complex)
    m = min(n_streams, corr.n_tx)
    f[:, :m] = v[:, order[:m]]
    return f * np.sqrt(power / m)


def random_precoder(n_tx, n_streams, power, seed=None):
    """Complex Gaussian matrix rescaled onto the sphere ``||F||^2 = power``."""
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((n_tx, n_streams)) + 1j * rng.standard_normal((n_tx, n_streams))
    return f * np.sqrt(power) / np.linalg.norm(f)


__all__ = [
    "CorrelationPair",
    "Scenario",
    "TargetResponse",
    "TargetSet",
    "build_correlations",
    "db_to_linear",
    "dbm_to_watts",
    "effective_gram",
    "eigenbeam_precoder",
    "hermitian_sqrt",
    "random_precoder",
    "receive_eigenvalues",
    "response_covariance",
    "sample_target_response",
    "steering_vector",
    "watts_to_dbm",
]
