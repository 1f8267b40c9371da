"""Input validation helpers shared across the package."""
from numbers import Integral, Real

import numpy as np

HERMITIAN_RTOL = 1e-12
PSD_RTOL = 1e-10
RANK_RTOL = 1e-10


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_positive_real(value, name):
    if isinstance(value, bool) or not isinstance(value, Real):
        raise ValueError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be finite and > 0, got {value!r}")
    return value


def check_square(a, name, size=None):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    if size is not None and a.shape[0] != size:
        raise ValueError(f"{name} must be {size}x{size}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def check_hermitian_psd(a, name, size=None):
    """Validate a Hermitian positive semidefinite matrix.

    Returns the Hermitian part as a complex array together with its
    eigenvalues in ascending order.
    """
    a = check_square(a, name, size).astype(complex)
    scale = max(np.abs(a).max(initial=0.0), np.finfo(float).tiny)
    if np.abs(a - a.conj().T).max(initial=0.0) > HERMITIAN_RTOL * scale:
        raise ValueError(f"{name} is not Hermitian")
    a = 0.5 * (a + a.conj().T)
    eigvals = np.linalg.eigvalsh(a)
    top = max(eigvals[-1], 0.0) if eigvals.size else 0.0
    ref = top if top > 0 else scale
    if eigvals.size and eigvals[0] < -PSD_RTOL * ref:
        raise ValueError(
            f"{name} is not positive semidefinite "
            f"(smallest eigenvalue {eigvals[0]:.3e}, largest {top:.3e})"
        )
    return a, eigvals


def numerical_rank(eigvals, rtol=RANK_RTOL):
    """Number of eigenvalues above ``rtol`` times the largest one."""
    eigvals = np.asarray(eigvals, dtype=float)
    if eigvals.size == 0:
        return 0
    top = eigvals.max()
    if top <= 0:
        return 0
    return int(np.count_nonzero(eigvals > rtol * top))


def matrix_rank_gram(f, rtol=RANK_RTOL):
    """rank(F F^H), with tolerance ``rtol`` times the largest squared singular value."""
    f = np.asarray(f)
    if f.size == 0:
        return 0
    sv = np.linalg.svd(f, compute_uv=False)
    return numerical_rank(sv**2, rtol)


def check_precoder(f, n_tx, n_streams=None, name="precoder"):
    f = np.asarray(f)
    if f.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {f.shape}")
    if f.shape[0] != n_tx:
        raise ValueError(f"{name} must have {n_tx} rows, got shape {f.shape}")
    if n_streams is not None and f.shape[1] != n_streams:
        raise ValueError(f"{name} must have {n_streams} columns, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError(f"{name} contains non-finite entries")
    return f.astype(complex)
