import numpy as np
import pytest

from smisense.model import CorrelationPair, Scenario, TargetSet, build_correlations, random_precoder


def random_psd(rng, n, rank, scale=1.0):
    b = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    return scale * (b @ b.conj().T) / rank


def random_instance(rng, n_tx=None, n_rx=None, k=None, n_frames=None, snr_db=None,
                    from_targets=None):
    """A random (scenario, correlations, precoder) triple with rank(R) <= K."""
    n_tx = n_tx or int(rng.integers(2, 9))
    n_rx = n_rx or int(rng.integers(2, 6))
    k = k or int(rng.integers(1, 6))
    n_frames = n_frames or int(rng.integers(k, 4 * k + 8))
    snr_db = float(rng.choice([0.0, 10.0, 20.0])) if snr_db is None else snr_db
    sc = Scenario(n_tx, n_rx, k, n_frames, snr_db=snr_db)
    if from_targets is None:
        from_targets = bool(rng.integers(0, 2))
    if from_targets:
        tg = TargetSet.random(k, sc.reflect_var, seed=int(rng.integers(1 << 31)),
                              angle_range_deg=(-60.0, 60.0))
        corr = build_correlations(tg, sc)
    else:
        r_tx = random_psd(rng, n_tx, min(k, n_tx))
        r_rx = random_psd(rng, n_rx, min(k, n_rx), scale=sc.reflect_var)
        corr = CorrelationPair(r_tx, r_rx, max_rank=k)
    f = random_precoder(n_tx, k, sc.power_budget, seed=int(rng.integers(1 << 31)))
    return sc, corr, f


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def desk():
    """Desk-scale scenario: 8 tx, 4 rx, 3 targets, 16 frames, 20 dB."""
    sc = Scenario(8, 4, 3, 16)
    tg = TargetSet.random(3, sc.reflect_var, seed=0)
    corr = build_correlations(tg, sc)
    return sc, corr


# criterion number -> (title, passed); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title}")
