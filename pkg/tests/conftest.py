import numpy as np
import pytest

import squeezeopt as sq


@pytest.fixture(scope="session")
def params() -> sq.SystemParams:
    """The standard rate set used throughout the studies."""
    return sq.SystemParams()


@pytest.fixture(scope="session")
def small_pulse() -> sq.Pulse:
    """A short random-but-fixed pulse for unit-scale dynamics tests."""
    cfg = sq.OptimizerConfig(seed=3)
    return sq.random_smooth_pulse(cfg, 1.0, 20)


def random_physical_moments(rng: np.random.Generator, max_squeeze: float = 1.0):
    """Random moment vector of a genuine two-mode Gaussian state.

    Built as V = S D S^T with D = diag(nu1, nu1, nu2, nu2), nu >= 1/2, and
    S symplectic (exponential of Omega K for symmetric K), then mapped back
    to moments.
    """
    from scipy.linalg import expm

    from squeezeopt.analysis import moments_from_covariance

    omega = np.zeros((4, 4))
    omega[0, 1] = omega[2, 3] = 1.0
    omega[1, 0] = omega[3, 2] = -1.0
    ksym = rng.standard_normal((4, 4)) * max_squeeze
    ksym = 0.5 * (ksym + ksym.T)
    s = expm(omega @ ksym)
    nus = 0.5 + rng.exponential(2.0, size=2)
    d = np.diag(np.repeat(nus, 2))
    v = s @ d @ s.T
    return moments_from_covariance(v)
