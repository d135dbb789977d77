import numpy as np
import pytest

from flexbeam.gains import compute_observer_gains, place_state_gain, synthesize_feedback
from flexbeam.kernels import solve_control_kernels, solve_inverse_kernels, solve_observer_kernels
from flexbeam.params import bundled_config, load_params, nondimensionalize


@pytest.fixture(scope="session")
def dp1():
    return nondimensionalize(load_params(bundled_config("quanser_link1")))


@pytest.fixture(scope="session")
def dp2():
    return nondimensionalize(load_params(bundled_config("quanser_link2")))


@pytest.fixture(scope="session")
def design64(dp1):
    """Solved kernels and gains for Link 1 on a 64-cell grid."""
    n = 64
    K = place_state_gain(dp1)
    ck = solve_control_kernels(dp1, K, n)
    ik = solve_inverse_kernels(ck, dp1)
    g = synthesize_feedback(ck, ik, dp1, 0.5)
    ok = solve_observer_kernels(dp1, n)
    og = compute_observer_gains(ok, dp1)
    return {"n": n, "K": K, "ck": ck, "ik": ik, "g": g, "ok": ok, "og": og}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
