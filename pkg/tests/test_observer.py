import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexbeam.control import random_admissible_states
from flexbeam.observer import (FilteredDifferentiator, ObserverState, SensorBank,
                               constant_observer, deflection_from_strain, ideal_measurements,
                               observer_error_norm, step_observer, strain_from_deflection)
from flexbeam.plant import SimulationError, cfl_dt, step_riemann


def _run(dp, design, U_of_k, steps, os=None, rs=None, thdd=0.0):
    n = design["n"]
    dt = cfl_dt(dp, n)
    rs = rs if rs is not None else random_admissible_states(n, dp, 1, seed=7)[0]
    os = os if os is not None else constant_observer(n, 1.0)
    errs = []
    for k in range(steps):
        m = ideal_measurements(rs, dp)
        rn = step_riemann(rs, U_of_k(k), thdd, dp, dt)
        os = step_observer(os, m, thdd, design["og"], dp, dt, ideal_measurements(rn, dp))
        rs = rn
        errs.append((os.xi_hat - rs.xi, os.eta_hat - rs.eta, os.X_hat - rs.X))
    return os, rs, errs


def test_exact_estimate_stays_exact(dp1, design64):
    rs = random_admissible_states(design64["n"], dp1, 1, seed=8)[0]
    os = ObserverState(rs.xi.copy(), rs.eta.copy(), rs.X.copy())
    os, rs, errs = _run(dp1, design64, lambda k: 300.0 * np.sin(0.01 * k), 300, os, rs, 0.05)
    assert max(np.abs(e).max() for tri in errs for e in tri) < 1e-12


def test_error_independent_of_input(dp1, design64):
    _, _, e1 = _run(dp1, design64, lambda k: 0.0, 200)
    _, _, e2 = _run(dp1, design64, lambda k: 1e4 * np.cos(0.02 * k), 200)
    diff = max(np.abs(a - b).max() for t1, t2 in zip(e1, e2) for a, b in zip(t1, t2))
    assert diff < 1e-11


def test_measured_boundary_relations(dp1, design64):
    os, rs, _ = _run(dp1, design64, lambda k: 0.0, 5)
    m = ideal_measurements(rs, dp1)
    assert os.eta_hat[0] == pytest.approx(-m.xi0 + m.CX, abs=1e-14)
    s = dp1.sqrt_eps
    assert os.xi_hat[-1] == pytest.approx(-os.eta_hat[-1] + 2 * s * dp1.R * m.dtheta_dot,
                                          abs=1e-13)


def test_error_decays(dp1, design64):
    n = design64["n"]
    rs = random_admissible_states(n, dp1, 1, seed=9)[0]
    os = constant_observer(n, 1.0)
    e0 = observer_error_norm(os, rs)["total"]
    steps = int(6.0 / cfl_dt(dp1, n))
    os, rs, _ = _run(dp1, design64, lambda k: 0.0, steps, os, rs)
    assert observer_error_norm(os, rs)["total"] < 1e-3 * e0


def test_cfl_and_grid_checks(dp1, design64):
    os = constant_observer(32)
    rs = random_admissible_states(32, dp1, 1)[0]
    m = ideal_measurements(rs, dp1)
    with pytest.raises(ValueError, match="grid mismatch"):
        step_observer(os, m, 0.0, design64["og"], dp1, cfl_dt(dp1, 32))
    os = constant_observer(design64["n"])
    with pytest.raises(SimulationError, match="CFL"):
        step_observer(os, m, 0.0, design64["og"], dp1, 1.0)


@settings(max_examples=50, deadline=None)
@given(v=st.floats(-1.0, 1.0), Lw=st.floats(1e-4, 1e-1))
def test_strain_map_round_trip(v, Lw):
    assert deflection_from_strain(strain_from_deflection(v, Lw), Lw) == pytest.approx(v, abs=1e-15)


def test_filtered_differentiator_ramp():
    dt = 1e-3
    f = FilteredDifferentiator(200.0, 0.9, dt)
    out = [f.step(2.0 * k * dt) for k in range(3000)]
    # steady-state derivative of a ramp is its slope
    assert out[-1][1] == pytest.approx(2.0, rel=1e-6)
    with pytest.raises(ValueError):
        FilteredDifferentiator(-1.0, 0.9, dt)


def test_sensor_bank_matches_ideal_at_rest(dp1):
    n = 16
    rs = random_admissible_states(n, dp1, 1, seed=1)[0]
    rs = rs.replace(X=np.array([0.0, rs.X[1]]), dtheta_dot=0.0)
    bank = SensorBank(dp1, cfl_dt(dp1, n), omega_n=100.0)
    m = bank.measure(rs, 0.0, 0.0)
    ideal = ideal_measurements(rs, dp1)
    assert m.v_tip == pytest.approx(ideal.v_tip, rel=1e-12)
    assert m.x_tip == pytest.approx(ideal.x_tip, rel=1e-12)
    assert m.dtheta_dot == pytest.approx(0.0, abs=1e-12)
    assert not m.warm


def test_sensor_noise_is_seeded(dp1):
    rs = random_admissible_states(16, dp1, 1, seed=1)[0]
    a = SensorBank(dp1, 1e-3, 50.0, noise_theta=1e-3, seed=4).measure(rs, 0.0, 0.0)
    b = SensorBank(dp1, 1e-3, 50.0, noise_theta=1e-3, seed=4).measure(rs, 0.0, 0.0)
    assert a == b
