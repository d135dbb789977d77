import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexbeam.control import (backstepping_transform, beta_t_hub_direct, lqr_ff_u,
                              output_feedback_u, random_admissible_states, saturate,
                              state_feedback_u, torque_from_u, u_equivalence_check,
                              u_from_torque, u_via_target)
from flexbeam.gains import lqr_feedforward_gains
from flexbeam.plant import zero_state


def test_equivalence_certificate(design64, dp1):
    d = design64
    states = random_admissible_states(d["n"], dp1, 20, seed=3)
    rep = u_equivalence_check(states, d["ck"], d["ik"], d["g"], dp1, theta_dd=0.3)
    assert rep["count"] == 20
    assert rep["max_rel"] < 2e-3


def test_target_condition_imposed(design64, dp1):
    # under the explicit law, beta_t(1) + c beta(1) vanishes up to O(h)
    d = design64
    worst = 0.0
    for rs in random_admissible_states(d["n"], dp1, 5, seed=4):
        U = state_feedback_u(rs, d["g"])
        beta1 = backstepping_transform(rs, d["ck"])[-1]
        r = beta_t_hub_direct(rs, U, d["ck"], dp1) + d["g"].c_acute * beta1
        worst = max(worst, abs(r) / (1.0 + abs(beta1)))
    assert worst < 0.05


def test_zero_state_gives_zero(design64, dp1):
    rs = zero_state(design64["n"])
    assert state_feedback_u(rs, design64["g"]) == 0.0
    assert np.all(backstepping_transform(rs, design64["ck"]) == 0.0)
    assert u_via_target(rs, design64["ck"], design64["ik"], design64["g"], dp1) == 0.0


def test_output_feedback_matches_state_feedback_on_exact_estimate(design64, dp1):
    rs = random_admissible_states(design64["n"], dp1, 1, seed=5)[0]
    g = design64["g"]
    a = state_feedback_u(rs, g, 0.2)
    b = output_feedback_u(rs.xi, rs.eta, rs.X, rs.xi[0], g, 0.2)
    assert b == pytest.approx(a, rel=1e-12)


def test_grid_mismatch(design64, dp1):
    rs = zero_state(32)
    with pytest.raises(ValueError, match="grid mismatch"):
        state_feedback_u(rs, design64["g"])


@settings(max_examples=50, deadline=None)
@given(U=st.floats(-1e6, 1e6), v=st.floats(-10, 10), a=st.floats(-10, 10))
def test_torque_round_trip(dp1, U, v, a):
    tau = torque_from_u(U, v, a, dp1)
    assert u_from_torque(tau, v, a, dp1) == pytest.approx(U, abs=1e-6 * (1 + abs(U)))


def test_dotted_flag_changes_damping_term(dp1):
    t1 = torque_from_u(0.0, 2.0, 0.0, dp1, dotted=True, theta_d=5.0)
    t2 = torque_from_u(0.0, 2.0, 0.0, dp1, dotted=False, theta_d=5.0)
    assert t1 == pytest.approx(-dp1.c * 2.0)
    assert t2 == pytest.approx(-dp1.c * 5.0)


@settings(max_examples=50, deadline=None)
@given(tau=st.floats(-1e9, 1e9), lim=st.floats(1e-3, 1e6))
def test_saturate_bounds(tau, lim):
    out = saturate(tau, lim)
    assert abs(out) <= lim
    if abs(tau) <= lim:
        assert out == tau
    assert saturate(tau, None) == tau


def test_lqr_ff_is_linear(dp1):
    lg = lqr_feedforward_gains(dp1)
    args = np.array([0.1, -0.2, 0.03, 0.5, 0.2, 0.7])
    u = lqr_ff_u(*args[:4], lg, args[4], args[5])
    assert u == pytest.approx(float(lg.as_array() @ args))
    assert lqr_ff_u(*(2 * args[:4]), lg, *(2 * args[4:])) == pytest.approx(2 * u)
