import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexbeam.gains import (FeedbackGains, GainError, compute_h_gains, lqr_feedforward_gains,
                            measured_output_row, place_observer_gain, place_state_gain,
                            printed_n_gains, surrogate_model)


@settings(max_examples=40, deadline=None)
@given(p1=st.floats(-20.0, -0.1), gap=st.floats(0.01, 10.0))
def test_state_gain_places_poles(dp1, p1, gap):
    poles = (p1, p1 - gap)
    K = place_state_gain(dp1, poles)
    eig = np.sort(np.linalg.eigvals(dp1.A_mat + np.outer(dp1.B_vec, K)).real)
    assert np.allclose(eig, np.sort(poles), rtol=1e-6, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(p1=st.floats(-20.0, -0.1), gap=st.floats(0.01, 10.0))
def test_observer_gain_places_poles(dp1, p1, gap):
    poles = (p1, p1 - gap)
    C = measured_output_row(dp1)
    L = place_observer_gain(dp1.A_mat, C, poles)
    eig = np.sort(np.linalg.eigvals(dp1.A_mat - np.outer(L, C)).real)
    assert np.allclose(eig, np.sort(poles), rtol=1e-6, atol=1e-8)


def test_unstable_poles_rejected(dp1):
    with pytest.raises(GainError):
        place_state_gain(dp1, (1.0, -2.0))


def test_hub_output_is_unobservable(dp1):
    with pytest.raises(GainError, match="not observable"):
        place_observer_gain(dp1.A_mat, dp1.C_row)


def test_n5_exact(design64, dp1):
    g = design64["g"]
    assert g.n5 == -1.0 / (2.0 * dp1.epsilon * dp1.R)
    assert g.n_dd == pytest.approx(-0.5)
    assert g.J == dp1.J


def test_c_acute_must_be_positive(design64):
    g = design64["g"]
    with pytest.raises(GainError):
        FeedbackGains(0.0, g.K, g.h, g.n1, g.n2, g.n3, g.n4, g.n5, g.N6, g.N7, g.n_dd,
                      g.G_fun, g.J)


def test_h_gain_endpoint_formulas(design64, dp1):
    ck, ik = design64["ck"], design64["ik"]
    hg = compute_h_gains(ik, ck, dp1)
    n, s, cJ = ck.n, dp1.sqrt_eps, dp1.c / dp1.J
    assert hg.h1 == pytest.approx(cJ - ik.rho.values[n, n] / s)
    assert hg.h3 == pytest.approx(ik.sigma.values[n, n] / s + cJ)
    assert hg.h4 == pytest.approx(-ik.sigma.values[n, 0] / s)
    assert hg.H6.shape == hg.H7.shape == (n + 1,)


def test_typeset_n4_differs_by_sqrt_eps(design64, dp1):
    g = design64["g"]
    p = printed_n_gains(design64["ck"], dp1, g.h, g.c_acute)
    assert p["n4"] / g.n4 == pytest.approx(1.0 / dp1.sqrt_eps)
    assert p["n1"] == pytest.approx(g.n1)
    assert p["n5"] == pytest.approx(g.n5)


def test_to_dict_round_trips_json(design64):
    import json
    d = json.loads(json.dumps(design64["g"].to_dict()))
    assert d["n5"] == design64["g"].n5
    assert len(d["N6"]) == design64["n"] + 1


def test_lqr_link1_stable_and_feedforward(dp1):
    lg = lqr_feedforward_gains(dp1)
    assert np.all(lg.closed_loop_eigs.real < 0)
    assert lg.k6 == pytest.approx(-dp1.c)
    assert lg.k5 == 0.0


def test_lqr_link2_surrogate_unavailable(dp2):
    with pytest.raises(GainError, match="b\\^2 < 6"):
        surrogate_model(dp2)


@pytest.mark.parametrize("Q,R", [(np.eye(3), 1.0), (-np.eye(4), 1.0), (np.eye(4), 0.0)])
def test_lqr_weight_validation(dp1, Q, R):
    with pytest.raises(GainError):
        lqr_feedforward_gains(dp1, Q, R)
