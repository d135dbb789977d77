import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexbeam.gains import GainError
from flexbeam.harness import (LINK_COLUMNS, ROBOT_COLUMNS, LyapunovMonitor, Scenario,
                              ScenarioError, decay_fit, event_settling_times, export,
                              load_scenario, lyapunov_matrix, lyapunov_value, metrics,
                              monitor_constants, read_csv, reference_events, run_scenario,
                              settling_time)


def _quick(**kw):
    base = dict(n=32, horizon=1.0, time_scale=5.0, record_every=5)
    base.update(kw)
    return Scenario(**base)


# metrics and fits

def test_metrics_example():
    rmse, mae, me = metrics([3.0, -4.0])
    assert rmse == pytest.approx(math.sqrt(12.5))
    assert mae == pytest.approx(3.5)
    assert me == pytest.approx(4.0)


def test_metrics_against_reference():
    assert metrics([1.0, 2.0], [1.0, 2.0]) == (0.0, 0.0, 0.0)
    with pytest.raises(ValueError, match="length mismatch"):
        metrics([1.0, 2.0], [1.0])
    with pytest.raises(ValueError, match="empty"):
        metrics([])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6).filter(lambda v: v == 0 or abs(v) > 1e-100),
                min_size=1, max_size=50))
def test_metrics_ordering(values):
    # squares of the values must not underflow, hence the filter
    rmse, mae, me = metrics(values)
    assert mae <= rmse * (1 + 1e-12)
    assert rmse <= me * (1 + 1e-12)


def test_decay_fit_exact_exponential():
    t = np.linspace(0, 10, 101)
    rate, r2 = decay_fit(t, 3.0 * np.exp(-0.7 * t))
    assert rate == pytest.approx(0.7)
    assert r2 == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(rate=st.floats(-2.0, 2.0), amp=st.floats(1e-3, 1e3))
def test_decay_fit_recovers_rate(rate, amp):
    t = np.linspace(0, 5, 50)
    assert decay_fit(t, amp * np.exp(-rate * t))[0] == pytest.approx(rate, abs=1e-9)


def test_decay_fit_rejects_bad_input():
    t = np.linspace(0, 1, 10)
    with pytest.raises(ValueError):
        decay_fit(t, np.zeros(10))
    with pytest.raises(ValueError):
        decay_fit(t, np.ones(9))
    with pytest.raises(ValueError):
        decay_fit(t, np.ones(10), tail_fraction=0.0)


def test_settling_time_examples():
    t = np.arange(6.0)
    assert settling_time(t, [1.0, 0.5, 0.2, 0.01, 0.0, 0.0]) == 3.0
    assert settling_time(t, np.zeros(6)) == 0.0
    assert settling_time(t, [1.0, 0.0, 0.0, 0.0, 0.0, 1.0]) == math.inf
    assert settling_time(t, [9, 9, 1.0, 0.5, 0.01, 0.0], start=2.0) == 2.0


def test_event_settling_skips_truncated_segments():
    t = np.linspace(0, 10, 1001)
    y = np.where((t % 4) < 1, 1.0, 0.0)
    out = event_settling_times(t, y, [0.0, 4.0, 8.0], segment=4.0)
    assert out.size == 2
    assert np.allclose(out, 1.0, atol=0.02)


def test_reference_events():
    ev = reference_events(_quick(reference="square", horizon=12.0))
    assert np.allclose(ev, [5.0, 10.0])
    assert reference_events(_quick(reference="sinusoid")).size == 0


# Lyapunov monitor

def test_lyapunov_value_zero_and_unit(dp1, design64):
    n = design64["n"]
    P = lyapunov_matrix(dp1, design64["K"])
    z = np.zeros(n + 1)
    assert lyapunov_value(z, z, np.zeros(2), P, 1.0, 1.0, dp1.sqrt_eps) == 0.0
    assert lyapunov_value(z, z, np.array([1.0, 0.0]), P, 1.0, 1.0, dp1.sqrt_eps) == pytest.approx(P[0, 0])
    # a unit hub value alone contributes beta(1)^2 / 2 plus the weighted integral
    b = np.zeros(n + 1)
    b[-1] = 1.0
    v = lyapunov_value(b, z, np.zeros(2), P, 1.0, 0.0, dp1.sqrt_eps)
    assert v == pytest.approx(0.5)


def test_lyapunov_matrix_solves_equation(dp1, design64):
    K = design64["K"]
    P = lyapunov_matrix(dp1, K)
    Acl = dp1.A_mat + np.outer(dp1.B_vec, K)
    assert np.allclose(Acl.T @ P + P @ Acl, -np.eye(2), atol=1e-9)
    assert np.all(np.linalg.eigvalsh(P) > 0)
    with pytest.raises(GainError):
        lyapunov_matrix(dp1, np.array([10.0 * dp1.m, 0.0]))


def test_monitor_feasibility(design64, dp1):
    rep = monitor_constants(design64["ck"], design64["ik"], dp1, 0.5)
    assert rep["feasible"] is False
    assert rep["c_acute_min"] == pytest.approx(rep["h_acute"] * math.e / 2)
    big = monitor_constants(design64["ck"], design64["ik"], dp1, 2 * rep["c_acute_min"])
    assert big["feasible"] is True
    mon = LyapunovMonitor.build(design64["ck"], design64["ik"], dp1, 0.5)
    assert mon.report["alpha"] == rep["alpha"]


def test_lyapunov_column_decreases_in_tail():
    res = run_scenario(_quick(initial="smooth", horizon=2.0, lyapunov_every=5))
    V = res.links[0]["lyapunov"]
    V = V[np.isfinite(V)]
    assert V.size > 10
    assert np.all(np.diff(V[V.size // 2:]) <= 0)
    assert V[-1] < 1e-2 * V[0]


# scenarios

def test_zero_scenario_stays_zero():
    res = run_scenario(_quick())
    s = res.links[0]
    for col in ("dtheta", "v_tip", "w_tip", "U", "tau_m", "omega0", "energy"):
        assert np.all(s[col] == 0.0), col
    assert np.all(np.isnan(s["omega_e"]))
    assert np.all(np.isnan(s["xi_hat_tip"]))


def test_summary_fields():
    res = run_scenario(_quick(reference="sinusoid", horizon=1.5, buffer=0.5))
    link = res.summary["links"][0]
    assert set(link["probes"]) == {"0", "0.5"}
    for probe in link["probes"].values():
        assert set(probe) == {"RMSE", "MAE", "ME"}
    assert res.summary["schema_version"] == "1.0"
    assert res.summary["scenario_hash"] == res.scenario.digest()


def test_observer_columns_recorded():
    res = run_scenario(_quick(controller="backstepping-of", initial="smooth"))
    s = res.links[0]
    assert np.all(np.isfinite(s["omega_e"]))
    assert s["omega_e"][-1] < s["omega_e"][0]
    assert np.all(np.isfinite(s["X_hat_1"]))


def test_scenario_validation(tmp_path):
    with pytest.raises(ScenarioError):
        Scenario(controller="pid")
    with pytest.raises(ScenarioError):
        Scenario(reference="polar-square")
    with pytest.raises(ScenarioError):
        Scenario(links=("no_such_link",))
    with pytest.raises(ScenarioError, match="unknown scenario keys"):
        Scenario.from_dict({"bogus": 1})
    p = tmp_path / "sc.json"
    p.write_text(json.dumps({"n": 16, "controller": "lqr-ff"}))
    sc = load_scenario(p)
    assert sc.n == 16 and sc.controller == "lqr-ff"
    assert Scenario.from_dict(sc.to_dict()) == sc


def test_digest_is_stable_and_sensitive():
    a, b = _quick(), _quick()
    assert a.digest() == b.digest()
    assert a.digest() != _quick(n=64).digest()


def test_export_round_trip_and_determinism(tmp_path):
    sc = _quick(reference="sinusoid", initial="smooth")
    f1 = export(run_scenario(sc), tmp_path / "a")
    f2 = export(run_scenario(sc), tmp_path / "b")
    for a, b in zip(f1, f2):
        assert a.read_bytes() == b.read_bytes()
    data = read_csv(tmp_path / "a" / "link_0.csv")
    assert tuple(data) == LINK_COLUMNS
    res = run_scenario(sc)
    assert np.array_equal(data["U"], res.links[0]["U"])
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["scenario_hash"] == sc.digest()
    assert set(man["files"]) == {"link_0.csv", "summary.json"}


def test_lqr_on_link2_is_refused():
    with pytest.raises(GainError):
        run_scenario(_quick(links=("quanser_link2",), controller="lqr-ff"))


def test_two_link_polar_run(tmp_path):
    sc = Scenario(links=("quanser_link1", "quanser_link2"), reference="polar-sinusoid",
                  n=128, horizon=0.3, time_scale=50.0, buffer=0.0, record_every=20)
    res = run_scenario(sc)
    assert len(res.links) == 2
    assert set(res.robot) == set(ROBOT_COLUMNS)
    files = export(res, tmp_path)
    assert (tmp_path / "robot.csv") in files
    assert "robot" in res.summary
    assert res.summary["robot"]["r_err"]["ME"] < 0.05
