import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexbeam.trajectory import (KinematicsError, PolarReference, ReferenceProfile,
                                 SecondOrderSmoother, forward_kinematics, ik_residual_report,
                                 inverse_kinematics, polar_joint_profiles, raw_waveform,
                                 reference_bounds, reference_series, square_accel_peak,
                                 theta_ref, with_amplitude)

L1, L2 = 0.195, 0.15


def test_raw_waveforms():
    t = np.array([0.0, 1.25, 2.5, 3.75])
    assert np.allclose(raw_waveform("sinusoid", 2.0, 0.2, t), 2 * np.sin(0.4 * np.pi * t))
    assert raw_waveform("square", 1.0, 0.1, np.array([1.0, 6.0])).tolist() == [1.0, -1.0]
    saw = raw_waveform("sawtooth", 1.0, 0.2, np.array([0.0, 1.0, 2.4]))
    assert np.allclose(saw, [0.0, 0.2, 0.48])
    assert np.all(raw_waveform("zero", 1.0, 1.0, t) == 0)
    with pytest.raises(ValueError):
        raw_waveform("triangle", 1.0, 1.0, t)


def test_profile_validation():
    with pytest.raises(ValueError):
        ReferenceProfile(kind="polar-square")
    with pytest.raises(ValueError):
        ReferenceProfile(frequency=0.0)
    assert ReferenceProfile(frequency=0.5).filter_omega == pytest.approx(20 * math.pi)


def test_unsmoothed_sinusoid_derivatives_scale_with_time():
    ts = 10.0
    p = ReferenceProfile(kind="sinusoid", amplitude=1.0, frequency=0.5, time_scale=ts,
                         smoothing=False)
    t = np.linspace(0, 20, 201)
    out = reference_series(p, t)
    w = math.pi
    assert np.allclose(out[:, 0], np.sin(w * t / ts))
    assert np.allclose(out[:, 1], w / ts * np.cos(w * t / ts))
    assert np.allclose(out[:, 2], -(w / ts) ** 2 * np.sin(w * t / ts))


def test_smoothed_square_is_bounded():
    p = ReferenceProfile(kind="square", amplitude=0.6, frequency=0.1, time_scale=1.0)
    t = np.linspace(0, 20, 20001)
    b = reference_bounds(reference_series(p, t))
    assert b["theta_max"] <= 0.6 * 1.01
    assert b["theta_ddot_max"] <= square_accel_peak(0.6, p.filter_omega)


def test_smoothed_sinusoid_tracks_raw():
    p = ReferenceProfile(kind="sinusoid", amplitude=1.0, frequency=0.2, time_scale=1.0)
    t = np.linspace(0, 10, 10001)
    err = reference_series(p, t)[:, 0] - np.sin(0.4 * np.pi * t)
    # a second-order filter at 20x the signal frequency lags by about 2 zeta / 20 rad
    assert np.abs(err).max() < 0.1


def test_smoother_step_response_settles():
    f = SecondOrderSmoother(10.0, 0.9, 1e-3)
    for _ in range(5000):
        f.step(1.0)
    assert f.z[0] == pytest.approx(1.0, abs=1e-8)


def test_theta_ref_matches_series():
    p = ReferenceProfile(kind="sinusoid", amplitude=0.5, frequency=0.2, time_scale=1.0)
    th = theta_ref(p, 1.3)
    assert th[0] == pytest.approx(0.5 * math.sin(0.4 * math.pi * 1.3), abs=0.05)
    with pytest.raises(ValueError):
        theta_ref(p, -1.0)


def test_zero_amplitude_gives_zero():
    p = with_amplitude(ReferenceProfile(), 0.0)
    assert np.all(reference_series(p, np.linspace(0, 1, 5)) == 0)


@settings(max_examples=60, deadline=None)
@given(phi=st.floats(-math.pi / 2, math.pi / 2))
def test_unit_case_arctan(phi):
    r = math.sqrt(L1 ** 2 + L2 ** 2)
    th1, th2 = inverse_kinematics(r, phi, L1, L2, "arctan")
    assert float(th2) == 0.0
    assert float(th1) == pytest.approx(phi, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(frac=st.floats(0.01, 0.99), phi=st.floats(-3.0, 3.0))
def test_arccos_is_exact_inverse(frac, phi):
    r = abs(L1 - L2) + frac * (L1 + L2 - abs(L1 - L2))
    th1, th2 = inverse_kinematics(r, phi, L1, L2, "arccos")
    rf, pf = forward_kinematics(th1, th2, L1, L2)
    assert float(rf) == pytest.approx(r, abs=1e-12)
    assert abs(math.remainder(float(pf) - phi, 2 * math.pi)) < 1e-12


def test_forward_kinematics_straight_arm():
    r, phi = forward_kinematics(0.3, 0.0, L1, L2)
    assert float(r) == pytest.approx(L1 + L2)
    assert float(phi) == pytest.approx(0.3)
    # a transverse tip deflection of the outer link rotates and lengthens the arm
    r2, _ = forward_kinematics(0.0, 0.0, L1, L2, v2=0.01)
    assert float(r2) == pytest.approx(math.hypot(L1 + L2, 0.01))


def test_unreachable_radius():
    with pytest.raises(KinematicsError):
        inverse_kinematics(L1 + L2 + 0.1, 0.0, L1, L2)
    with pytest.raises(ValueError):
        inverse_kinematics(0.2, 0.0, L1, L2, "atan2")


@pytest.mark.parametrize("kind", ["polar-sinusoid", "polar-square", "polar-sawtooth"])
def test_polar_profiles_and_residual_report(kind):
    pref = PolarReference(kind, L1, L2)
    t = np.linspace(0, pref.period, 501)
    r, _ = pref(t)
    assert r.min() >= pref.r1 - pref.r2 - 1e-12
    assert r.max() <= pref.r1 + pref.r2 + 1e-12
    rep = ik_residual_report(pref, t)
    assert rep["arccos"]["max_radius_residual"] < 1e-12
    assert rep["arctan"]["max_radius_residual"] > 1e-3


def test_polar_joint_profiles_shapes():
    pref = PolarReference("polar-sinusoid", L1, L2)
    t = np.linspace(0, 100, 1001)
    a, b = polar_joint_profiles(pref, t, 20.0, 20 * 2 * math.pi / 5)
    assert a.shape == b.shape == (1001, 3)
    assert np.all(np.isfinite(a)) and np.all(np.isfinite(b))
    with pytest.raises(ValueError):
        PolarReference("polar-circle", L1, L2)
