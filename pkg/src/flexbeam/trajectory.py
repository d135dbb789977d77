"""Reference trajectories, smoothing, and two-link kinematics.

Profiles are written in dimensional seconds.  ``time_scale`` converts to
simulation time, t_sim = t_sec * time_scale, and the returned derivatives are
taken with respect to simulation time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm

JOINT_KINDS = ("sinusoid", "square", "sawtooth", "zero")
POLAR_KINDS = ("polar-sinusoid", "polar-square", "polar-sawtooth")


class KinematicsError(ValueError):
    pass


@dataclass(frozen=True)
class ReferenceProfile:
    kind: str = "sinusoid"
    amplitude: float = 40 * math.pi / 180
    frequency: float = 0.2  # Hz
    omega_n: float | None = None  # smoothing filter [rad/s]; None = 20 x 2 pi f
    zeta: float = 0.9
    time_scale: float = 1797.07  # simulation time units per second
    smoothing: bool = True
    prewarm: bool = True

    def __post_init__(self):
        if self.kind not in JOINT_KINDS:
            raise ValueError(f"unknown joint profile {self.kind!r}; expected one of {JOINT_KINDS}")
        if self.frequency <= 0 or self.time_scale <= 0:
            raise ValueError("frequency and time_scale must be positive")

    @property
    def filter_omega(self) -> float:
        return self.omega_n if self.omega_n is not None else 20 * 2 * math.pi * self.frequency


def raw_waveform(kind: str, amplitude: float, frequency: float, t_sec):
    """Unsmoothed joint profile in seconds."""
    t = np.asarray(t_sec, dtype=float)
    ft = frequency * t
    if kind == "sinusoid":
        return amplitude * np.sin(2 * math.pi * ft)
    if kind == "square":
        return amplitude * np.sign(np.sin(2 * math.pi * ft))
    if kind == "sawtooth":
        return amplitude * (ft - np.floor(ft + 0.5))
    if kind == "zero":
        return np.zeros_like(t)
    raise ValueError(f"unknown waveform {kind!r}")


class SecondOrderSmoother:
    """y'' = w^2 (u - y) - 2 zeta w y' stepped exactly for piecewise-constant u."""

    def __init__(self, omega_n: float, zeta: float, dt: float):
        A = np.array([[0.0, 1.0], [-omega_n ** 2, -2 * zeta * omega_n]])
        M = np.zeros((3, 3))
        M[:2, :2] = A
        M[1, 2] = omega_n ** 2
        E = expm(M * dt)
        self.Phi = E[:2, :2]
        self.Gam = E[:2, 2]
        self.w = omega_n
        self.zeta = zeta
        self.z = np.zeros(2)

    def reset(self, value: float):
        self.z = np.array([value, 0.0])

    def accel(self, u: float) -> float:
        return self.w ** 2 * (u - self.z[0]) - 2 * self.zeta * self.w * self.z[1]

    def step(self, u: float):
        self.z = self.Phi @ self.z + self.Gam * u


def smooth_series(raw_fn, t_sec: np.ndarray, omega_n: float, zeta: float,
                  prewarm_sec: float = 0.0) -> np.ndarray:
    """Filter a raw signal sampled on a uniform grid; returns (N, 3) value, rate, accel
    in seconds.  The input is held at its left-endpoint value over each step."""
    t_sec = np.asarray(t_sec, float)
    dt = t_sec[1] - t_sec[0] if t_sec.size > 1 else 1.0
    f = SecondOrderSmoother(omega_n, zeta, dt)
    if prewarm_sec > 0:
        k0 = int(math.ceil(prewarm_sec / dt))
        tw = t_sec[0] - dt * np.arange(k0, 0, -1)
        uw = raw_fn(tw)
        f.reset(float(uw[0]))
        for u in uw:
            f.step(float(u))
    else:
        f.reset(float(raw_fn(t_sec[:1])[0]))
    u = raw_fn(t_sec)
    out = np.empty((t_sec.size, 3))
    for k, uk in enumerate(u):
        out[k] = (f.z[0], f.z[1], f.accel(float(uk)))
        f.step(float(uk))
    return out


def reference_series(p: ReferenceProfile, t_sim: np.ndarray) -> np.ndarray:
    """(theta_d, theta_d_dot, theta_d_ddot) on a uniform simulation-time grid."""
    t_sim = np.asarray(t_sim, float)
    ts = p.time_scale
    t_sec = t_sim / ts

    def raw(t):
        return raw_waveform(p.kind, p.amplitude, p.frequency, t)

    if p.kind == "zero" or p.amplitude == 0:
        return np.zeros((t_sim.size, 3))
    if not p.smoothing:
        return _analytic_raw(p, t_sec) * np.array([1.0, 1.0 / ts, 1.0 / ts ** 2])
    pre = 1.0 / p.frequency if p.prewarm else 0.0
    out = smooth_series(raw, t_sec, p.filter_omega, p.zeta, pre)
    return out * np.array([1.0, 1.0 / ts, 1.0 / ts ** 2])


def _analytic_raw(p, t_sec):
    """Raw profile with its classical derivatives (zero across jumps)."""
    w = 2 * math.pi * p.frequency
    A = p.amplitude
    if p.kind == "sinusoid":
        return np.column_stack([A * np.sin(w * t_sec), A * w * np.cos(w * t_sec),
                                -A * w * w * np.sin(w * t_sec)])
    val = raw_waveform(p.kind, A, p.frequency, t_sec)
    rate = np.full_like(t_sec, A * p.frequency) if p.kind == "sawtooth" else np.zeros_like(t_sec)
    return np.column_stack([val, rate, np.zeros_like(t_sec)])


def theta_ref(p: ReferenceProfile, t: float, steps_per_period: int = 2000):
    """Reference at one simulation time, integrating the smoother from t = 0."""
    if t < 0:
        raise ValueError("t must be non-negative")
    dt = p.time_scale / (p.frequency * steps_per_period)
    k = max(1, int(math.ceil(t / dt)))
    grid = np.linspace(0.0, max(t, dt), k + 1)
    row = reference_series(p, grid)[-1 if t > 0 else 0]
    return float(row[0]), float(row[1]), float(row[2])


def square_accel_peak(amplitude: float, omega_n: float) -> float:
    """Largest |y''| of the smoother for a jump of 2 * amplitude from rest (seconds)."""
    return 2 * amplitude * omega_n ** 2


# --------------------------------------------------------------------------
# polar tip references


@dataclass(frozen=True)
class PolarReference:
    kind: str
    L1: float
    L2: float
    phi_amplitude: float = 35 * math.pi / 180

    def __post_init__(self):
        if self.kind not in POLAR_KINDS:
            raise ValueError(f"unknown polar profile {self.kind!r}")

    @property
    def r1(self) -> float:
        return (self.L1 + self.L2) * (2 + math.sqrt(3)) / 4

    @property
    def r2(self) -> float:
        return (self.L1 + self.L2) * (2 - math.sqrt(3)) / 4

    def __call__(self, t_sec):
        t = np.asarray(t_sec, float)
        a = self.phi_amplitude
        if self.kind == "polar-sinusoid":
            r = self.r1 + self.r2 * np.cos(1.2 * math.pi * t)
            phi = a * np.sin(0.4 * math.pi * t)
        elif self.kind == "polar-square":
            r = self.r1 + self.r2 * np.sign(np.cos(0.4 * math.pi * t))
            phi = a * np.sign(np.sin(0.2 * math.pi * t))
        else:
            r = self.r1 + self.r2 * (np.floor(0.4 * t + 0.5) - 0.4 * t)
            phi = a * (0.2 * t - np.floor(0.2 * t + 0.5))
        return r, phi

    @property
    def period(self) -> float:
        return {"polar-sinusoid": 5.0, "polar-square": 10.0, "polar-sawtooth": 5.0}[self.kind]


def inverse_kinematics(r_d, phi_d, L1: float, L2: float, variant: str = "arctan"):
    """Joint angles for a tip at polar (r_d, phi_d).

    ``variant="arctan"`` (default) takes the elbow angle as the arctangent of the
    law-of-cosines ratio; ``variant="arccos"`` takes its arccosine, which is
    the exact inverse of ``forward_kinematics``.
    """
    r = np.asarray(r_d, float)
    if np.any(r < abs(L1 - L2) - 1e-12) or np.any(r > L1 + L2 + 1e-12):
        raise KinematicsError(f"r_d outside the reachable annulus [{abs(L1 - L2)}, {L1 + L2}]")
    ratio = (r ** 2 - L1 ** 2 - L2 ** 2) / (2 * L1 * L2)
    if variant == "arctan":
        th2 = np.arctan(ratio)
    elif variant == "arccos":
        th2 = np.arccos(np.clip(ratio, -1.0, 1.0))
    else:
        raise ValueError("variant must be 'arctan' or 'arccos'")
    th1 = np.asarray(phi_d, float) - np.arctan(L2 * np.sin(th2) / (L1 + L2 * np.cos(th2)))
    return th1, th2


def forward_kinematics(th1, th2, L1: float, L2: float, v1=0.0, v2=0.0):
    """Tip polar coordinates of the planar chain; ``v1``, ``v2`` are transverse
    tip deflections of each link in its own frame."""
    th1 = np.asarray(th1, float)
    a2 = th1 + np.asarray(th2, float)
    x = L1 * np.cos(th1) - v1 * np.sin(th1) + L2 * np.cos(a2) - v2 * np.sin(a2)
    y = L1 * np.sin(th1) + v1 * np.cos(th1) + L2 * np.sin(a2) + v2 * np.cos(a2)
    return np.hypot(x, y), np.arctan2(y, x)


def ik_residual_report(pref: PolarReference, t_sec) -> dict:
    """Forward-kinematics radius residual of both IK variants along a profile."""
    r, phi = pref(t_sec)
    out = {}
    for variant in ("arctan", "arccos"):
        th1, th2 = inverse_kinematics(r, phi, pref.L1, pref.L2, variant)
        rf, pf = forward_kinematics(th1, th2, pref.L1, pref.L2)
        dphi = np.angle(np.exp(1j * (pf - phi)))
        out[variant] = {"max_radius_residual": float(np.abs(rf - r).max()),
                        "max_angle_residual": float(np.abs(dphi).max())}
    return out


def polar_joint_profiles(pref: PolarReference, t_sim: np.ndarray, time_scale: float,
                         omega_n: float, zeta: float = 0.9, variant: str = "arctan",
                         smoothing: bool = True):
    """Joint references (two (N, 3) arrays) for a polar tip profile."""
    t_sim = np.asarray(t_sim, float)
    series = []
    for j in range(2):
        def raw(t, j=j):
            r, phi = pref(t)
            return inverse_kinematics(r, phi, pref.L1, pref.L2, variant)[j]
        if smoothing:
            s = smooth_series(raw, t_sim / time_scale, omega_n, zeta, pref.period)
        else:
            s = np.column_stack([raw(t_sim / time_scale), np.zeros((t_sim.size, 2))])
        series.append(s * np.array([1.0, 1.0 / time_scale, 1.0 / time_scale ** 2]))
    return series[0], series[1]


def reference_bounds(series: np.ndarray) -> dict:
    return {"theta_max": float(np.abs(series[:, 0]).max()),
            "theta_dot_max": float(np.abs(series[:, 1]).max()),
            "theta_ddot_max": float(np.abs(series[:, 2]).max())}


def with_amplitude(p: ReferenceProfile, amplitude: float) -> ReferenceProfile:
    return replace(p, amplitude=amplitude)
