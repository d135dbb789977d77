"""Boundary observer and measurement assembly.

The observer is a copy of the plant driven by the measured boundary signals
xi(0), C X, dtheta_dot and the tip position, with output injection through
Gamma^xi, Gamma^eta and L_x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import cont2discrete

from .gains import ObserverGains
from .params import DimensionlessParams
from .plant import (RiemannState, SimulationError, h1_seminorm_sq, nonlocal_term,
                    reference_source, tip_step, transport)


@dataclass(frozen=True)
class ObserverState:
    xi_hat: np.ndarray
    eta_hat: np.ndarray
    X_hat: np.ndarray
    t: float = 0.0

    @property
    def n(self) -> int:
        return self.xi_hat.size - 1


def constant_observer(n: int, value: float = 1.0, X_hat=(0.0, 0.0)) -> ObserverState:
    v = np.full(n + 1, float(value))
    return ObserverState(v.copy(), v.copy(), np.asarray(X_hat, float), 0.0)


@dataclass(frozen=True)
class Measurements:
    theta: float
    E_b: float
    xi0: float
    CX: float
    dtheta: float
    dtheta_dot: float
    x_tip: float  # tip position x' = w(0)
    v_tip: float = 0.0
    v_tip_x: float = 0.0
    v_tip_t: float = 0.0
    theta_dot: float = 0.0
    warm: bool = True


def ideal_measurements(rs: RiemannState, dp: DimensionlessParams, theta_d: float = 0.0,
                       theta_d_dot: float = 0.0) -> Measurements:
    """Noise-free boundary signals read directly off the plant state."""
    s = dp.sqrt_eps
    r1 = 1.0 + dp.R
    v_tip = rs.X[1] - r1 * rs.dtheta
    v_tip_t = rs.X[0] - r1 * rs.dtheta_dot
    v_tip_x = 0.5 * (rs.xi[0] - rs.eta[0]) + rs.dtheta
    return Measurements(
        theta=theta_d + rs.dtheta, E_b=1.5 * dp.Lw * v_tip, xi0=float(rs.xi[0]),
        CX=float(dp.C_row @ rs.X), dtheta=rs.dtheta, dtheta_dot=rs.dtheta_dot,
        x_tip=float(rs.X[1]), v_tip=float(v_tip), v_tip_x=float(v_tip_x),
        v_tip_t=float(v_tip_t), theta_dot=theta_d_dot + rs.dtheta_dot,
    )


class FilteredDifferentiator:
    """Second-order low-pass omega_n^2/(s^2 + 2 zeta omega_n s + omega_n^2),
    bilinear-discretized, returning the filtered signal and its derivative."""

    def __init__(self, omega_n: float, zeta: float, dt: float):
        if omega_n <= 0 or zeta <= 0 or dt <= 0:
            raise ValueError("filter needs positive omega_n, zeta and dt")
        A = np.array([[0.0, 1.0], [-omega_n ** 2, -2 * zeta * omega_n]])
        B = np.array([[0.0], [omega_n ** 2]])
        C = np.eye(2)
        D = np.zeros((2, 1))
        self.Ad, self.Bd, self.Cd, self.Dd, _ = cont2discrete((A, B, C, D), dt, method="bilinear")
        self.z = np.zeros(2)
        self.warm = False

    def reset(self, value: float) -> None:
        """Start at rest on ``value`` (discrete steady state of the filter)."""
        self.z = np.linalg.solve(np.eye(2) - self.Ad, (self.Bd * value).ravel())
        self.warm = True

    def step(self, u: float) -> tuple[float, float]:
        if not self.warm:
            self.reset(u)
        y = self.Cd @ self.z + (self.Dd * u).ravel()
        self.z = self.Ad @ self.z + (self.Bd * u).ravel()
        return float(y[0]), float(y[1])


@dataclass
class SensorBank:
    """Encoder plus base strain gauge, with filtered differentiation."""

    dp: DimensionlessParams
    dt: float
    omega_n: float
    zeta: float = 0.9
    noise_theta: float = 0.0
    noise_strain: float = 0.0
    seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.theta_filter = FilteredDifferentiator(self.omega_n, self.zeta, self.dt)
        self.v_filter = FilteredDifferentiator(self.omega_n, self.zeta, self.dt)
        self._rng = np.random.default_rng(self.seed)
        self._started = False

    def measure(self, rs: RiemannState, theta_d: float, theta_d_dot: float) -> Measurements:
        dp = self.dp
        s = dp.sqrt_eps
        r1 = 1.0 + dp.R
        theta = theta_d + rs.dtheta
        v_true = rs.X[1] - r1 * rs.dtheta
        E_b = 1.5 * dp.Lw * v_true
        if self.noise_theta:
            theta += self._rng.normal(scale=self.noise_theta)
        if self.noise_strain:
            E_b += self._rng.normal(scale=self.noise_strain)
        v_tip = 2.0 * E_b / (3.0 * dp.Lw)
        v_tip_x = 4.0 * E_b / (3.0 * dp.Lw)
        warm = self._started
        if not self._started:
            self.theta_filter.reset(theta)
            self.v_filter.reset(v_tip)
            self._started = True
        _, theta_dot = self.theta_filter.step(theta)
        _, v_tip_t = self.v_filter.step(v_tip)
        dtheta = theta - theta_d
        dtheta_dot = theta_dot - theta_d_dot
        w_t0 = v_tip_t + r1 * dtheta_dot
        w_x0 = v_tip_x - dtheta
        return Measurements(
            theta=theta, E_b=E_b, xi0=s * w_t0 + w_x0, CX=2.0 * s * w_t0,
            dtheta=dtheta, dtheta_dot=dtheta_dot, x_tip=v_tip + r1 * dtheta,
            v_tip=v_tip, v_tip_x=v_tip_x, v_tip_t=v_tip_t, theta_dot=theta_dot, warm=warm,
        )


def strain_from_deflection(v_tip: float, Lw: float) -> float:
    return 1.5 * Lw * v_tip


def deflection_from_strain(E_b: float, Lw: float) -> float:
    return 2.0 * E_b / (3.0 * Lw)


def step_observer(os: ObserverState, m: Measurements, theta_dd: float, gains: ObserverGains,
                  dp: DimensionlessParams, dt: float,
                  m_next: Measurements | None = None) -> ObserverState:
    """Advance the observer one CFL step.

    ``m`` holds the signals at the start of the step and ``m_next`` those at
    its end (boundary values of the new state; defaults to ``m``).
    """
    n = os.n
    h = 1.0 / n
    if gains.Gamma_xi.size != n + 1:
        raise ValueError(f"grid mismatch: observer n={n}, gains n={gains.Gamma_xi.size - 1}")
    if not math.isclose(dt, dp.sqrt_eps * h, rel_tol=1e-12):
        raise SimulationError(f"CFL violation: dt={dt!r} but sqrt(eps) h={dp.sqrt_eps * h!r}")
    m_next = m if m_next is None else m_next
    ref = reference_source(dp, n) * theta_dd
    S0 = nonlocal_term(os.xi_hat, os.eta_hat, dp) + ref
    err0 = os.xi_hat[0] - m.xi0
    S0_xi, S0_eta = S0 - gains.Gamma_xi * err0, S0 - gains.Gamma_eta * err0
    X = _observer_tip(os, m, m_next, theta_dd, gains, dp, dt)
    # same predictor-corrector as the plant: the predictor closes its
    # boundaries with the observer's own copy of the plant relations and the
    # injection is held over the step, so the estimation error evolves
    # independently of the plant trajectory
    xi, eta = transport(os.xi_hat, os.eta_hat, S0_xi, S0_eta, h)
    Xp = tip_step(os.X_hat, os.xi_hat[0], xi[0], theta_dd, dp, dt)
    eta[0] = -xi[0] + dp.C_row @ Xp
    xi[n] = -eta[n] + 2.0 * dp.sqrt_eps * dp.R * m_next.dtheta_dot
    S1 = nonlocal_term(xi, eta, dp) + ref
    xi, eta = transport(os.xi_hat, os.eta_hat, S0_xi, S0_eta, h,
                        S1 - gains.Gamma_xi * err0, S1 - gains.Gamma_eta * err0)
    _observer_boundaries(xi, eta, m_next, dp)
    out = ObserverState(xi, eta, X, os.t + dt)
    if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(eta)) and np.all(np.isfinite(X))):
        raise SimulationError(f"non-finite observer state at t={out.t:.6g}")
    return out


def _observer_tip(os, m, m_next, theta_dd, gains, dp, dt):
    """Tip-state copy driven by the measured xi(0), linear over the step.  The
    tip-position injection is held at its start-of-step value, so the tip
    error obeys the same RK4 recursion whatever the plant does."""
    inj = -gains.L_x * (float(gains.C_meas @ os.X_hat) - m.x_tip)
    return tip_step(os.X_hat, m.xi0, m_next.xi0, theta_dd, dp, dt, injection=lambda _: inj)


def _observer_boundaries(xi, eta, m_next, dp):
    eta[0] = -m_next.xi0 + m_next.CX
    xi[-1] = -eta[-1] + 2.0 * dp.sqrt_eps * dp.R * m_next.dtheta_dot


def observer_error_norm(os: ObserverState, rs: RiemannState) -> dict:
    if os.n != rs.n:
        raise ValueError("grid mismatch between observer and plant")
    h = 1.0 / rs.n
    dxi = os.xi_hat - rs.xi
    deta = os.eta_hat - rs.eta
    dX = os.X_hat - rs.X
    parts = {"xi": h1_seminorm_sq(dxi, h), "eta": h1_seminorm_sq(deta, h),
             "X": float(dX @ dX)}
    parts["total"] = parts["xi"] + parts["eta"] + parts["X"]
    return parts
