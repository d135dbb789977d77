"""Link-joint plant in Riemann variables, a displacement-form oracle, and the
maps between the two.

Orientation: x = 0 is the tip (mass m), x = 1 the hub.  xi travels towards
the tip and eta towards the hub, both at speed 1/sqrt(eps).  With
dt = sqrt(eps) h each characteristic crosses exactly one cell per step, so
transport is exact and only the source terms carry discretization error.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .params import DimensionlessParams
from .quadrature import cumtrapz, trapz


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class RiemannState:
    xi: np.ndarray
    eta: np.ndarray
    X: np.ndarray  # (x'_dot, x') tip velocity and position
    dtheta: float
    dtheta_dot: float
    t: float = 0.0

    @property
    def n(self) -> int:
        return self.xi.size - 1

    def replace(self, **kw) -> "RiemannState":
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True)
class DisplacementState:
    w: np.ndarray
    w_t: np.ndarray
    Phi: np.ndarray
    dtheta: float
    dtheta_dot: float
    t: float = 0.0
    w_hub0: float = 0.0  # hub displacement minus R dtheta, constant in time

    @property
    def n(self) -> int:
        return self.w.size - 1


def zero_state(n: int) -> RiemannState:
    z = np.zeros(n + 1)
    return RiemannState(z.copy(), z.copy(), np.zeros(2), 0.0, 0.0, 0.0)


def cfl_dt(dp: DimensionlessParams, n: int) -> float:
    return dp.sqrt_eps / n


@lru_cache(maxsize=64)
def _cosh_sinh(b: float, size: int):
    x = np.linspace(0.0, 1.0, size)
    c, s = np.cosh(b * x), np.sinh(b * x)
    c.flags.writeable = False
    s.flags.writeable = False
    return c, s


def cosh_convolution(f: np.ndarray, b: float, h: float) -> np.ndarray:
    """int_0^x cosh(b (x - y)) f(y) dy on the grid, via the cosh addition rule."""
    c, s = _cosh_sinh(float(b), f.size)
    return c * cumtrapz(c * f, h) - s * cumtrapz(s * f, h)


def nonlocal_term(xi: np.ndarray, eta: np.ndarray, dp: DimensionlessParams) -> np.ndarray:
    """(b^2/2) int_0^x cosh(b (x - y)) (xi - eta)(y) dy."""
    h = 1.0 / (xi.size - 1)
    return 0.5 * dp.b ** 2 * cosh_convolution(xi - eta, dp.b, h)


def reference_source(dp: DimensionlessParams, n: int) -> np.ndarray:
    """Spatial profile multiplying the reference acceleration: -eps (1 + R - x)."""
    return _reference_source(dp.epsilon, dp.R, n)


@lru_cache(maxsize=64)
def _reference_source(epsilon: float, R: float, n: int) -> np.ndarray:
    x = np.linspace(0.0, 1.0, n + 1)
    out = -epsilon * (1.0 + R - x)
    out.flags.writeable = False
    return out


def transport(xi, eta, S_xi, S_eta, h, S_xi_end=None, S_eta_end=None):
    """Advance both families one cell along their characteristics.

    ``S_*`` are the right-hand sides of sqrt(eps) u_t -/+ u_x = S at the start
    of the step.  Given the sources at the end of the step as well
    (``S_*_end``), the characteristic integral uses the trapezoid rule;
    otherwise it is explicit.  Boundary nodes (xi[n], eta[0]) are left for
    the caller.
    """
    xi_new = np.empty_like(xi)
    eta_new = np.empty_like(eta)
    if S_xi_end is None:
        xi_new[:-1] = xi[1:] + h * S_xi[1:]
        eta_new[1:] = eta[:-1] + h * S_eta[:-1]
    else:
        xi_new[:-1] = xi[1:] + 0.5 * h * (S_xi[1:] + S_xi_end[:-1])
        eta_new[1:] = eta[:-1] + 0.5 * h * (S_eta[:-1] + S_eta_end[1:])
    xi_new[-1] = xi[-1]
    eta_new[0] = eta[0]
    return xi_new, eta_new


def _rk4(f, y, t, dt):
    k1 = f(t, y)
    k2 = f(t + dt / 2, y + dt / 2 * k1)
    k3 = f(t + dt / 2, y + dt / 2 * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def joint_step(dtheta, dtheta_dot, U, dp, dt):
    """J dtheta'' = c dtheta' + U with U held over the step."""
    def f(_, y):
        return np.array([y[1], (dp.c * y[1] + U) / dp.J])
    y = _rk4(f, np.array([dtheta, dtheta_dot]), 0.0, dt)
    return float(y[0]), float(y[1])


def tip_step(X, xi0_old, xi0_new, theta_dd, dp, dt, injection=None):
    """X' = A X + B xi(0) + D thdd (+ injection(X)), xi(0) linear over the step."""
    A, B, D = dp.A_mat, dp.B_vec, dp.D_vec

    def f(tau, y):
        xi0 = xi0_old + (xi0_new - xi0_old) * (tau / dt)
        out = A @ y + B * xi0 + D * theta_dd
        if injection is not None:
            out = out + injection(y)
        return out
    return _rk4(f, np.asarray(X, float), 0.0, dt)


def step_riemann(s: RiemannState, U: float, theta_dd: float, dp: DimensionlessParams,
                 dt: float, freeze_joint: bool = False) -> RiemannState:
    """One CFL step: exact transport with the sources integrated by a
    predictor-corrector along each characteristic."""
    n = s.n
    h = 1.0 / n
    if not math.isclose(dt, dp.sqrt_eps * h, rel_tol=1e-12):
        raise SimulationError(f"CFL violation: dt={dt!r} but sqrt(eps) h={dp.sqrt_eps * h!r}")
    if freeze_joint:
        dth, dthd = s.dtheta, s.dtheta_dot
    else:
        dth, dthd = joint_step(s.dtheta, s.dtheta_dot, U, dp, dt)
    ref = reference_source(dp, n) * theta_dd
    S0 = nonlocal_term(s.xi, s.eta, dp) + ref
    xi, eta = transport(s.xi, s.eta, S0, S0, h)
    _close_boundaries(xi, eta, s, dthd, theta_dd, dp, dt)
    S1 = nonlocal_term(xi, eta, dp) + ref
    xi, eta = transport(s.xi, s.eta, S0, S0, h, S1, S1)
    X = _close_boundaries(xi, eta, s, dthd, theta_dd, dp, dt)
    if not freeze_joint:
        # R dtheta - w(1) is invariant; carry it over exactly instead of
        # letting the integrated joint angle drift away from the hub position
        dth = hub_consistent_dtheta(xi, eta, X, dp) + (
            s.dtheta - hub_consistent_dtheta(s.xi, s.eta, s.X, dp))
    out = RiemannState(xi, eta, X, dth, dthd, s.t + dt)
    if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(eta)) and np.all(np.isfinite(X))
            and np.isfinite(dth) and np.isfinite(dthd)):
        raise SimulationError(f"non-finite plant state at t={out.t:.6g}")
    return out


def _close_boundaries(xi, eta, s, dthd, theta_dd, dp, dt):
    """Tip ODE driven by the outgoing xi(0), then both incoming boundary values."""
    n = s.n
    X = tip_step(s.X, s.xi[0], xi[0], theta_dd, dp, dt)
    eta[0] = -xi[0] + dp.C_row @ X
    xi[n] = -eta[n] + 2.0 * dp.sqrt_eps * dp.R * dthd
    return X


def eta_t_hub(s: RiemannState, theta_dd: float, dp: DimensionlessParams,
              order: int = 1) -> float:
    """eta_t(1) from the eta equation evaluated at the hub."""
    n = s.n
    h = 1.0 / n
    F1 = nonlocal_term(s.xi, s.eta, dp)[n]
    return (-eta_x_hub(s.eta, h, order) + F1 - dp.epsilon * dp.R * theta_dd) / dp.sqrt_eps


def eta_x_hub(eta: np.ndarray, h: float, order: int = 1) -> float:
    if order == 1:
        return float((eta[-1] - eta[-2]) / h)
    if order == 2:
        return float((3 * eta[-1] - 4 * eta[-2] + eta[-3]) / (2 * h))
    raise ValueError("order must be 1 or 2")


def admissible_state(xi, eta, X, dp: DimensionlessParams, dtheta: float | None = None,
                     t: float = 0.0) -> RiemannState:
    """Build a state consistent with the boundary relations.

    The tip velocity is set from the tip relation and the joint rate from
    the hub relation.  The joint error defaults to the value implied by the
    hub displacement, R dtheta = x' + int_0^1 w_x dx; the plant conserves
    the difference between the two, so any other choice leaves a permanent
    offset in dtheta.
    """
    xi = np.asarray(xi, float).copy()
    eta = np.asarray(eta, float).copy()
    X = np.asarray(X, float).copy()
    s = dp.sqrt_eps
    X[0] = (xi[0] + eta[0]) / (2 * s)
    dthd = (xi[-1] + eta[-1]) / (2 * s * dp.R)
    if dtheta is None:
        dtheta = hub_consistent_dtheta(xi, eta, X, dp)
    return RiemannState(xi, eta, X, float(dtheta), float(dthd), t)


def hub_consistent_dtheta(xi, eta, X, dp: DimensionlessParams) -> float:
    h = 1.0 / (len(xi) - 1)
    return float((X[1] + 0.5 * trapz(np.asarray(xi) - np.asarray(eta), h)) / dp.R)


# --------------------------------------------------------------------------
# maps between Riemann and displacement variables


def displacement_from_riemann(rs: RiemannState, dp: DimensionlessParams) -> DisplacementState:
    h = 1.0 / rs.n
    s = dp.sqrt_eps
    w_t = (rs.xi + rs.eta) / (2 * s)
    w_x = 0.5 * (rs.xi - rs.eta)
    w = rs.X[1] + cumtrapz(w_x, h)
    Phi = reconstruct_phi(rs, dp)
    return DisplacementState(w, w_t, Phi, rs.dtheta, rs.dtheta_dot, rs.t,
                             w_hub0=float(w[-1] - dp.R * rs.dtheta))


def riemann_from_displacement(ds: DisplacementState, dp: DimensionlessParams) -> RiemannState:
    h = 1.0 / ds.n
    s = dp.sqrt_eps
    w_x = np.gradient(ds.w, h, edge_order=2)
    xi = s * ds.w_t + w_x
    eta = s * ds.w_t - w_x
    X = np.array([ds.w_t[0], ds.w[0]])
    return RiemannState(xi, eta, X, ds.dtheta, ds.dtheta_dot, ds.t)


def reconstruct_phi(rs: RiemannState, dp: DimensionlessParams) -> np.ndarray:
    """Phi(x) = -b int_0^x sinh(b (x - y)) w_y(y) dy with w_y = (xi - eta)/2."""
    n = rs.n
    h = 1.0 / n
    b = dp.b
    x = np.linspace(0.0, 1.0, n + 1)
    wy = 0.5 * (rs.xi - rs.eta)
    c, s = np.cosh(b * x), np.sinh(b * x)
    # sinh(b(x - y)) = sinh(bx) cosh(by) - cosh(bx) sinh(by)
    return -b * (s * cumtrapz(c * wy, h) - c * cumtrapz(s * wy, h))


def physical_outputs(rs: RiemannState, dp: DimensionlessParams, theta_d: float = 0.0) -> dict:
    """Joint error and link deflections at the tip (x = 0) and hub (x = 1).

    ``theta_d`` does not enter: deflections are relative to the moving frame.
    """
    h = 1.0 / rs.n
    w_tip = float(rs.X[1])
    w_hub = w_tip + 0.5 * trapz(rs.xi - rs.eta, h)
    v_tip = w_tip - (1.0 + dp.R) * rs.dtheta
    v_hub = w_hub - dp.R * rs.dtheta
    return {"dtheta": rs.dtheta, "v_tip": v_tip, "w_tip": w_tip, "v_hub": v_hub}


def deflection_profile(rs: RiemannState, dp: DimensionlessParams) -> np.ndarray:
    """upsilon(x) = w(x) - (1 + R - x) dtheta."""
    x = np.linspace(0.0, 1.0, rs.n + 1)
    w = rs.X[1] + cumtrapz(0.5 * (rs.xi - rs.eta), 1.0 / rs.n)
    return w - (1.0 + dp.R - x) * rs.dtheta


def h1_seminorm_sq(u: np.ndarray, h: float) -> float:
    """||u||^2 + ||u_x||^2 with the derivative by forward differences."""
    du = np.diff(u) / h
    return float(trapz(u * u, h) + h * np.sum(du * du))


def omega0(rs: RiemannState) -> float:
    h = 1.0 / rs.n
    return (rs.dtheta ** 2 + rs.dtheta_dot ** 2 + h1_seminorm_sq(rs.xi, h)
            + h1_seminorm_sq(rs.eta, h) + float(rs.X @ rs.X))


def energy(rs: RiemannState, dp: DimensionlessParams) -> float:
    """Kinetic plus bending energy of link and tip mass, plus joint kinetic
    energy; the shear coupling is left out, so this is a diagnostic only."""
    h = 1.0 / rs.n
    e_link = 0.25 * trapz(rs.xi ** 2 + rs.eta ** 2, h)
    return float(e_link + 0.5 * dp.m * rs.X[0] ** 2
                 + 0.5 * dp.J * rs.dtheta_dot ** 2)


# --------------------------------------------------------------------------
# displacement-form oracle


def _wave_accel(w, dp, theta_dd, h):
    """w_tt from eps w_tt = w_xx + b^2 int_0^x cosh(b(x-y)) w_y dy - eps (1+R-x) thdd,
    with the tip-mass relation m w_tt(0) = w_x(0) - m (1+R) thdd folded into a ghost node."""
    n = w.size - 1
    eps, m, R, b = dp.epsilon, dp.m, dp.R, dp.b
    x = np.linspace(0.0, 1.0, n + 1)
    wy = np.gradient(w, h, edge_order=2)
    a = np.zeros_like(w)
    lap = (w[2:] - 2 * w[1:-1] + w[:-2]) / h ** 2
    nl = b * b * cosh_convolution(wy, b, h)
    a[1:-1] = (lap + nl[1:-1]) / eps - (1.0 + R - x[1:-1]) * theta_dd
    a[0] = (2 * (w[1] - w[0]) / h ** 2 - (2 * m / h + eps) * (1.0 + R) * theta_dd) / (eps + 2 * m / h)
    return a


def step_wave_oracle(ds: DisplacementState, U: float, theta_dd: float,
                     dp: DimensionlessParams, dt: float) -> DisplacementState:
    """Velocity-Verlet step of the displacement form; the hub node follows the joint."""
    n = ds.n
    h = 1.0 / n
    if dt > dp.sqrt_eps * h * (1 + 1e-12):
        raise SimulationError(f"dt={dt!r} exceeds the stability bound sqrt(eps) h")
    dth, dthd = joint_step(ds.dtheta, ds.dtheta_dot, U, dp, dt)
    a0 = _wave_accel(ds.w, dp, theta_dd, h)
    v_half = ds.w_t + 0.5 * dt * a0
    w = ds.w + dt * v_half
    w[n] = ds.w_hub0 + dp.R * dth
    a1 = _wave_accel(w, dp, theta_dd, h)
    w_t = v_half + 0.5 * dt * a1
    w_t[n] = dp.R * dthd
    x = np.linspace(0.0, 1.0, n + 1)
    wy = np.gradient(w, h, edge_order=2)
    c, s = np.cosh(dp.b * x), np.sinh(dp.b * x)
    Phi = -dp.b * (s * cumtrapz(c * wy, h) - c * cumtrapz(s * wy, h))
    if not np.all(np.isfinite(w)) or np.abs(w).max() > 1e6 * max(1.0, np.abs(ds.w).max()):
        raise SimulationError(f"wave oracle unstable at t={ds.t + dt:.6g}")
    return DisplacementState(w, w_t, Phi, dth, dthd, ds.t + dt, ds.w_hub0)
