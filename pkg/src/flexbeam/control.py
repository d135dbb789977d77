"""Control laws for one link-joint.

All backstepping laws return the design input U of the joint equation
J dtheta'' = c dtheta' + U.  The motor torque follows from ``torque_from_u``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gains import FeedbackGains, LqrGains
from .kernels import ControlKernels, InverseKernels
from .params import DimensionlessParams
from .plant import (RiemannState, admissible_state, eta_t_hub, eta_x_hub, nonlocal_term,
                    reference_source)
from .quadrature import trapz, volterra_apply


@dataclass(frozen=True)
class ControlCommand:
    U: float
    tau_m: float
    source: str


def _match(n_state, n_kernel):
    if n_state != n_kernel:
        raise ValueError(f"grid mismatch: state n={n_state}, kernels n={n_kernel}")


def backstepping_transform(rs: RiemannState, ck: ControlKernels) -> np.ndarray:
    """beta = xi + gamma X - int k xi - int l eta."""
    _match(rs.n, ck.n)
    h = 1.0 / rs.n
    return (rs.xi + ck.gamma @ rs.X - volterra_apply(ck.k.values, rs.xi, h)
            - volterra_apply(ck.l.values, rs.eta, h))


def inverse_transform(beta: np.ndarray, eta: np.ndarray, X: np.ndarray,
                      ik: InverseKernels) -> np.ndarray:
    """xi = beta - lambda X + int rho beta + int sigma eta."""
    _match(beta.size - 1, ik.n)
    h = 1.0 / ik.n
    return (beta - ik.lam @ X + volterra_apply(ik.rho.values, beta, h)
            + volterra_apply(ik.sigma.values, eta, h))


def state_feedback_u(rs: RiemannState, g: FeedbackGains, theta_dd: float = 0.0,
                     eta_x_order: int = 1) -> float:
    """Explicit law in the original states."""
    _match(rs.n, g.N6.size - 1)
    h = 1.0 / rs.n
    xi, eta = rs.xi, rs.eta
    v = (g.n1 * xi[-1] + g.n2 * eta[-1] + float(g.n3 @ rs.X) + g.n4 * xi[0]
         + g.n5 * eta_x_hub(eta, h, eta_x_order)
         + trapz(g.N6 * xi, h) + trapz(g.N7 * eta, h) + g.n_dd * theta_dd)
    return g.J * v


def u_via_target(rs: RiemannState, ck: ControlKernels, ik: InverseKernels,
                 g: FeedbackGains, dp: DimensionlessParams, theta_dd: float = 0.0,
                 eta_t1: float | None = None, eta_x_order: int = 1) -> float:
    """Law that imposes beta_t(1) = -c_acute beta(1) on the transformed state."""
    _match(rs.n, ck.n)
    h = 1.0 / rs.n
    beta = backstepping_transform(rs, ck)
    if eta_t1 is None:
        eta_t1 = eta_t_hub(rs, theta_dd, dp, eta_x_order)
    hg = g.h
    bracket = (-(g.c_acute + hg.h1) * beta[-1] + eta_t1 - hg.h2 * beta[0]
               - hg.h3 * rs.eta[-1] - hg.h4 * rs.eta[0] - trapz(hg.H6 * beta, h)
               - float(hg.h5 @ rs.X) - trapz(hg.H7 * rs.eta, h))
    return g.J * bracket / (2.0 * dp.sqrt_eps * dp.R)


def beta_t_hub_direct(rs: RiemannState, U: float, ck: ControlKernels,
                      dp: DimensionlessParams, theta_dd: float = 0.0) -> float:
    """beta_t(1) computed from the plant right-hand sides and the forward kernels.

    Independent of the h-gains: xi_t and eta_t come from the transport
    equations with spatial derivatives by finite differences, the hub value
    xi_t(1) from differentiating the hub relation, and X' from its ODE.
    """
    n = rs.n
    h = 1.0 / n
    s = dp.sqrt_eps
    S = nonlocal_term(rs.xi, rs.eta, dp) + reference_source(dp, n) * theta_dd
    xi_x = np.gradient(rs.xi, h, edge_order=2)
    eta_x = np.gradient(rs.eta, h, edge_order=2)
    xi_t = (xi_x + S) / s
    eta_t = (-eta_x + S) / s
    dthdd = (dp.c * rs.dtheta_dot + U) / dp.J
    xi_t1 = -eta_t[-1] + 2 * s * dp.R * dthdd
    Xdot = dp.A_mat @ rs.X + dp.B_vec * rs.xi[0] + dp.D_vec * theta_dd
    return float(xi_t1 + ck.gamma[-1] @ Xdot - trapz(ck.k.values[n] * xi_t, h)
                 - trapz(ck.l.values[n] * eta_t, h))


def output_feedback_u(xi_hat, eta_hat, X_hat, xi0_measured: float, g: FeedbackGains,
                      theta_dd: float = 0.0, eta_x_order: int = 1) -> float:
    """Explicit law on observer states, with the measured xi(0) in the n4 term."""
    xi_hat = np.asarray(xi_hat, float)
    eta_hat = np.asarray(eta_hat, float)
    _match(xi_hat.size - 1, g.N6.size - 1)
    h = 1.0 / (xi_hat.size - 1)
    v = (g.n1 * xi_hat[-1] + g.n2 * eta_hat[-1] + float(g.n3 @ X_hat) + g.n4 * xi0_measured
         + g.n5 * eta_x_hub(eta_hat, h, eta_x_order)
         + trapz(g.N6 * xi_hat, h) + trapz(g.N7 * eta_hat, h) + g.n_dd * theta_dd)
    return g.J * v


def torque_from_u(U: float, theta_d_dot: float, theta_d_ddot: float,
                  dp: DimensionlessParams, dotted: bool = True,
                  theta_d: float = 0.0) -> float:
    """tau = U + J thdd_d - c thd_d.  ``dotted=False`` uses theta_d in the damping term."""
    damp = theta_d_dot if dotted else theta_d
    return U + dp.J * theta_d_ddot - dp.c * damp


def u_from_torque(tau: float, theta_d_dot: float, theta_d_ddot: float,
                  dp: DimensionlessParams) -> float:
    return tau - dp.J * theta_d_ddot + dp.c * theta_d_dot


def saturate(tau: float, limit: float | None) -> float:
    if limit is None:
        return tau
    return float(np.clip(tau, -limit, limit))


def lqr_ff_u(dtheta: float, dtheta_dot: float, v_tip: float, v_tip_dot: float,
             lg: LqrGains, theta_d: float = 0.0, theta_d_dot: float = 0.0) -> float:
    """k1 dtheta + k2 dtheta' + k3 v(0) + k4 v_t(0) + k5 theta_d + k6 theta_d'.

    The value is a motor torque; convert with ``u_from_torque`` to drive the plant.
    """
    return (lg.k1 * dtheta + lg.k2 * dtheta_dot + lg.k3 * v_tip + lg.k4 * v_tip_dot
            + lg.k5 * theta_d + lg.k6 * theta_d_dot)


def u_equivalence_check(states, ck, ik, g, dp, theta_dd: float = 0.0) -> dict:
    """Compare the explicit law and the transformed-state law on a batch of states."""
    rel = []
    for rs in states:
        a = state_feedback_u(rs, g, theta_dd)
        b = u_via_target(rs, ck, ik, g, dp, theta_dd)
        rel.append(abs(a - b) / max(abs(b), 1e-300))
    rel = np.asarray(rel)
    return {"max_rel": float(rel.max()), "mean_rel": float(rel.mean()), "count": int(rel.size)}


def random_admissible_states(n: int, dp: DimensionlessParams, count: int, seed: int = 0,
                             modes: int = 4):
    """Smooth random states (low-order sine/cosine series) satisfying both
    boundary relations."""
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, 1.0, n + 1)
    out = []
    for _ in range(count):
        a = rng.normal(size=(4, modes)) / (1.0 + np.arange(modes))
        basis_s = np.array([np.sin(np.pi * (q + 1) * x) for q in range(modes)])
        basis_c = np.array([np.cos(np.pi * q * x) for q in range(modes)])
        xi = a[0] @ basis_s + a[1] @ basis_c
        eta = a[2] @ basis_s + a[3] @ basis_c
        X = rng.normal(size=2)
        out.append(admissible_state(xi, eta, X, dp))
    return out
