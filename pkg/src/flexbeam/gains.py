"""Gain synthesis: pole placement, dynamic-boundary gains h1..H7, original-state
gains n1..N7, observer injection gains, and the LQR baseline.

Conventions.  The h- and n-gains are kept at the scale of the boundary
relation written per unit joint inertia (so that ``n5 = -1/(2 eps R)``); the
control laws multiply by ``J`` to return the design input ``U``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_continuous_are

from .kernels import ControlKernels, InverseKernels, ObserverKernels, kernel_derivative
from .params import DimensionlessParams
from .quadrature import column_head_integral, cumtrapz, trapz

DEFAULT_STATE_POLES = (-2.0, -2.5)
DEFAULT_OBSERVER_POLES = (-6.0, -7.5)


class GainError(ValueError):
    pass


def _check_poles(poles):
    p = np.asarray(poles, dtype=complex).ravel()
    if p.size != 2:
        raise GainError("exactly two poles are required")
    if np.any(p.real >= 0):
        raise GainError(f"poles must have negative real parts, got {p}")
    if not np.allclose(np.sort_complex(p), np.sort_complex(p.conj())):
        raise GainError("poles must be closed under conjugation")
    return p


def _char_coeffs(p):
    # lambda^2 + a1 lambda + a0
    return float(np.real(-(p[0] + p[1]))), float(np.real(p[0] * p[1]))


def place_state_gain(dp: DimensionlessParams, poles=DEFAULT_STATE_POLES) -> np.ndarray:
    """K with eig(A + B K) equal to ``poles`` (companion form, closed form)."""
    p = _check_poles(poles)
    A, B = dp.A_mat, dp.B_vec
    ctrb = np.column_stack([B, A @ B])
    if abs(np.linalg.det(ctrb)) < 1e-14:
        raise GainError("(A, B) is not controllable")
    a1, a0 = _char_coeffs(p)
    # A + B K = [[(-s + K1)/m, K2/m], [1, 0]]: char poly lambda^2 - (K1 - s)/m lambda - K2/m
    K1 = dp.sqrt_eps - dp.m * a1
    K2 = -dp.m * a0
    return np.array([K1, K2])


def place_observer_gain(A: np.ndarray, C: np.ndarray, poles=DEFAULT_OBSERVER_POLES) -> np.ndarray:
    """L with eig(A - L C) equal to ``poles`` (Ackermann on the dual pair)."""
    p = _check_poles(poles)
    C = np.asarray(C, dtype=float).reshape(2)
    obs = np.vstack([C, C @ A])
    if abs(np.linalg.det(obs)) < 1e-12 * max(1.0, np.abs(obs).max() ** 2):
        raise GainError(f"(A, C) is not observable for C = {C}")
    a1, a0 = _char_coeffs(p)
    pA = A @ A + a1 * A + a0 * np.eye(2)
    return pA @ np.linalg.solve(obs, np.array([0.0, 1.0]))


@dataclass(frozen=True)
class HGains:
    h1: float
    h2: float
    h3: float
    h4: float
    h5: np.ndarray  # row
    H6: np.ndarray
    H7: np.ndarray


@dataclass(frozen=True)
class FeedbackGains:
    c_acute: float
    K: np.ndarray
    h: HGains
    n1: float
    n2: float
    n3: np.ndarray
    n4: float
    n5: float
    N6: np.ndarray
    N7: np.ndarray
    n_dd: float  # coefficient of the reference acceleration, from eta_t(1)
    G_fun: np.ndarray
    J: float

    def __post_init__(self):
        if not self.c_acute > 0:
            raise GainError(f"c_acute must be positive, got {self.c_acute}")

    def to_dict(self) -> dict:
        h = self.h
        return {
            "c_acute": self.c_acute, "K": self.K.tolist(), "J": self.J,
            "h1": h.h1, "h2": h.h2, "h3": h.h3, "h4": h.h4, "h5": h.h5.tolist(),
            "H6": h.H6.tolist(), "H7": h.H7.tolist(),
            "n1": self.n1, "n2": self.n2, "n3": self.n3.tolist(), "n4": self.n4,
            "n5": self.n5, "N6": self.N6.tolist(), "N7": self.N7.tolist(),
            "n_dd": self.n_dd, "G_fun": self.G_fun.tolist(),
        }


@dataclass(frozen=True)
class ObserverGains:
    Gamma_xi: np.ndarray
    Gamma_eta: np.ndarray
    L_x: np.ndarray
    C_meas: np.ndarray  # output row used for the X injection

    def to_dict(self) -> dict:
        return {"Gamma_xi": self.Gamma_xi.tolist(), "Gamma_eta": self.Gamma_eta.tolist(),
                "L_x": self.L_x.tolist(), "C_meas": self.C_meas.tolist()}


@dataclass(frozen=True)
class LqrGains:
    k1: float
    k2: float
    k3: float
    k4: float
    k5: float
    k6: float
    K_state: np.ndarray = field(repr=False, default=None)  # gain on (dtheta, dtheta_dot, x, x_dot)
    closed_loop_eigs: np.ndarray = field(repr=False, default=None)

    def as_array(self) -> np.ndarray:
        return np.array([self.k1, self.k2, self.k3, self.k4, self.k5, self.k6])

    def to_dict(self) -> dict:
        return {f"k{i + 1}": float(v) for i, v in enumerate(self.as_array())}


# --------------------------------------------------------------------------


def _cosh_conv_columns(M, x, b, h):
    """P[i, j] = int_{y_j}^{x_i} cosh(b (x_i - t)) M(t, y_j) dt."""
    c, s = np.cosh(b * x), np.sinh(b * x)
    Tc = column_head_integral(M * c[:, None], h)
    Ts = column_head_integral(M * s[:, None], h)
    return np.tril(c[:, None] * Tc - s[:, None] * Ts)


def _column_tail_weighted(M, w, h):
    """out[j] = int_{y_j}^1 M(z, y_j) w(z) dz by trapezoid."""
    G = np.tril(M * w[:, None])
    n = G.shape[0] - 1
    return h * (G.sum(axis=0) - 0.5 * np.diagonal(G) - 0.5 * G[n, :])


def _cosh_conv_vector(f, x, b, h):
    """g(x_i) = int_0^{x_i} cosh(b (x_i - z)) f(z) dz for a (n+1, m) array."""
    c, s = np.cosh(b * x), np.sinh(b * x)
    Ic = cumtrapz((f * c[:, None]).T, h).T
    Is = cumtrapz((f * s[:, None]).T, h).T
    return c[:, None] * Ic - s[:, None] * Is


def compute_h_gains(ik: InverseKernels, ck: ControlKernels, dp: DimensionlessParams,
                    K=None) -> HGains:
    if ik.n != ck.n:
        raise GainError(f"grid mismatch: inverse n={ik.n}, control n={ck.n}")
    K = ck.K if K is None else np.asarray(K, float)
    n = ck.n
    h = 1.0 / n
    x = np.linspace(0.0, 1.0, n + 1)
    s = dp.sqrt_eps
    b = dp.b
    cJ = dp.c / dp.J
    rho, sig, lam = ik.rho.values, ik.sigma.values, ik.lam
    rho1, sig1 = rho[n, :], sig[n, :]
    lam1 = lam[n]

    h1 = cJ - rho[n, n] / s
    h2 = rho[n, 0] / s + float(lam1 @ dp.B_vec)
    h3 = sig[n, n] / s + cJ
    h4 = -sig[n, 0] / s

    Lc = _cosh_conv_vector(lam, x, b, h)
    h5 = (0.5 * b * b / s) * trapz((sig1[:, None] * Lc).T, h) - cJ * lam1 \
        + lam1 @ (dp.A_mat + np.outer(dp.B_vec, K))

    chs = np.tril(np.cosh(b * (x[:, None] - x[None, :])))
    Prho = _cosh_conv_columns(rho, x, b, h)
    Psig = _cosh_conv_columns(sig, x, b, h)
    rho_y = kernel_derivative(ik.rho, "y")
    sig_y = kernel_derivative(ik.sigma, "y")
    H6 = -(0.5 * b * b / s) * _column_tail_weighted(Prho + chs, sig1, h) + cJ * rho1 + rho_y / s
    H7 = -(0.5 * b * b / s) * _column_tail_weighted(Psig - chs, sig1, h) - sig_y / s + cJ * sig1
    return HGains(float(h1), float(h2), float(h3), float(h4), np.asarray(h5), H6, H7)


def compute_n_gains(ck: ControlKernels, ik: InverseKernels, dp: DimensionlessParams,
                    hg: HGains, c_acute: float) -> FeedbackGains:
    n = ck.n
    if ik.n != n or hg.H6.size != n + 1:
        raise GainError("grid mismatch between kernels and h-gains")
    h = 1.0 / n
    x = np.linspace(0.0, 1.0, n + 1)
    s, R, b = dp.sqrt_eps, dp.R, dp.b
    k, l, g = ck.k.values, ck.l.values, ck.gamma
    w = 1.0 / (2.0 * s * R)
    ch = c_acute + hg.h1
    cosh1 = np.cosh(b * (1.0 - x))

    n1 = -w * ch
    n2 = -w * hg.h3
    n3 = -w * (ch * g[n] + hg.h2 * g[0] + hg.h4 * dp.C_row + hg.h5
               + trapz((hg.H6[:, None] * g).T, h))
    n4 = -w * (hg.h2 - hg.h4)
    n5 = -1.0 / (2.0 * dp.epsilon * R)
    N6 = w * (ch * k[n, :] + (0.5 * b * b / s) * cosh1 - hg.H6
              + _column_tail_weighted(k, hg.H6, h))
    N7 = w * (ch * l[n, :] - (0.5 * b * b / s) * cosh1 - hg.H7
              + _column_tail_weighted(l, hg.H6, h))
    # eta_t(1) carries -eps R thdd / sqrt(eps)
    n_dd = -w * dp.epsilon * R / s
    G_fun = s * (g @ dp.D_vec) - trapz_rows(k - l, h)
    return FeedbackGains(float(c_acute), np.asarray(ck.K, float), hg, float(n1), float(n2),
                         np.asarray(n3), float(n4), float(n5), N6, N7, float(n_dd), G_fun,
                         float(dp.J))


def trapz_rows(M, h):
    """int_0^{x_i} M(x_i, y) dy for a lower-triangular array."""
    full = M.sum(axis=1)
    out = h * (full - 0.5 * M[:, 0] - 0.5 * np.diagonal(M))
    out[0] = 0.0
    return out


def printed_n_gains(ck: ControlKernels, dp: DimensionlessParams, hg: HGains,
                    c_acute: float) -> dict:
    """n-gains exactly as the reference expressions are typeset (H7 inside n3
    and N6, H7 standing in for the undefined H8 in N7, eps instead of
    sqrt(eps) in n4).  Used only to report where the typeset form departs
    from the derived one."""
    n = ck.n
    h = 1.0 / n
    x = np.linspace(0.0, 1.0, n + 1)
    s, R, b = dp.sqrt_eps, dp.R, dp.b
    k, l, g = ck.k.values, ck.l.values, ck.gamma
    w = 1.0 / (2.0 * s * R)
    ch = c_acute + hg.h1
    cosh1 = np.cosh(b * (1.0 - x))
    return {
        "n1": -w * ch,
        "n2": -w * hg.h3,
        "n3": -w * (ch * g[n] + hg.h2 * g[0] + hg.h4 * dp.C_row + hg.h5
                    + trapz((hg.H7[:, None] * g).T, h)),
        "n4": -(hg.h2 - hg.h4) / (2.0 * dp.epsilon * R),
        "n5": -1.0 / (2.0 * dp.epsilon * R),
        "N6": w * (ch * k[n, :] + (0.5 * b * b / s) * cosh1 - hg.H7
                   + _column_tail_weighted(k, hg.H7, h)),
        "N7": w * (ch * l[n, :] - (0.5 * b * b / s) * cosh1 - hg.H7
                   + _column_tail_weighted(l, hg.H7, h)),
    }


def synthesize_feedback(ck: ControlKernels, ik: InverseKernels, dp: DimensionlessParams,
                        c_acute: float) -> FeedbackGains:
    K = ck.K
    eig = np.linalg.eigvals(dp.A_mat + np.outer(dp.B_vec, K))
    if np.any(eig.real >= 0):
        raise GainError(f"A + B K is not Hurwitz: eigenvalues {eig}")
    hg = compute_h_gains(ik, ck, dp, K)
    return compute_n_gains(ck, ik, dp, hg, c_acute)


def measured_output_row(dp: DimensionlessParams) -> np.ndarray:
    """Tip position x' = [0, 1] X, available from the strain and encoder signals."""
    return np.array([0.0, 1.0])


def compute_observer_gains(ok: ObserverKernels, dp: DimensionlessParams,
                           poles=DEFAULT_OBSERVER_POLES, C=None) -> ObserverGains:
    C = measured_output_row(dp) if C is None else np.asarray(C, float)
    L = place_observer_gain(dp.A_mat, C, poles)
    return ObserverGains(np.array(ok.psi.values[:, 0]), np.array(ok.phi.values[:, 0]), L, C)


# --------------------------------------------------------------------------
# LQR baseline on a lumped surrogate


def surrogate_model(dp: DimensionlessParams):
    """Four-state lumped model in z = (dtheta, dtheta_dot, x', x'_dot).

    The joint obeys J dtheta'' = c dtheta' + U.  The tip mass is tied to the
    hub through the static stiffness of the link: a static shear-coupled
    profile has slope ratio 1 - b^2 x^2 / 2, so the hub-to-tip deflection
    per unit tip slope is 1 - b^2/6.  The tip trace of xi, sqrt(eps) w_t(0) +
    w_x(0), is closed with the hub velocity standing in for w_t(0), which
    leaves a relative-velocity damper of strength sqrt(eps).
    """
    stiff = 1.0 - dp.b ** 2 / 6.0
    if stiff <= 0:
        raise GainError(f"lumped surrogate needs b^2 < 6, got b^2 = {dp.b ** 2:.4g}")
    ks = 1.0 / stiff
    s, m, R, J = dp.sqrt_eps, dp.m, dp.R, dp.J
    A = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [0.0, dp.c / J, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [ks * R / m, s * R / m, -ks / m, -s / m],
    ])
    B = np.array([[0.0], [1.0 / J], [0.0], [0.0]])
    return A, B


def lqr_feedforward_gains(dp: DimensionlessParams, state_weight=None,
                          control_weight=None) -> LqrGains:
    Q = np.eye(4) if state_weight is None else np.asarray(state_weight, float)
    Rw = 1.0 / dp.J ** 2 if control_weight is None else float(control_weight)
    if Q.shape != (4, 4) or not np.allclose(Q, Q.T):
        raise GainError("state weight must be a symmetric 4x4 matrix")
    if np.linalg.eigvalsh(Q).min() < -1e-12:
        raise GainError("state weight must be positive semidefinite")
    if not Rw > 0:
        raise GainError("control weight must be positive")
    A, B = surrogate_model(dp)
    try:
        P = solve_continuous_are(A, B, Q, np.array([[Rw]]))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise GainError(f"Riccati solve failed: {exc}") from exc
    Kz = (B.T @ P / Rw).ravel()  # U = -Kz z
    eig = np.linalg.eigvals(A - B @ Kz[None, :])
    # measured coordinates: x' = v(0) + (1 + R) dtheta
    r1 = 1.0 + dp.R
    k1 = -(Kz[0] + r1 * Kz[2])
    k2 = -(Kz[1] + r1 * Kz[3])
    k3 = -Kz[2]
    k4 = -Kz[3]
    # torque-level feedforward: cancel the damping seen by the reference velocity
    k5, k6 = 0.0, -dp.c
    return LqrGains(float(k1), float(k2), float(k3), float(k4), k5, float(k6), Kz, eig)
