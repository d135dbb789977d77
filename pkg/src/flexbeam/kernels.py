"""Backstepping kernels on the triangle {0 <= y <= x <= 1}.

Control kernels (k, l, gamma) are obtained by successive approximation:
with the nonlocal term frozen at the previous iterate, k is integrated along
x - y = const starting from its y = 0 boundary value, l along x + y = const
starting from the diagonal where l vanishes, and gamma from its linear ODE by
an exponential trapezoid rule.  Observer kernels (psi, phi) are handled the
same way, with phi starting from the diagonal and psi integrated backwards
from the x = 1 edge.  Inverse kernels solve the second-kind Volterra
equations that make the inverse transform an exact left inverse.

All arrays are dense (n+1, n+1) with entry [i, j] the value at (x_i, y_j);
entries above the diagonal are zero and never read.
"""

from __future__ import annotations

import csv
import enum
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .params import DimensionlessParams
from .quadrature import column_head_integral, row_tail_integral, trapz

DEFAULT_N = 256
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200


class KernelConvergenceError(RuntimeError):
    pass


class Domain(enum.Enum):
    LOWER = "lower"  # 0 <= y <= x <= 1
    UPPER = "upper"  # 0 <= x <= y <= 1


@dataclass(frozen=True)
class TriangleGrid:
    values: np.ndarray
    domain: Domain = Domain.LOWER

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("triangle grid needs a square (n+1, n+1) array")
        if not np.all(np.isfinite(v)):
            raise ValueError("triangle grid holds non-finite values")
        mask = np.tri(v.shape[0], dtype=bool)
        if self.domain is Domain.UPPER:
            mask = mask.T
        v = np.where(mask, v, 0.0)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0] - 1

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def __getitem__(self, idx):
        return self.values[idx]

    def samples(self):
        """Yield (x, y, value) over the stored half of the grid."""
        n = self.n
        for i in range(n + 1):
            js = range(i + 1) if self.domain is Domain.LOWER else range(i, n + 1)
            for j in js:
                yield i / n, j / n, self.values[i, j]


def _grid_check(n: int):
    if n < 8:
        raise ValueError(f"grid needs n >= 8, got {n}")


@dataclass(frozen=True)
class ControlKernels:
    k: TriangleGrid
    l: TriangleGrid
    gamma: np.ndarray  # (n+1, 2)
    K: np.ndarray
    params_hash: str
    iterations: int = 0
    history: tuple = ()

    @property
    def n(self) -> int:
        return self.k.n


@dataclass(frozen=True)
class InverseKernels:
    lam: np.ndarray  # (n+1, 2)
    rho: TriangleGrid
    sigma: TriangleGrid

    @property
    def n(self) -> int:
        return self.rho.n


@dataclass(frozen=True)
class ObserverKernels:
    psi: TriangleGrid
    phi: TriangleGrid
    iterations: int = 0
    history: tuple = ()

    @property
    def n(self) -> int:
        return self.psi.n


def _params_hash(dp: DimensionlessParams, K, n) -> str:
    payload = repr((dp.fingerprint(), tuple(np.asarray(K, float).ravel()), n))
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _geometry(n: int, b: float):
    x = np.linspace(0.0, 1.0, n + 1)
    dx = x[:, None] - x[None, :]
    return x, np.tril(np.cosh(b * dx))


def _control_nonlocal(k, l, x, b, h):
    # Q(x, y) = b^2/2 int_y^x cosh(b (z - y)) (k + l)(x, z) dz, cosh split so the
    # inner integral is a running sum along each row
    M = k + l
    cz, sz = np.cosh(b * x), np.sinh(b * x)
    Tc = row_tail_integral(M * cz[None, :], h)
    Ts = row_tail_integral(M * sz[None, :], h)
    return 0.5 * b * b * np.tril(cz[None, :] * Tc - sz[None, :] * Ts)


def _observer_nonlocal(psi, phi, x, b, h):
    # Q(x, y) = b^2/2 int_y^x cosh(b (x - z)) (phi - psi)(z, y) dz
    W = phi - psi
    cz, sz = np.cosh(b * x), np.sinh(b * x)
    Tc = column_head_integral(W * cz[:, None], h)
    Ts = column_head_integral(W * sz[:, None], h)
    return 0.5 * b * b * np.tril(cz[:, None] * Tc - sz[:, None] * Ts)


def _march_from_diagonal(S, h, sign=1.0):
    """u_x - u_y = sign * S along x + y = const with u = 0 on the diagonal."""
    n1 = S.shape[0]
    u = np.zeros_like(S)
    for i in range(1, n1):
        s_mid = 0.5 * (S[i - 1, i - 1] + S[i, i])
        u[i, i - 1] = sign * 0.25 * h * (s_mid + S[i, i - 1])
        if i >= 2:
            u[i, : i - 1] = u[i - 1, 1:i] + sign * 0.5 * h * (S[i, : i - 1] + S[i - 1, 1:i])
    return u


def _march_k(S, k0, h):
    """k_x + k_y = S along x - y = const from the y = 0 values k0."""
    n1 = S.shape[0]
    k = np.zeros_like(S)
    k[:, 0] = k0
    for i in range(1, n1):
        k[i, 1 : i + 1] = k[i - 1, :i] + 0.5 * h * (S[i, 1 : i + 1] + S[i - 1, :i])
    return k


def _march_psi(S, edge, h):
    """psi_x + psi_y = S along x - y = const, backwards from psi(1, y) = edge."""
    n1 = S.shape[0]
    n = n1 - 1
    p = np.zeros_like(S)
    p[n, :] = edge
    for i in range(n - 1, -1, -1):
        p[i, : i + 1] = p[i + 1, 1 : i + 2] - 0.5 * h * (S[i, : i + 1] + S[i + 1, 1 : i + 2])
    return p


def _gamma_solve(l0, K, dp, h):
    sA = dp.sqrt_eps * dp.A_mat
    E = expm(sA * h)
    C = dp.C_row
    g = np.zeros((l0.size, 2))
    g[0] = -np.asarray(K, float)
    for i in range(l0.size - 1):
        g[i + 1] = g[i] @ E - 0.5 * h * (l0[i] * (C @ E) + l0[i + 1] * C)
    return g


def solve_control_kernels(dp: DimensionlessParams, K, n: int = DEFAULT_N,
                          tol: float = DEFAULT_TOL,
                          max_iter: int = DEFAULT_MAX_ITER) -> ControlKernels:
    _grid_check(n)
    if tol <= 0:
        raise ValueError("tol must be positive")
    K = np.asarray(K, dtype=float).reshape(2)
    h = 1.0 / n
    x, chs = _geometry(n, dp.b)
    b = dp.b
    s = dp.sqrt_eps
    Bv = dp.B_vec
    forcing = -0.5 * b * b * chs  # source of k; l carries the opposite sign

    k = np.zeros((n + 1, n + 1))
    l = np.zeros_like(k)
    gamma = np.zeros((n + 1, 2))
    history = []
    for it in range(1, max_iter + 1):
        Q = _control_nonlocal(k, l, x, b, h)
        S = np.tril(forcing + Q)
        l_new = _march_from_diagonal(S, h, sign=-1.0)
        g_new = _gamma_solve(l_new[:, 0], K, dp, h)
        k_new = _march_k(S, -l_new[:, 0] - s * (g_new @ Bv), h)
        change = max(np.abs(k_new - k).max(), np.abs(l_new - l).max(),
                     np.abs(g_new - gamma).max())
        k, l, gamma = k_new, l_new, g_new
        history.append(change)
        if not np.isfinite(change):
            break
        if change <= tol:
            return ControlKernels(TriangleGrid(k), TriangleGrid(l), gamma, K,
                                  _params_hash(dp, K, n), it, tuple(history))
    raise KernelConvergenceError(_diagnose("control", history))


def solve_observer_kernels(dp: DimensionlessParams, n: int = DEFAULT_N,
                           tol: float = DEFAULT_TOL,
                           max_iter: int = DEFAULT_MAX_ITER) -> ObserverKernels:
    _grid_check(n)
    if tol <= 0:
        raise ValueError("tol must be positive")
    h = 1.0 / n
    x, chs = _geometry(n, dp.b)
    b = dp.b
    forcing = -0.5 * b * b * chs

    psi = np.zeros((n + 1, n + 1))
    phi = np.zeros_like(psi)
    history = []
    for it in range(1, max_iter + 1):
        S = np.tril(forcing + _observer_nonlocal(psi, phi, x, b, h))
        # phi decreases by S moving away from the diagonal
        phi_new = _march_from_diagonal(S, h, sign=-1.0)
        psi_new = _march_psi(S, -phi_new[n, :], h)
        change = max(np.abs(psi_new - psi).max(), np.abs(phi_new - phi).max())
        psi, phi = psi_new, phi_new
        history.append(change)
        if not np.isfinite(change):
            break
        if change <= tol:
            return ObserverKernels(TriangleGrid(psi), TriangleGrid(phi), it, tuple(history))
    raise KernelConvergenceError(_diagnose("observer", history))


def _diagnose(which, history):
    ratio = history[-1] / history[-2] if len(history) > 1 and history[-2] else float("nan")
    return (f"{which} kernels did not converge in {len(history)} iterations: "
            f"last change {history[-1]:.3e}, contraction ratio {ratio:.3f}")


def solve_inverse_kernels(ck: ControlKernels, dp: DimensionlessParams | None = None,
                          n: int | None = None, tol: float | None = None) -> InverseKernels:
    """Kernels of the inverse transform.

    rho is the trapezoid resolvent of k, rho = k + int_y^x rho(x,z) k(z,y) dz,
    solved column by column (exactly, no iteration); sigma and lambda follow
    by quadrature.  ``dp`` and ``tol`` are accepted for interface symmetry.
    """
    if n is not None and n != ck.n:
        raise ValueError(f"grid mismatch: kernels on n={ck.n}, requested n={n}")
    k = np.array(ck.k.values)
    l = np.array(ck.l.values)
    n = ck.n
    h = 1.0 / n
    rho = np.zeros_like(k)
    diag_k = np.diagonal(k).copy()
    for j in range(n, -1, -1):
        rho[j, j] = k[j, j]
        if j == n:
            continue
        rows = slice(j + 1, n + 1)
        inner = rho[rows, j + 1 :] @ k[j + 1 :, j]
        rii = np.diagonal(rho)[j + 1 :]
        denom = 1.0 - 0.5 * h * diag_k[j]
        if abs(denom) < 1e-12:
            raise KernelConvergenceError("singular Volterra step in inverse kernel solve")
        rho[rows, j] = (k[rows, j] + h * inner - 0.5 * h * rii * k[rows, j]) / denom
    dr = np.diagonal(rho)
    sigma = l + h * (rho @ l - 0.5 * rho * np.diagonal(l)[None, :] - 0.5 * dr[:, None] * l)
    sigma = np.tril(sigma)
    lam = np.array(ck.gamma, dtype=float)
    for i in range(1, n + 1):
        lam[i] = ck.gamma[i] + trapz((rho[i, : i + 1, None] * ck.gamma[: i + 1]).T, h)
    return InverseKernels(lam, TriangleGrid(rho), TriangleGrid(sigma))


def kernel_derivative(grid: TriangleGrid, which: str = "y", line: int | None = None) -> np.ndarray:
    """Derivative of a kernel along the x = 1 edge (row ``line``, default n).

    ``which="y"`` differentiates along the row (second order everywhere);
    ``which="x"`` uses a second-order backward difference in x, falling back
    to first order at the two nodes next to the diagonal where the stencil
    leaves the triangle.
    """
    n = grid.n
    if n < 8:
        raise ValueError(f"grid needs n >= 8 for differentiation, got {n}")
    v = grid.values
    i = n if line is None else line
    h = 1.0 / n
    if which == "y":
        row = v[i, : i + 1]
        return np.gradient(row, h, edge_order=2)
    if which == "x":
        if i != n:
            raise ValueError("x-derivative is provided on the x = 1 edge only")
        d = np.empty(n + 1)
        d[: n - 1] = (3 * v[n, : n - 1] - 4 * v[n - 1, : n - 1] + v[n - 2, : n - 1]) / (2 * h)
        d[n - 1] = (v[n, n - 1] - v[n - 1, n - 1]) / h
        d[n] = d[n - 1]
        return d
    raise ValueError("which must be 'x' or 'y'")


# --------------------------------------------------------------------------
# residuals


def _direct_row_integral(F, cosh_mat, h, along="row"):
    """int_y^x cosh(b (z - y)) F(x, z) dz (row) or cosh(b (x - z)) F(z, y) dz (column)
    by brute-force trapezoid, independent of the cosh splitting used in the solver."""
    n1 = F.shape[0]
    out = np.zeros_like(F)
    for i in range(1, n1):
        if along == "row":
            # G[j, m] = cosh(b (z_m - y_j)) F(x_i, z_m), m in [j, i]
            G = np.triu(cosh_mat[: i + 1, : i + 1].T * F[i, None, : i + 1])
            tot = G.sum(axis=1) - 0.5 * np.diagonal(G) - 0.5 * G[:, i]
            out[i, : i + 1] = h * tot
        else:
            # G[j, m] = cosh(b (x_i - z_m)) F(z_m, y_j), m in [j, i]
            G = np.triu(F[: i + 1, : i + 1].T * cosh_mat[i, None, : i + 1])
            tot = G.sum(axis=1) - 0.5 * np.diagonal(G) - 0.5 * G[:, i]
            out[i, : i + 1] = h * tot
    return np.tril(out)


def _interior_mask(n1):
    i, j = np.indices((n1, n1))
    return (j >= 1) & (j <= i - 1) & (i <= n1 - 2)


def _central(v, h):
    vx = np.zeros_like(v)
    vy = np.zeros_like(v)
    vx[1:-1, :] = (v[2:, :] - v[:-2, :]) / (2 * h)
    vy[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2 * h)
    return vx, vy


def kernel_residual(kernels, dp: DimensionlessParams) -> dict:
    """Sup-norm residuals of the kernel equations.

    ``pde_*`` entries are evaluated with central differences and brute-force
    quadrature at interior nodes, independently of the marching scheme, and
    shrink with the grid.  ``fixed_point`` is the change produced by one more
    solver sweep (the solver's own residual).  Boundary entries measure the
    boundary relations, which the solver imposes exactly.
    """
    if isinstance(kernels, ControlKernels):
        return _control_residual(kernels, dp)
    if isinstance(kernels, ObserverKernels):
        return _observer_residual(kernels, dp)
    raise TypeError(f"unsupported kernel set {type(kernels).__name__}")


def _control_residual(ck: ControlKernels, dp):
    n = ck.n
    h = 1.0 / n
    b = dp.b
    s = dp.sqrt_eps
    x, chs = _geometry(n, b)
    k, l, g = ck.k.values, ck.l.values, ck.gamma
    Q = 0.5 * b * b * _direct_row_integral(k + l, chs, h, "row")
    kx, ky = _central(k, h)
    lx, ly = _central(l, h)
    mask = _interior_mask(n + 1)
    rk = np.abs(kx + ky + 0.5 * b * b * chs - Q)[mask]
    rl = np.abs(lx - ly - 0.5 * b * b * chs + Q)[mask]
    dg = (g[2:] - g[:-2]) / (2 * h)
    rg = np.abs(dg - s * g[1:-1] @ dp.A_mat + np.outer(l[1:-1, 0], dp.C_row))
    # one more sweep of the solver from the returned kernels
    S = np.tril(-0.5 * b * b * chs + _control_nonlocal(k, l, x, b, h))
    l2 = _march_from_diagonal(S, h, sign=-1.0)
    g2 = _gamma_solve(l2[:, 0], ck.K, dp, h)
    k2 = _march_k(S, -l2[:, 0] - s * (g2 @ dp.B_vec), h)
    fp = max(np.abs(k2 - k).max(), np.abs(l2 - l).max(), np.abs(g2 - g).max())
    bc_k0 = np.abs(k[:, 0] + l[:, 0] + s * (g @ dp.B_vec)).max()
    # k has a single boundary condition (y = 0); the corner value is the one it fixes
    corner = abs(k[0, 0] + l[0, 0] + s * (g[0] @ dp.B_vec))
    return {
        "pde_k": float(rk.max()) if rk.size else 0.0,
        "pde_l": float(rl.max()) if rl.size else 0.0,
        "pde_gamma": float(rg.max()),
        "fixed_point": float(fp),
        "bc_l_diagonal": float(np.abs(np.diagonal(l)).max()),
        "bc_k_y0": float(bc_k0),
        "bc_gamma_0": float(np.abs(g[0] + ck.K).max()),
        "corner_mismatch": float(corner),
    }


def _observer_residual(ok: ObserverKernels, dp):
    n = ok.n
    h = 1.0 / n
    b = dp.b
    x, chs = _geometry(n, b)
    psi, phi = ok.psi.values, ok.phi.values
    Q = 0.5 * b * b * _direct_row_integral(phi - psi, chs, h, "column")
    px, py = _central(psi, h)
    fx, fy = _central(phi, h)
    mask = _interior_mask(n + 1)
    r_phi = np.abs(-fx + fy + 0.5 * b * b * chs - Q)[mask]
    r_psi = np.abs(px + py + 0.5 * b * b * chs - Q)[mask]
    S = np.tril(-0.5 * b * b * chs + _observer_nonlocal(psi, phi, x, b, h))
    phi2 = _march_from_diagonal(S, h, sign=-1.0)
    psi2 = _march_psi(S, -phi2[n, :], h)
    fp = max(np.abs(psi2 - psi).max(), np.abs(phi2 - phi).max())
    return {
        "pde_phi": float(r_phi.max()) if r_phi.size else 0.0,
        "pde_psi": float(r_psi.max()) if r_psi.size else 0.0,
        "fixed_point": float(fp),
        "bc_phi_diagonal": float(np.abs(np.diagonal(phi)).max()),
        "bc_psi_edge": float(np.abs(psi[n, :] + phi[n, :]).max()),
    }


def dump_kernels_csv(out_dir, **named) -> list[Path]:
    """Write one (x, y, value) CSV per triangle grid and (x, v1, v2) per row-valued kernel."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, obj in named.items():
        path = out / f"{name}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            if isinstance(obj, TriangleGrid):
                w.writerow(["x", "y", "value"])
                for x, y, v in obj.samples():
                    w.writerow([repr(x), repr(y), repr(float(v))])
            else:
                arr = np.asarray(obj)
                n = arr.shape[0] - 1
                w.writerow(["x", f"{name}_1", f"{name}_2"])
                for i, row in enumerate(arr):
                    w.writerow([repr(i / n), repr(float(row[0])), repr(float(row[1]))])
        paths.append(path)
    return paths
