"""Trapezoid helpers on the uniform grid x_i = i h, i = 0..n."""

from __future__ import annotations

import numpy as np


def trap_weights(n: int) -> np.ndarray:
    """Weights of the composite trapezoid rule over [0, 1] with n cells."""
    w = np.full(n + 1, 1.0 / n)
    w[0] = w[-1] = 0.5 / n
    return w


def trapz(f: np.ndarray, h: float) -> float:
    return h * (f.sum(axis=-1) - 0.5 * (f[..., 0] + f[..., -1]))


def cumtrapz(f: np.ndarray, h: float) -> np.ndarray:
    """Running integral from 0 along the last axis, same length as ``f``."""
    out = np.zeros_like(f, dtype=float)
    out[..., 1:] = np.cumsum(0.5 * h * (f[..., 1:] + f[..., :-1]), axis=-1)
    return out


def row_tail_integral(f: np.ndarray, h: float) -> np.ndarray:
    """T[i, j] = int_{y_j}^{x_i} f(x_i, z) dz for a lower-triangular array."""
    n1 = f.shape[0]
    pair = 0.5 * h * (f[:, :-1] + f[:, 1:])
    pair = np.where(np.tri(n1, n1 - 1, -1, dtype=bool), pair, 0.0)
    out = np.zeros_like(f)
    out[:, :-1] = np.cumsum(pair[:, ::-1], axis=1)[:, ::-1]
    return np.tril(out)


def column_head_integral(f: np.ndarray, h: float) -> np.ndarray:
    """T[i, j] = int_{y_j}^{x_i} f(z, y_j) dz for a lower-triangular array."""
    n1 = f.shape[0]
    pair = 0.5 * h * (f[:-1, :] + f[1:, :])
    pair = np.where(np.arange(n1 - 1)[:, None] >= np.arange(n1)[None, :], pair, 0.0)
    out = np.zeros_like(f)
    out[1:, :] = np.cumsum(pair, axis=0)
    return np.tril(out)


def volterra_apply(kernel: np.ndarray, f: np.ndarray, h: float) -> np.ndarray:
    """(Kf)(x_i) = int_0^{x_i} kernel(x_i, y) f(y) dy, trapezoid, for each i."""
    g = kernel * f[None, :]
    full = g.sum(axis=1)
    diag = np.diagonal(g)
    out = h * (full - 0.5 * g[:, 0] - 0.5 * diag)
    out[0] = 0.0
    return out
