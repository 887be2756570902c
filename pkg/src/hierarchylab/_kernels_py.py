"""Pure-numpy layer kernels; the compiled module mirrors these signatures.

Activation codes: 0 = 1-homogeneous (a_plus, a_minus), 1 = tanh.
Arrays are C-contiguous float64 with a leading draw axis.
"""

from __future__ import annotations

import numpy as np

ACT_HOMOG1 = 0
ACT_TANH = 1


def activate(z: np.ndarray, code: int, a_plus: float, a_minus: float) -> tuple[np.ndarray, np.ndarray]:
    """(sigma(z), sigma'(z))."""
    if code == ACT_HOMOG1:
        pos = z >= 0
        return np.where(pos, a_plus * z, a_minus * z), np.where(pos, a_plus, a_minus)
    t = np.tanh(z)
    return t, 1.0 - t * t


def chol3(G: np.ndarray) -> np.ndarray:
    """Lower factor L with L L^T = G for a batch of PSD k x k matrices (k <= 3).

    Zero (or rounding-negative) pivots give a zero column, so rank-deficient
    Gram matrices are handled exactly.
    """
    m, k, _ = G.shape
    L = np.zeros_like(G)
    for j in range(k):
        d = G[:, j, j] - np.sum(L[:, j, :j] ** 2, axis=1)
        ok = d > 0
        ljj = np.where(ok, np.sqrt(np.where(ok, d, 1.0)), 0.0)
        L[:, j, j] = ljj
        inv = np.where(ok, 1.0 / np.where(ok, ljj, 1.0), 0.0)
        for i in range(j + 1, k):
            L[:, i, j] = (G[:, i, j] - np.sum(L[:, i, :j] * L[:, j, :j], axis=1)) * inv
    return L


def jet_forward(
    S: np.ndarray,
    xi: np.ndarray,
    bias: np.ndarray,
    c: float,
    code: int,
    a_plus: float,
    a_minus: float,
) -> tuple[np.ndarray, np.ndarray]:
    """One layer for jets.

    S: (m, n, k) post-activation jets [sigma, sigma' d1 z, ...] of the current layer.
    xi: (m, n', k) standard normals; bias: (m, n') bias draws (already scaled).
    Returns the next post-activation jets (m, n', k) and the pre-activations Z0 (m, n').
    Rows of W S are i.i.d. N(0, c S^T S), sampled as xi L^T.
    """
    G = c * np.einsum("mik,mil->mkl", S, S)
    L = chol3(G)
    Z = np.einsum("mjl,mkl->mjk", xi, L)
    Z0 = Z[:, :, 0] + bias
    s, ds = activate(Z0, code, a_plus, a_minus)
    out = np.empty_like(Z)
    out[:, :, 0] = s
    out[:, :, 1:] = ds[:, :, None] * Z[:, :, 1:]
    return out, Z0


def backward_step(v: np.ndarray, u: np.ndarray, s: np.ndarray, xi: np.ndarray, c: float) -> np.ndarray:
    """Draw W^T v given the forward constraint W s = u.

    v, u: (m, n'); s, xi: (m, n).  Rows of W are N(0, c I), so
    W^T v = s (u . v) / |s|^2 + (I - P_s) g with g ~ N(0, c |v|^2 I).
    """
    ss = np.sum(s * s, axis=1)
    safe = np.where(ss > 0, ss, 1.0)
    g = np.sqrt(c * np.sum(v * v, axis=1))[:, None] * xi
    coef = np.where(ss > 0, (np.sum(u * v, axis=1) - np.sum(s * g, axis=1)) / safe, 0.0)
    return g + coef[:, None] * s
