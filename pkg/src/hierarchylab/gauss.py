"""Gaussian expectations: Gauss-Hermite quadrature, weak derivatives, T-functionals.

Notation: ``<f>_K`` is the expectation of ``f(z)`` with ``z ~ N(0, K)``.

Piecewise-smooth integrands (1-homogeneous activations, with a kink at 0)
are integrated with half-range Gauss rules on each side of the kink, so
piecewise polynomials are integrated exactly.  An odd-point Hermite rule
would otherwise put a node on the kink and converge only algebraically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.hermite_e import hermegauss, hermeval
from scipy.linalg import eigh_tridiagonal

from .errors import BadOrder, NonFinite, NotPSD, OutOfRange, SingularKernel
from .nonlin import TANH, Nonlinearity, eval as sigma_eval

DEFAULT_NODES = 129
DEFAULT_NODES_2D = 65
MAX_NODES = 1025
MAX_HALF_NODES = 129
REL_TOL = 1e-10
PSD_TOL = 1e-12

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Kernel2:
    """Covariance of two pre-activations."""

    K_aa: float
    K_ab: float
    K_bb: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.K_aa, self.K_ab, self.K_bb)


# ---------------------------------------------------------------- rules


def _golub_welsch(alpha: np.ndarray, off: np.ndarray, beta0: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss nodes from the Jacobi matrix; weights from the Christoffel sum.

    Christoffel weights 1 / sum_k q_k(x)^2 keep relative accuracy for the
    tiny tail weights, which eigenvector components do not.
    """
    n = alpha.size
    nodes = eigh_tridiagonal(alpha, off, eigvals_only=True)
    q_prev = np.zeros(n)
    q = np.full(n, 1.0 / math.sqrt(beta0))
    total = q * q
    log_scale = np.zeros(n)
    for k in range(n - 1):
        q_next = ((nodes - alpha[k]) * q - (off[k - 1] if k > 0 else 0.0) * q_prev) / off[k]
        q_prev, q = q, q_next
        total += q * q
        big = np.abs(q) > 1e100
        if np.any(big):
            f = np.where(big, 1e-100, 1.0)
            q, q_prev, total = q * f, q_prev * f, total * f * f
            log_scale += np.where(big, 200 * math.log(10.0), 0.0)
    weights = np.exp(-np.log(total) - log_scale)
    return nodes, weights


@lru_cache(maxsize=None)
def hermite_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for E f(Z), Z ~ N(0, 1)."""
    if n <= 150:
        x, w = hermegauss(n)
        return x, w * _INV_SQRT_2PI
    # numpy's hermegauss overflows for large n; use the known recurrence
    return _golub_welsch(np.zeros(n), np.sqrt(np.arange(1.0, n)), 1.0)


@lru_cache(maxsize=None)
def half_range_rule(n: int, beta: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule for the weight t^beta exp(-t^2/2) on [0, inf).

    Recurrence coefficients come from a Lanczos run on a fine Gauss-Legendre
    discretization of the weight, then Golub-Welsch.
    """
    # composite 32-point Gauss-Legendre on unit panels; exp(-t^2/2)
    # underflows past t ~ 38.6 so nothing beyond matters in double precision
    g, gw = np.polynomial.legendre.leggauss(32)
    panels = np.arange(0.0, 40.0)
    t = (panels[:, None] + 0.5 * (g[None, :] + 1.0)).ravel()
    w = np.tile(0.5 * gw, panels.size) * t**beta * np.exp(-0.5 * t * t)
    m = t.size

    beta0 = float(np.sum(w))
    # Lanczos on the discrete measure with full reorthogonalization; the
    # vectors carry sqrt(w) so nothing overflows in the far tail.
    alpha = np.empty(n)
    off = np.empty(n)
    basis = np.empty((n, m))
    v = np.sqrt(w / beta0)
    for k in range(n):
        basis[k] = v
        alpha[k] = np.dot(t * v, v)
        r = t * v - alpha[k] * v
        if k > 0:
            r -= off[k - 1] * basis[k - 1]
        r -= basis[: k + 1].T @ (basis[: k + 1] @ r)
        off[k] = math.sqrt(np.dot(r, r))
        v = r / off[k]
    return _golub_welsch(alpha, off[:-1], beta0)


@lru_cache(maxsize=None)
def _split_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Standard-normal rule made of two half-range rules, kink at 0."""
    t, w = half_range_rule(n, 0)
    w = w * _INV_SQRT_2PI
    return np.concatenate([-t[::-1], t]), np.concatenate([w[::-1], w])


def std_normal_rule(n: int, piecewise: bool) -> tuple[np.ndarray, np.ndarray]:
    """``n`` Hermite nodes, or for piecewise integrands about ``n`` nodes split
    evenly across the two half lines."""
    if piecewise:
        return _split_rule(min(n // 2 + 1, MAX_HALF_NODES))
    return hermite_rule(n)


def _node_schedule(nodes: int | None, start: int) -> list[int]:
    if nodes is not None:
        if nodes < 2:
            raise BadOrder("need at least 2 quadrature nodes")
        return [int(nodes)]
    sched = [start]
    while sched[-1] < MAX_NODES:
        sched.append(min(2 * sched[-1] - 1, MAX_NODES))
    return sched


def _converged(a: float, b: float, scale: float) -> bool:
    return abs(a - b) <= REL_TOL * max(abs(a), abs(b)) + 1e-15 * scale


def _adaptive(evaluate: Callable[[int], tuple[float, float]], nodes: int | None, start: int) -> float:
    """Run ``evaluate(n) -> (value, scale)`` over a doubling schedule."""
    sched = _node_schedule(nodes, start)
    value, scale = evaluate(sched[0])
    for n in sched[1:]:
        new, scale = evaluate(n)
        if _converged(value, new, scale):
            return new
        value = new
    return value


def _check_finite(vals: np.ndarray) -> None:
    if not np.all(np.isfinite(vals)):
        raise NonFinite("integrand produced NaN/Inf at a quadrature node")


# ---------------------------------------------------------------- 1-D


def _as_variance(K) -> float:
    K = float(getattr(K, "K", K))
    if K < 0 or not math.isfinite(K):
        raise OutOfRange(f"variance must be finite and >= 0, got {K}")
    return K


def expect1(f: Callable, K, nodes: int | None = None, piecewise: bool = False) -> float:
    """<f(z)>_K by Gauss-Hermite quadrature (doubling until converged)."""
    K = _as_variance(K)
    if K == 0.0:
        val = np.asarray(f(np.zeros(1)), dtype=float)
        _check_finite(val)
        return float(val[0])
    s = math.sqrt(K)

    def evaluate(n):
        x, w = std_normal_rule(n, piecewise)
        vals = np.asarray(f(s * x), dtype=float)
        _check_finite(vals)
        return float(np.dot(w, vals)), float(np.dot(w, np.abs(vals)))

    return _adaptive(evaluate, nodes, DEFAULT_NODES)


def weak_deriv_expect(f: Callable, K, i: int, nodes: int | None = None, piecewise: bool = False) -> float:
    """<d^i f / dz^i>_K via the Hermite identity, without differentiating f.

    <f^(i)>_K = K^(-i/2) <He_i(z / sqrt K) f(z)>_K
    """
    if i < 0:
        raise BadOrder("derivative order must be >= 0")
    K = _as_variance(K)
    if i == 0:
        return expect1(f, K, nodes, piecewise)
    if K == 0.0:
        raise SingularKernel("weak derivatives need K > 0")
    s = math.sqrt(K)
    coef = np.zeros(i + 1)
    coef[i] = 1.0

    def evaluate(n):
        x, w = std_normal_rule(n, piecewise)
        vals = np.asarray(f(s * x), dtype=float) * hermeval(x, coef)
        _check_finite(vals)
        return float(np.dot(w, vals)), float(np.dot(w, np.abs(vals)))

    return _adaptive(evaluate, nodes, DEFAULT_NODES) / K ** (i / 2)


def t_functional(nl: Nonlinearity, K, i: int, j: int, C_W: float, nodes: int | None = None) -> float:
    """T_{i,j} = C_W^j < d^i (sigma^2 - <sigma^2>_K)^j >_K."""
    if i < 0 or i % 2:
        raise BadOrder("T-functionals are defined for even i >= 0")
    if j < 1:
        raise BadOrder("T-functionals need j >= 1")
    pw = not nl.smooth
    K = _as_variance(K)
    mean = expect1(lambda z: sigma_eval(nl, z) ** 2, K, nodes, pw)
    g = lambda z: (sigma_eval(nl, z) ** 2 - mean) ** j  # noqa: E731
    return C_W**j * weak_deriv_expect(g, K, i, nodes, pw)


# ---------------------------------------------------------------- 2-D


def _kernel2(K2) -> tuple[float, float, float]:
    if isinstance(K2, Kernel2):
        return K2.as_tuple()
    a, b, c = (float(v) for v in K2)
    return a, b, c


def check_psd2(K2) -> tuple[float, float, float]:
    kaa, kab, kbb = _kernel2(K2)
    if kaa < 0 or kbb < 0:
        raise NotPSD("negative variance")
    bound = kaa * kbb
    if kab * kab > bound + PSD_TOL * max(bound, 1.0):
        raise NotPSD(f"K_ab^2 = {kab * kab} exceeds K_aa K_bb = {bound}")
    return kaa, kab, kbb


def _factor2(kaa: float, kab: float, kbb: float) -> tuple[np.ndarray, bool]:
    lam, vec = np.linalg.eigh(np.array([[kaa, kab], [kab, kbb]]))
    lam = np.clip(lam, 0.0, None)
    rank_one = lam[0] <= 1e-14 * max(lam[1], 1e-300)
    return vec * np.sqrt(lam), rank_one


def _kink_angles(A: np.ndarray) -> np.ndarray:
    angles = []
    for row in A:
        if np.any(row != 0):
            th = math.atan2(-row[0], row[1])
            angles.extend([th % (2 * math.pi), (th + math.pi) % (2 * math.pi)])
    angles = sorted(set(round(a, 15) for a in angles))
    return np.array(angles) if angles else np.array([0.0])


def expect2(g: Callable, K2, nodes: int | None = None, piecewise: bool = False) -> float:
    """E g(z_a, z_b) for a centered Gaussian pair with covariance K2."""
    kaa, kab, kbb = check_psd2(K2)
    A, rank_one = _factor2(kaa, kab, kbb)
    if rank_one:
        v = A[:, 1]
        return expect1(lambda u: g(v[0] * u, v[1] * u), 1.0, nodes, piecewise)

    if not piecewise:

        def evaluate(n):
            x, w = hermite_rule(n)
            u1, u2 = np.meshgrid(x, x, indexing="ij")
            ww = np.outer(w, w)
            za = A[0, 0] * u1 + A[0, 1] * u2
            zb = A[1, 0] * u1 + A[1, 1] * u2
            vals = np.asarray(g(za, zb), dtype=float)
            _check_finite(vals)
            return float(np.sum(ww * vals)), float(np.sum(ww * np.abs(vals)))

        return _adaptive(evaluate, nodes, DEFAULT_NODES_2D)

    edges = _kink_angles(A)
    edges = np.append(edges, edges[0] + 2 * math.pi)

    def evaluate(n):
        r, wr = half_range_rule(n, 1)
        t, wt = np.polynomial.legendre.leggauss(n)
        total = 0.0
        scale = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            th = lo + 0.5 * (hi - lo) * (t + 1.0)
            wth = 0.5 * (hi - lo) * wt
            c, s = np.cos(th), np.sin(th)
            za = np.outer(r, A[0, 0] * c + A[0, 1] * s)
            zb = np.outer(r, A[1, 0] * c + A[1, 1] * s)
            vals = np.asarray(g(za, zb), dtype=float)
            _check_finite(vals)
            ww = np.outer(wr, wth)
            total += float(np.sum(ww * vals))
            scale += float(np.sum(ww * np.abs(vals)))
        return total / (2 * math.pi), scale / (2 * math.pi)

    return _adaptive(evaluate, nodes, DEFAULT_NODES_2D)


# ---------------------------------------------------------------- brackets


class Bracket:
    """Cached evaluator of <d^m (sigma^a sigma'^b)>_K for one (nl, K).

    Used by the derivative hierarchy, which needs many such brackets at
    the same kernel value.
    """

    def __init__(self, nl: Nonlinearity, K: float, nodes: int | None = None):
        self.nl = nl
        self.K = _as_variance(K)
        self.nodes = nodes
        self._cache: dict[tuple[int, int, int], float] = {}

    def _h(self, a: int, b: int):
        nl = self.nl
        return lambda z: sigma_eval(nl, z, 0) ** a * sigma_eval(nl, z, 1) ** b

    def __call__(self, a: int, b: int, m: int = 0) -> float:
        key = (a, b, m)
        if key not in self._cache:
            if self.nl.kind == TANH and m > 0:
                # classical derivative: sigma^a sigma'^b is a polynomial in tanh,
                # which avoids the K^(-m/2) cancellation of the Hermite identity
                P = _tanh_power_poly(a, b, m)
                val = expect1(lambda z: P(np.tanh(z)), self.K, self.nodes)
            else:
                val = weak_deriv_expect(
                    self._h(a, b), self.K, m, self.nodes, piecewise=not self.nl.smooth
                )
            self._cache[key] = val
        return self._cache[key]


@lru_cache(maxsize=None)
def _tanh_power_poly(a: int, b: int, m: int) -> Polynomial:
    """Polynomial P with d^m/dz^m [tanh^a sech^(2b)] = P(tanh z)."""
    one_minus_t2 = Polynomial([1.0, 0.0, -1.0])
    P = Polynomial([0.0, 1.0]) ** a * one_minus_t2**b
    for _ in range(m):
        P = P.deriv() * one_minus_t2
    return P
