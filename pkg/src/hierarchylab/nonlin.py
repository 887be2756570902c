"""Nonlinearities: evaluation of sigma and its derivatives, Taylor data."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import NotKStarZeroClass, OutOfRange, UnsupportedOrder

HOMOG1 = "homog1"
TANH = "tanh"
TANH_LIKE = "tanh_like"

TANH_MAX_ORDER = 24
_FD_MAX_ORDER = 3
_FD_STEP = 1e-3


@lru_cache(maxsize=None)
def _tanh_polys() -> tuple[Polynomial, ...]:
    # sigma^(k) = P_k(tanh z) with P_{k+1}(t) = P_k'(t) (1 - t^2)
    one_minus_t2 = Polynomial([1.0, 0.0, -1.0])
    polys = [Polynomial([0.0, 1.0])]
    for _ in range(TANH_MAX_ORDER):
        polys.append(polys[-1].deriv() * one_minus_t2)
    return tuple(polys)


@dataclass(frozen=True)
class Nonlinearity:
    """An activation function together with the data the hierarchy needs.

    Build instances through :func:`relu`, :func:`leaky_relu`,
    :func:`homog1`, :func:`tanh` or :func:`tanh_like` rather than directly.
    """

    kind: str
    a_plus: float = 0.0
    a_minus: float = 0.0
    sigma1: float = 0.0
    sigma3: float = 0.0
    smooth: bool = True
    name: str = ""
    derivatives: tuple[Callable[[np.ndarray], np.ndarray], ...] = field(
        default=(), compare=False, repr=False
    )

    @property
    def max_order(self) -> int:
        if self.kind == TANH:
            return TANH_MAX_ORDER
        if self.kind == HOMOG1:
            return 1_000
        return max(len(self.derivatives) - 1, _FD_MAX_ORDER)

    def __call__(self, z, order: int = 0):
        return eval(self, z, order)

    def to_json(self) -> dict:
        if self.kind == HOMOG1:
            return {"kind": self.name or "leaky_relu", "a_plus": self.a_plus, "a_minus": self.a_minus}
        if self.kind == TANH:
            return {"kind": "tanh"}
        return {"kind": "tanh_like", "name": self.name}


def homog1(a_plus: float, a_minus: float, name: str = "leaky_relu") -> Nonlinearity:
    """sigma(t) = (a_plus 1_{t>0} + a_minus 1_{t<0}) t."""
    a_plus = float(a_plus)
    a_minus = float(a_minus)
    if a_plus == a_minus:
        raise OutOfRange("1-homogeneous activation needs a_plus != a_minus")
    if a_plus**2 + a_minus**2 == 0.0:
        raise OutOfRange("1-homogeneous activation needs a_plus^2 + a_minus^2 > 0")
    return Nonlinearity(
        kind=HOMOG1,
        a_plus=a_plus,
        a_minus=a_minus,
        sigma1=float("nan"),
        sigma3=float("nan"),
        smooth=False,
        name=name,
    )


def relu() -> Nonlinearity:
    return homog1(1.0, 0.0, name="relu")


def leaky_relu(a_minus: float = 0.01, a_plus: float = 1.0) -> Nonlinearity:
    return homog1(a_plus, a_minus, name="leaky_relu")


def tanh() -> Nonlinearity:
    return Nonlinearity(kind=TANH, sigma1=1.0, sigma3=-1.0 / 3.0, smooth=True, name="tanh")


def tanh_like(
    derivatives: Sequence[Callable[[np.ndarray], np.ndarray]],
    sigma1: float | None = None,
    sigma3: float | None = None,
    name: str = "custom",
) -> Nonlinearity:
    """A smooth activation given by analytic evaluators ``derivatives[k] = sigma^(k)``.

    ``sigma1`` and ``sigma3`` default to the Taylor coefficients read off
    the supplied evaluators at zero.
    """
    derivs = tuple(derivatives)
    if not derivs:
        raise UnsupportedOrder("tanh_like needs at least the order-0 evaluator")
    nl = Nonlinearity(kind=TANH_LIKE, smooth=True, name=name, derivatives=derivs)
    if sigma1 is None:
        sigma1 = float(eval(nl, 0.0, 1))
    if sigma3 is None:
        sigma3 = float(eval(nl, 0.0, 3)) / 6.0
    return Nonlinearity(
        kind=TANH_LIKE,
        sigma1=float(sigma1),
        sigma3=float(sigma3),
        smooth=True,
        name=name,
        derivatives=derivs,
    )


def from_config(cfg: dict) -> Nonlinearity:
    """Build from ``{"kind": "relu"|"leaky_relu"|"tanh", "a_plus": .., "a_minus": ..}``."""
    kind = cfg["kind"]
    if kind == "relu":
        return homog1(cfg.get("a_plus", 1.0), cfg.get("a_minus", 0.0), name="relu")
    if kind == "leaky_relu":
        return homog1(cfg.get("a_plus", 1.0), cfg.get("a_minus", 0.01), name="leaky_relu")
    if kind == "tanh":
        return tanh()
    raise OutOfRange(f"unknown activation kind {kind!r}")


def _finite_difference(f, z, order: int):
    h = _FD_STEP
    if order == 1:
        return (f(z + h) - f(z - h)) / (2 * h)
    if order == 2:
        return (f(z + h) - 2 * f(z) + f(z - h)) / h**2
    return (f(z + 2 * h) - 2 * f(z + h) + 2 * f(z - h) - f(z - 2 * h)) / (2 * h**3)


def eval(nl: Nonlinearity, z, order: int = 0):
    """sigma^(order)(z), elementwise over arrays.

    For 1-homogeneous activations the classical derivative is returned;
    at z = 0 the right limit is used.
    """
    if order < 0:
        raise UnsupportedOrder("derivative order must be non-negative")
    z = np.asarray(z, dtype=float)
    if nl.kind == HOMOG1:
        if order == 0:
            return np.where(z > 0, nl.a_plus * z, nl.a_minus * z)
        if order == 1:
            return np.where(z >= 0, nl.a_plus, nl.a_minus) + 0.0 * z
        return np.zeros_like(z)
    if nl.kind == TANH:
        if order > TANH_MAX_ORDER:
            raise UnsupportedOrder(f"tanh derivatives supported up to order {TANH_MAX_ORDER}")
        return _tanh_polys()[order](np.tanh(z))
    if order < len(nl.derivatives):
        return np.asarray(nl.derivatives[order](z), dtype=float)
    if order <= _FD_MAX_ORDER:
        return _finite_difference(nl.derivatives[0], z, order)
    raise UnsupportedOrder(
        f"{nl.name}: order {order} needs an analytic evaluator (finite differences refused)"
    )


def is_kstar_zero_candidate(nl: Nonlinearity) -> bool:
    return nl.smooth and nl.sigma1 * nl.sigma3 < 0


def taylor_a(nl: Nonlinearity) -> float:
    """a = -6 sigma_3 / sigma_1, the decay rate of the critical kernel."""
    if not is_kstar_zero_candidate(nl):
        raise NotKStarZeroClass(f"{nl.name} is not in the K*=0 class")
    return -6.0 * nl.sigma3 / nl.sigma1
