"""Closed forms and the exact finite-width sampler for 1-homogeneous activations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._rng import block_rng, map_blocks
from .errors import OutOfRange
from .hierarchy import NetworkSpec
from .nonlin import HOMOG1, Nonlinearity

_CLAMP = 1e-15
STREAM_EXACT = 11


@dataclass(frozen=True)
class HomogParams:
    a_plus: float
    a_minus: float

    def __post_init__(self):
        if self.a_plus == self.a_minus:
            raise OutOfRange("a_plus == a_minus is a linear network")
        if self.a_plus == -self.a_minus:
            raise OutOfRange("a_plus == -a_minus is excluded")

    @classmethod
    def from_nl(cls, nl: Nonlinearity) -> "HomogParams":
        if nl.kind != HOMOG1:
            raise OutOfRange(f"{nl.name} is not 1-homogeneous")
        return cls(nl.a_plus, nl.a_minus)

    @property
    def C_W(self) -> float:
        return 2.0 / (self.a_plus**2 + self.a_minus**2)

    @property
    def bracket(self) -> float:
        """6 (a+^4 + a-^4) / (a+^2 + a-^2)^2 - 1; equals 5 for ReLU."""
        s2 = self.a_plus**2 + self.a_minus**2
        return 6.0 * (self.a_plus**4 + self.a_minus**4) / s2**2 - 1.0


def correlation_step(eps: float, p: HomogParams) -> float:
    """One layer of the critical correlation map, eps = (1 - Corr) / 2."""
    if not -_CLAMP <= eps <= 1.0 + _CLAMP:
        raise OutOfRange("eps must lie in [0, 1]")
    eps = min(max(eps, 0.0), 1.0)
    r = math.sqrt(eps)
    C_W = p.C_W
    rhs = (2.0 * C_W * (p.a_plus - p.a_minus) ** 2 / math.pi) * (
        0.5 * math.sqrt(eps * (1.0 - eps)) + (0.5 - eps) * math.acos(r)
    ) + C_W * p.a_plus * p.a_minus * (1.0 - 2.0 * eps)
    return 0.5 * (1.0 - rhs)


def correlation_trajectory(eps0: float, L: int, p: HomogParams) -> np.ndarray:
    """eps^(1) .. eps^(L), starting from eps^(1) = eps0."""
    out = np.empty(L)
    e = float(eps0)
    for i in range(L):
        out[i] = e
        e = correlation_step(e, p)
    return out


def correlation_from_inputs(x, y) -> float:
    """Layer-1 eps for two inputs of equal norm (C_b = 0)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx, ny = float(x @ x), float(y @ y)
    if nx == 0.0 or not math.isclose(nx, ny, rel_tol=1e-12):
        raise OutOfRange("the correlation map needs non-zero inputs of equal norm")
    return 0.5 * (1.0 - float(x @ y) / nx)


def correlation_asymptote(ell: int, p: HomogParams | None = None) -> float:
    """Reference asymptote (2 / (3 pi)) ell^-2 for eps^(ell)."""
    if ell < 1:
        raise OutOfRange("ell must be >= 1")
    return 2.0 / (3.0 * math.pi) / ell**2


def correlation_asymptote_full(ell: int, p: HomogParams) -> float:
    """Companion form 2 (a+ - a-)^2 / (3 pi (a+^2 + a-^2)) ell^-2 for 1 - Corr."""
    if ell < 1:
        raise OutOfRange("ell must be >= 1")
    return 2.0 * (p.a_plus - p.a_minus) ** 2 / (3.0 * math.pi * (p.a_plus**2 + p.a_minus**2)) / ell**2


def correlation_cubic_coefficient(p: HomogParams) -> float:
    """c in the small-eps expansion eps' = eps - c eps^{3/2} + O(eps^{5/2})."""
    return 2.0 * p.C_W * (p.a_plus - p.a_minus) ** 2 / (3.0 * math.pi)


def correlation_asymptote_derived(ell: int, p: HomogParams) -> float:
    """4 / (c^2 ell^2): the decay implied by the cubic coefficient c (9 pi^2 / 4 for ReLU)."""
    if ell < 1:
        raise OutOfRange("ell must be >= 1")
    return 4.0 / correlation_cubic_coefficient(p) ** 2 / ell**2


def kappa4_closed_form(norm_sq_over_n0: float, widths: Sequence[int], p: HomogParams) -> float:
    """K^2 * bracket * sum_l 1/n_l with K = C_W |x|^2 / n0."""
    K = p.C_W * norm_sq_over_n0
    return K**2 * p.bracket * float(sum(1.0 / n for n in widths))


def lognormal_limit_params(xi: float, p: HomogParams) -> tuple[float, float]:
    """(mu, sigma^2) of the limiting log radial factor; mu = sigma^2 = xi * bracket / 4."""
    if xi < 0:
        raise OutOfRange("xi must be >= 0")
    v = 0.25 * xi * p.bracket
    return v, v


def _exact_block(spec: NetworkSpec, p: HomogParams, seed: int, b: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    rng = block_rng(seed, STREAM_EXACT, b)
    widths = np.asarray(spec.widths, dtype=np.int64)
    Z1 = rng.standard_normal(m)
    log_r = np.zeros(m)
    if widths.size:
        k = rng.binomial(widths, 0.5, size=(m, widths.size))
        chi_plus = 2.0 * rng.standard_gamma(k / 2.0)
        chi_minus = 2.0 * rng.standard_gamma((widths - k) / 2.0)
        s = (p.C_W / widths) * (p.a_plus**2 * chi_plus + p.a_minus**2 * chi_minus)
        with np.errstate(divide="ignore"):
            log_r = 0.5 * np.log(s).sum(axis=1)
    return Z1, log_r


def sample_exact(
    spec: NetworkSpec,
    n_samples: int,
    seed: int = 0,
    *,
    return_radial: bool = False,
    workers: int | None = None,
) -> np.ndarray:
    """Draws of the output z^(L+1) from its exact finite-width law.

    z = Z_1 sqrt(C_W |x|^2 / n0) prod_l sqrt((C_W / n_l) sum_j d_j^2 Z_j^2),
    with d_j = a+ or a- with probability 1/2.  Logs of the radial factors are
    summed and exponentiated once.  With ``return_radial`` the log radial
    factor log R is returned instead of z.
    """
    p = HomogParams.from_nl(spec.nl)
    if n_samples < 1:
        raise OutOfRange("n_samples must be >= 1")
    K1 = p.C_W * spec.norm_sq_over_n0
    blocks = map_blocks(lambda b, m: _exact_block(spec, p, seed, b, m), n_samples, workers)
    Z1 = np.concatenate([z for z, _ in blocks])
    log_r = np.concatenate([r for _, r in blocks])
    if return_radial:
        return log_r
    return Z1 * math.sqrt(K1) * np.exp(log_r)


__all__ = [
    "HomogParams",
    "correlation_step",
    "correlation_trajectory",
    "correlation_from_inputs",
    "correlation_asymptote",
    "correlation_asymptote_full",
    "correlation_asymptote_derived",
    "correlation_cubic_coefficient",
    "kappa4_closed_form",
    "lognormal_limit_params",
    "sample_exact",
]
