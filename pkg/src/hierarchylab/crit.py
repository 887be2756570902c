"""Criticality: susceptibilities, tuning of (C_b, C_W), universality classes."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import NoCriticalPoint, NotKStarZeroClass
from .gauss import expect1, weak_deriv_expect
from .nonlin import HOMOG1, Nonlinearity, eval as sigma_eval

HOMOG1_CLASS = "Homog1"
KSTAR_ZERO_CLASS = "KStarZero"
GENERIC_CLASS = "GenericCritical"

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 200
ODD_TOL = 1e-10


@dataclass(frozen=True)
class CriticalTuning:
    C_b: float
    C_W: float
    K_star: float
    cls: str

    def to_json(self) -> dict:
        d = asdict(self)
        d["class"] = d.pop("cls")
        return d


def _sigma_sq(nl: Nonlinearity):
    return lambda z: sigma_eval(nl, z) ** 2


def mean_sigma_sq(nl: Nonlinearity, K: float) -> float:
    return expect1(_sigma_sq(nl), K, piecewise=not nl.smooth)


def chi_parallel(nl: Nonlinearity, C_W: float, K: float) -> float:
    """chi_par(K) = (C_W / 2) <d^2 sigma^2>_K."""
    if K == 0.0:
        if nl.kind == HOMOG1:
            return C_W * (nl.a_plus**2 + nl.a_minus**2) / 2
        return C_W * nl.sigma1**2
    return 0.5 * C_W * weak_deriv_expect(_sigma_sq(nl), K, 2, piecewise=not nl.smooth)


def chi_perp(nl: Nonlinearity, C_W: float, K: float) -> float:
    """chi_perp(K) = C_W <sigma'^2>_K (a.e. derivative for kinked sigma)."""
    if K == 0.0 and nl.kind == HOMOG1:
        return C_W * (nl.a_plus**2 + nl.a_minus**2) / 2
    return C_W * expect1(lambda z: sigma_eval(nl, z, 1) ** 2, K, piecewise=not nl.smooth)


def is_odd(nl: Nonlinearity) -> bool:
    k = np.arange(64)
    z = 5.0 * np.cos(np.pi * (k + 0.5) / 64)
    return bool(np.all(np.abs(sigma_eval(nl, z) + sigma_eval(nl, -z)) <= ODD_TOL))


def classify(nl: Nonlinearity) -> str:
    if nl.kind == HOMOG1:
        return HOMOG1_CLASS
    if nl.smooth and is_odd(nl) and nl.sigma1 * nl.sigma3 < 0:
        return KSTAR_ZERO_CLASS
    return GENERIC_CLASS


KSTAR_MIN = 1e-6


def _newton_generic(nl: Nonlinearity, K0: float, C_W0: float) -> tuple[float, float]:
    """Solve chi_par(K*) = chi_perp(K*) = 1 for (K*, C_W)."""

    def residual(p):
        K, C_W = p
        return np.array([chi_perp(nl, C_W, K) - 1.0, chi_parallel(nl, C_W, K) - 1.0])

    p = np.array([K0, C_W0], dtype=float)
    r = residual(p)
    for _ in range(NEWTON_MAX_ITER):
        if np.max(np.abs(r)) < NEWTON_TOL:
            return float(p[0]), float(p[1])
        J = np.empty((2, 2))
        for k in range(2):
            h = 1e-6 * max(abs(p[k]), 1e-3)
            dp = np.zeros(2)
            dp[k] = h
            if p[k] - h > 0:
                J[:, k] = (residual(p + dp) - residual(p - dp)) / (2 * h)
            else:
                J[:, k] = (residual(p + dp) - r) / h
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise NoCriticalPoint("singular Jacobian in criticality Newton solve") from exc
        damping = 1.0
        while True:
            trial = p + damping * step
            if trial[0] > 0 and trial[1] > 0:
                r_trial = residual(trial)
                if np.max(np.abs(r_trial)) < np.max(np.abs(r)) or damping < 1e-6:
                    break
            damping *= 0.5
            if damping < 1e-12:
                raise NoCriticalPoint("Newton line search failed")
        p, r = trial, r_trial
    raise NoCriticalPoint(f"no convergence in {NEWTON_MAX_ITER} Newton iterations")


def tune_critical(nl: Nonlinearity, K_star: float = 1.0, generic: bool = False) -> CriticalTuning:
    """Choose (C_b, C_W) so that K* is a fixed point with chi_par = chi_perp = 1.

    For 1-homogeneous sigma every K >= 0 is critical; ``K_star`` is only
    the recorded representative.  With ``generic`` it seeds the Newton solve.
    """
    cls = classify(nl)
    if cls == HOMOG1_CLASS:
        return CriticalTuning(0.0, 2.0 / (nl.a_plus**2 + nl.a_minus**2), float(K_star), cls)
    if cls == KSTAR_ZERO_CLASS and not generic:
        return CriticalTuning(0.0, 1.0 / nl.sigma1**2, 0.0, cls)
    C_W0 = 1.0 / nl.sigma1**2 if nl.sigma1 else 1.0
    K, C_W = _newton_generic(nl, float(K_star), C_W0)
    if K < KSTAR_MIN:
        raise NoCriticalPoint(f"Newton solve collapsed onto K* = 0 (K = {K:.3g})")
    C_b = K - C_W * mean_sigma_sq(nl, K)
    if C_b < -NEWTON_TOL:
        raise NoCriticalPoint(f"critical point needs C_b = {C_b} < 0")
    return CriticalTuning(max(C_b, 0.0), C_W, K, GENERIC_CLASS)


def kstar_unique(nl: Nonlinearity, tuning: CriticalTuning, grid: int = 200) -> bool:
    """Numerical check that K* = 0 is the only fixed point on (0, 100]."""
    Ks = np.geomspace(1e-4, 100.0, grid)
    gaps = [tuning.C_b + tuning.C_W * mean_sigma_sq(nl, K) - K for K in Ks]
    return bool(all(g < 0 for g in gaps))


def require_kstar_zero(nl: Nonlinearity) -> None:
    if classify(nl) != KSTAR_ZERO_CLASS:
        raise NotKStarZeroClass(f"{nl.name} is not in the K*=0 universality class")


__all__ = [
    "CriticalTuning",
    "chi_parallel",
    "chi_perp",
    "classify",
    "tune_critical",
    "kstar_unique",
    "mean_sigma_sq",
    "HOMOG1_CLASS",
    "KSTAR_ZERO_CLASS",
    "GENERIC_CLASS",
]

