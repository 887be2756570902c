"""Single-input cumulant hierarchy and the kernel recursion.

Cumulants use the normalization kappa_{2k} = kappa(z, ..., z) / (2k-1)!!,
so raw joint cumulants of Monte Carlo samples must be divided by 3, 15
and 105 before comparing with ``k4``, ``k6``, ``k8``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .crit import CriticalTuning, chi_parallel, mean_sigma_sq, require_kstar_zero, tune_critical
from .errors import BadOrder, OutOfRange, ZeroInput
from .gauss import check_psd2, expect2, t_functional
from .nonlin import Nonlinearity, eval as sigma_eval, taylor_a

EULER_GAMMA = 0.5772156649015329

C4 = 2.0 / 3.0
C6 = 28.0 / 15.0
C8 = 8756.0 / 315.0
_C2K = {2: C4, 3: C6, 4: C8}

K8_CAVEAT_XI = 0.5


@dataclass(frozen=True)
class CumulantState:
    ell: int
    K: float
    k4: float = 0.0
    k6: float = 0.0
    k8: float = 0.0

    @property
    def k4_hat(self) -> float:
        return self.k4 / self.K**2 if self.K else 0.0

    @property
    def k6_hat(self) -> float:
        return self.k6 / self.K**3 if self.K else 0.0

    @property
    def k8_hat(self) -> float:
        return self.k8 / self.K**4 if self.K else 0.0


@dataclass(frozen=True)
class NetworkSpec:
    """A fully connected network: input x in R^{n0}, hidden widths n_1..n_L."""

    n0: int
    widths: tuple[int, ...]
    nl: Nonlinearity
    input_x: tuple[float, ...]
    n_out: int = 1
    tuning: CriticalTuning | None = None
    C_b_override: float | None = None
    C_W_override: float | None = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "input_x", tuple(float(v) for v in self.input_x))
        if self.n0 < 1 or len(self.input_x) != self.n0:
            raise OutOfRange("input_x must have length n0 >= 1")
        if any(w < 1 for w in self.widths) or self.n_out < 1:
            raise OutOfRange("all widths must be >= 1")
        if self.tuning is None and (self.C_b_override is None or self.C_W_override is None):
            object.__setattr__(self, "tuning", tune_critical(self.nl))

    @property
    def C_b(self) -> float:
        return self.tuning.C_b if self.C_b_override is None else float(self.C_b_override)

    @property
    def C_W(self) -> float:
        return self.tuning.C_W if self.C_W_override is None else float(self.C_W_override)

    @property
    def L(self) -> int:
        return len(self.widths)

    @property
    def x(self) -> np.ndarray:
        return np.asarray(self.input_x)

    @property
    def norm_sq_over_n0(self) -> float:
        return float(np.dot(self.x, self.x)) / self.n0

    @property
    def K1(self) -> float:
        """Layer-1 variance C_b + C_W |x|^2 / n0."""
        return self.C_b + self.C_W * self.norm_sq_over_n0

    @property
    def xi(self) -> float:
        return self.L / float(np.mean(self.widths)) if self.widths else 0.0


def constant_width_spec(nl: Nonlinearity, n: int, L: int, x: Sequence[float], **kw) -> NetworkSpec:
    return NetworkSpec(n0=len(x), widths=(n,) * L, nl=nl, input_x=tuple(x), **kw)


# ---------------------------------------------------------------- kernels


def kernel_step(K: float, C_b: float, C_W: float, nl: Nonlinearity) -> float:
    """K' = C_b + C_W <sigma^2>_K."""
    return C_b + C_W * mean_sigma_sq(nl, K)


def kernel_pair_step(K2, C_b: float, C_W: float, nl: Nonlinearity) -> tuple[float, float, float]:
    """One layer of the two-input kernel recursion."""
    kaa, kab, kbb = check_psd2(K2)
    s = lambda a, b: sigma_eval(nl, a) * sigma_eval(nl, b)  # noqa: E731
    off = C_b + C_W * expect2(s, (kaa, kab, kbb), piecewise=not nl.smooth)
    return kernel_step(kaa, C_b, C_W, nl), off, kernel_step(kbb, C_b, C_W, nl)


# ---------------------------------------------------------------- cumulants


@dataclass(frozen=True)
class TFunctionals:
    T02: float
    T03: float
    T04: float
    T22: float
    T23: float
    T41: float
    T42: float
    chi: float


def t_functionals(K: float, C_W: float, nl: Nonlinearity) -> TFunctionals:
    if K == 0.0:
        # every centred power vanishes at K = 0; chi from the Taylor value
        return TFunctionals(0, 0, 0, 0, 0, 0, 0, chi_parallel(nl, C_W, 0.0))
    T = lambda i, j: t_functional(nl, K, i, j, C_W)  # noqa: E731
    return TFunctionals(
        T02=T(0, 2), T03=T(0, 3), T04=T(0, 4), T22=T(2, 2), T23=T(2, 3),
        T41=T(4, 1), T42=T(4, 2), chi=chi_parallel(nl, C_W, K),
    )


def cumulant_update(k4: float, k6: float, k8: float, n: float, t: TFunctionals) -> tuple[float, float, float]:
    """Right-hand sides of the 4th/6th/8th cumulant recursions.

    ``n = inf`` zeroes every 1/n source.
    """
    inv = 0.0 if math.isinf(n) else 1.0 / n
    c = t.chi
    k4n = t.T02 * inv + c**2 * k4
    k6n = (
        t.T03 * inv**2
        + 1.5 * t.T22 * inv * c * k4
        - 0.375 * t.T41 * (c * k4) ** 2
        + c**3 * k6
    )
    k8n = (
        inv**3 * (t.T04 - 3 * t.T02**2)
        + inv**2 * (2 * t.T23 * c - 12 * t.T02 * c**2 + 1.5 * t.T22**2 - 1.5 * t.T41 * t.T02) * k4
        - inv * (2 * t.T22 * t.T41 * c - 0.5 * t.T42 * c**2 + c**4) * k4**2
        + inv * (5 * t.T02 * t.T41 * c + 12 * t.T22 * c**2) * k6
        + (3.0 / 32.0) * t.T41**2 * c**2 * k4**3
        - 0.5 * c**3 * t.T41 * k4 * k6
        + c**4 * k8
    )
    return k4n, k6n, k8n


def cumulant_step(state: CumulantState, n_ell: float, C_W: float, nl: Nonlinearity, C_b: float = 0.0) -> CumulantState:
    """Advance (K, k4, k6, k8) by one layer of width ``n_ell``.

    T-functionals are evaluated at the infinite-width kernel K.
    """
    if not (n_ell >= 1):
        raise OutOfRange("layer width must be >= 1")
    t = t_functionals(state.K, C_W, nl)
    k4, k6, k8 = cumulant_update(state.k4, state.k6, state.k8, n_ell, t)
    return CumulantState(state.ell + 1, kernel_step(state.K, C_b, C_W, nl), k4, k6, k8)


def run_hierarchy(spec: NetworkSpec) -> list[CumulantState]:
    """States for layers 1 .. L+1 (the last one is the network output)."""
    states = [CumulantState(1, spec.K1)]
    for n in spec.widths:
        states.append(cumulant_step(states[-1], n, spec.C_W, spec.nl, spec.C_b))
    return states


def k8_caveat(spec: NetworkSpec) -> bool:
    """True when dropped higher-order terms can rival the 8th cumulant."""
    return spec.xi > K8_CAVEAT_XI


def predict_normalized(xi: float, k: int) -> float:
    """Large-depth normalized cumulant C_{2k} xi^{k-1} for the K*=0 class."""
    if k not in _C2K:
        raise BadOrder("k must be 2, 3 or 4")
    if xi < 0:
        raise OutOfRange("xi must be >= 0")
    return _C2K[k] * xi ** (k - 1)


# ---------------------------------------------------------------- asymptotics


@dataclass
class LinearRecursion:
    values: np.ndarray
    asymptote: Callable[[float], float] | None


def solve_linear_recursion(
    xi_seq: Callable[[int], float],
    zeta_seq: Callable[[int], float],
    a0: float,
    L: int,
    *,
    C1: float | None = None,
    psi: float | None = None,
    C2: float | None = None,
) -> LinearRecursion:
    """Iterate a_{l+1} = xi_l + (1 - zeta_l) a_l from a_1 = a0.

    ``values[l-1]`` is a_l for l = 1..L.  If (C1, psi, C2) are given, the
    returned asymptote is l^{1-psi} C1 / (1 - psi + C2) + e^{-C2 gamma} l^{-C2} a0.
    """
    vals = np.empty(L)
    a = float(a0)
    for ell in range(1, L + 1):
        vals[ell - 1] = a
        z = zeta_seq(ell)
        if not 0.0 <= z <= 1.0:
            raise OutOfRange(f"zeta_{ell} = {z} outside [0, 1]")
        a = xi_seq(ell) + (1.0 - z) * a
    asym = None
    if C1 is not None and psi is not None and C2 is not None:
        if C2 < 1:
            raise OutOfRange("the closed form needs C2 >= 1")
        if math.isclose(psi, C2 + 1):
            raise OutOfRange("psi = C2 + 1 is the excluded logarithmic case")

        def asym(ell: float) -> float:
            return ell ** (1 - psi) * C1 / (1 - psi + C2) + math.exp(-C2 * EULER_GAMMA) * ell ** (-C2) * a0

    return LinearRecursion(vals, asym)


def kstar_zero_kernel_asymptote(ell: int, nl: Nonlinearity) -> float:
    """K^(l) ~ 1 / (a l) at criticality in the K*=0 class."""
    require_kstar_zero(nl)
    return 1.0 / (taylor_a(nl) * ell)


def kernel_trajectory(K1: float, L: int, C_b: float, C_W: float, nl: Nonlinearity) -> np.ndarray:
    """K^(1) .. K^(L) of the infinite-width recursion."""
    out = np.empty(L)
    K = float(K1)
    for i in range(L):
        out[i] = K
        K = kernel_step(K, C_b, C_W, nl)
    return out


def require_nonzero_input(spec: NetworkSpec) -> None:
    if not np.any(spec.x):
        raise ZeroInput("input_x must be non-zero")


__all__ = [
    "CumulantState",
    "NetworkSpec",
    "constant_width_spec",
    "kernel_step",
    "kernel_pair_step",
    "cumulant_step",
    "cumulant_update",
    "t_functionals",
    "run_hierarchy",
    "predict_normalized",
    "solve_linear_recursion",
    "kstar_zero_kernel_asymptote",
    "kernel_trajectory",
    "k8_caveat",
    "replace",
]
