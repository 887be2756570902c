"""Input-derivative hierarchy at a single input.

Index 0 is the pre-activation z, indices 1 and 2 are its derivatives
d1 z, d2 z along two input coordinates.  At each layer (z, d1 z, d2 z) of
one neuron is approximately Gaussian with covariance K_(ij), and the next
layer's collective observables are width averages of

    F00 = s^2, F10 = s s' d1, F20 = s s' d2,
    F11 = s'^2 d1^2, F22 = s'^2 d2^2, F12 = s'^2 d1 d2.

Every Gaussian bracket of such a product is reduced by Wick contraction of
the d's (integration by parts) to a univariate bracket <d^m (s^a s'^b)>_K00,
so no 3-D quadrature is needed.  The recursions below are the generic
first-order expansion in 1/n; on each displayed special case they agree
term by term with the hand-derived systems.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Iterable

import numpy as np

from .crit import CriticalTuning, require_kstar_zero
from .errors import NotPSD, OutOfRange, ZeroInput
from .gauss import PSD_TOL, Bracket
from .hierarchy import EULER_GAMMA, NetworkSpec
from .nonlin import Nonlinearity, taylor_a

PAIRS = ("00", "10", "20", "11", "22", "12")
CANONICAL = (
    "k0000", "k1000", "k1010", "k1020", "k1100", "k1200",
    "k1110", "k1210", "k1120", "k1111", "k1122", "k1212",
)
MIRRORS = ("k2000", "k2020", "k2200", "k2220", "k1220", "k2210", "k2222", "k1112", "k2212")

_SWAP_PAIR = {"00": "00", "10": "20", "20": "10", "11": "22", "22": "11", "12": "12"}


def _pair(i: int, j: int) -> str:
    i, j = max(i, j), min(i, j)
    return "12" if (i, j) == (2, 1) else f"{i}{j}"


def _key(p: str, q: str) -> str:
    """Field name for kappa_{(p)(q)}; both orders of the two pairs map to one name."""
    name = f"k{p}{q}"
    alt = f"k{q}{p}"
    for cand in (name, alt):
        if cand in CANONICAL or cand in MIRRORS:
            return cand
    raise KeyError(name)


# ---------------------------------------------------------------- states


@dataclass(frozen=True)
class DerivKernelState:
    ell: int
    K00: float
    K10: float
    K20: float
    K11: float
    K22: float
    K12: float

    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.K00, self.K10, self.K20],
                [self.K10, self.K11, self.K12],
                [self.K20, self.K12, self.K22],
            ]
        )

    def get(self, i: int, j: int) -> float:
        return float(self.matrix()[i, j])

    def swap(self) -> "DerivKernelState":
        return replace(self, K10=self.K20, K20=self.K10, K11=self.K22, K22=self.K11)

    def check_psd(self) -> None:
        M = self.matrix()
        if not np.all(np.isfinite(M)):
            raise NotPSD("derivative kernel has non-finite entries")
        lam = np.linalg.eigvalsh(M)
        if lam[0] < -PSD_TOL * max(1.0, float(np.max(np.abs(lam)))):
            raise NotPSD(f"derivative kernel is not PSD (min eigenvalue {lam[0]:.3g})")


@dataclass(frozen=True)
class DerivFourthState:
    """kappa_{(ab)(cd)}: covariances of the collective observables.

    The twelve canonical entries are accompanied by their 1<->2 mirrors.
    The step is a pure function of the state, and the canonical entries'
    recursions read the mirrors, so the mirrors are stored.
    """

    ell: int
    k0000: float = 0.0
    k1000: float = 0.0
    k1010: float = 0.0
    k1020: float = 0.0
    k1100: float = 0.0
    k1200: float = 0.0
    k1110: float = 0.0
    k1210: float = 0.0
    k1120: float = 0.0
    k1111: float = 0.0
    k1122: float = 0.0
    k1212: float = 0.0
    k2000: float = 0.0
    k2020: float = 0.0
    k2200: float = 0.0
    k2220: float = 0.0
    k1220: float = 0.0
    k2210: float = 0.0
    k2222: float = 0.0
    k1112: float = 0.0
    k2212: float = 0.0

    def get(self, p: str, q: str) -> float:
        return getattr(self, _key(p, q))

    def swap(self) -> "DerivFourthState":
        vals = {}
        for f in fields(self):
            if f.name == "ell":
                continue
            p, q = f.name[1:3], f.name[3:5]
            vals[_key(_SWAP_PAIR[p], _SWAP_PAIR[q])] = getattr(self, f.name)
        return DerivFourthState(self.ell, **vals)

    def canonical(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in CANONICAL}


@dataclass(frozen=True)
class SCorrectionState:
    ell: int
    S00: float = 0.0
    S10: float = 0.0
    S20: float = 0.0
    S11: float = 0.0
    S22: float = 0.0
    S12: float = 0.0

    def get(self, i: int, j: int) -> float:
        return getattr(self, "S" + _pair(i, j))


# ---------------------------------------------------------------- Wick engine

# A term is (a, b, m, p, q) -> coefficient, standing for
#   d^m/dz^m [s(z)^a s'(z)^b] * d1^p * d2^q.
Poly = dict[tuple[int, int, int, int, int], float]

_OBSERVABLE: dict[str, Poly] = {
    "00": {(2, 0, 0, 0, 0): 1.0},
    "10": {(1, 1, 0, 1, 0): 1.0},
    "20": {(1, 1, 0, 0, 1): 1.0},
    "11": {(0, 2, 0, 2, 0): 1.0},
    "22": {(0, 2, 0, 0, 2): 1.0},
    "12": {(0, 2, 0, 1, 1): 1.0},
}


def _d(poly: Poly, j: int) -> Poly:
    """Partial derivative with respect to variable j (0 = z, 1 = d1, 2 = d2)."""
    out: Poly = {}
    for (a, b, m, p, q), c in poly.items():
        if j == 0:
            key, f = (a, b, m + 1, p, q), 1
        elif j == 1:
            key, f = (a, b, m, p - 1, q), p
        else:
            key, f = (a, b, m, p, q - 1), q
        if f:
            out[key] = out.get(key, 0.0) + c * f
    return out


def _mul(x: Poly, y: Poly) -> Poly:
    out: Poly = {}
    for (a1, b1, m1, p1, q1), c1 in x.items():
        for (a2, b2, m2, p2, q2), c2 in y.items():
            if m1 or m2:
                raise ValueError("products are only formed before differentiation")
            key = (a1 + a2, b1 + b2, 0, p1 + p2, q1 + q2)
            out[key] = out.get(key, 0.0) + c1 * c2
    return out


class Gaussian3:
    """Expectations of polynomials in (d1, d2) times functions of z."""

    def __init__(self, st: DerivKernelState, nl: Nonlinearity, nodes: int | None = None):
        self.st = st
        self.br = Bracket(nl, st.K00, nodes)

    def _monomial(self, a: int, b: int, m: int, p: int, q: int) -> float:
        st = self.st
        total = 0.0
        # i pairs (d1 d1), j pairs (d2 d2), k pairs (d1 d2); the rest contract with z
        for k in range(min(p, q) + 1):
            for i in range((p - k) // 2 + 1):
                for j in range((q - k) // 2 + 1):
                    u1 = p - 2 * i - k
                    u2 = q - 2 * j - k
                    count = (
                        math.factorial(p) * math.factorial(q)
                        / (math.factorial(i) * 2**i * math.factorial(j) * 2**j
                           * math.factorial(k) * math.factorial(u1) * math.factorial(u2))
                    )
                    w = st.K11**i * st.K22**j * st.K12**k * st.K10**u1 * st.K20**u2
                    if w == 0.0:
                        continue
                    total += count * w * self.br(a, b, m + u1 + u2)
        return total

    def expect(self, poly: Poly) -> float:
        return sum(c * self._monomial(*key) for key, c in poly.items() if c)


def _deriv_table(g: Gaussian3, order: int) -> dict[tuple[str, tuple[int, ...]], float]:
    """<d_{j1} .. d_{jk} F_p> for every observable and every index tuple of length ``order``."""
    out = {}
    for p, F in _OBSERVABLE.items():
        for js in itertools.product(range(3), repeat=order):
            poly = F
            for j in js:
                poly = _d(poly, j)
            out[(p, js)] = g.expect(poly) if poly else 0.0
    return out


def _all_pairs() -> Iterable[tuple[str, str]]:
    for f in CANONICAL + MIRRORS:
        yield f, f[1:3], f[3:5]


# ---------------------------------------------------------------- steps


def seed_state(x, C_b: float, C_W: float, coords: tuple[int, int] = (0, 1)) -> DerivKernelState:
    """Layer-1 derivative kernel for input ``x`` and derivative coordinates ``coords``."""
    x = np.asarray(x, dtype=float)
    n0 = x.size
    i1, i2 = coords
    if n0 < 2 or not (0 <= i1 < n0 and 0 <= i2 < n0) or i1 == i2:
        raise OutOfRange("need two distinct derivative coordinates of an input with n0 >= 2")
    return DerivKernelState(
        ell=1,
        K00=C_b + C_W * float(x @ x) / n0,
        K10=C_W * x[i1] / n0,
        K20=C_W * x[i2] / n0,
        K11=C_W / n0,
        K22=C_W / n0,
        K12=0.0,
    )


def deriv_kernel_step(st: DerivKernelState, C_b: float, C_W: float, nl: Nonlinearity, nodes: int | None = None) -> DerivKernelState:
    """K'_(ab) = C_b [ab = 00] + C_W <F_ab>."""
    st.check_psd()
    g = Gaussian3(st, nl, nodes)
    new = {f"K{p}": C_W * g.expect(F) for p, F in _OBSERVABLE.items()}
    new["K00"] += C_b
    return DerivKernelState(ell=st.ell + 1, **new)


def deriv_fourth_step(
    f4: DerivFourthState,
    st: DerivKernelState,
    n_ell: float,
    C_W: float,
    nl: Nonlinearity,
    nodes: int | None = None,
) -> DerivFourthState:
    """kappa'_{(p)(q)} = (C_W^2/n) Cov(F_p, F_q)
    + (C_W^2/4) sum kappa_{(j1 j2)(j3 j4)} <d_j1 d_j2 F_p> <d_j3 d_j4 F_q>.

    ``n_ell = inf`` zeroes the source term.
    """
    if not n_ell >= 1:
        raise OutOfRange("layer width must be >= 1")
    g = Gaussian3(st, nl, nodes)
    mean = {p: g.expect(F) for p, F in _OBSERVABLE.items()}
    d2 = _deriv_table(g, 2)
    inv = 0.0 if math.isinf(n_ell) else 1.0 / n_ell
    idx = list(itertools.product(range(3), repeat=2))
    kap = {(js, ks): f4.get(_pair(*js), _pair(*ks)) for js in idx for ks in idx}
    out = {}
    for name, p, q in _all_pairs():
        src = 0.0
        if inv:
            src = g.expect(_mul(_OBSERVABLE[p], _OBSERVABLE[q])) - mean[p] * mean[q]
        hom = 0.0
        for js in idx:
            dp = d2[(p, js)]
            if dp == 0.0:
                continue
            for ks in idx:
                c = kap[(js, ks)]
                if c:
                    hom += c * dp * d2[(q, ks)]
        out[name] = C_W**2 * (inv * src + 0.25 * hom)
    return DerivFourthState(ell=f4.ell + 1, **out)


def s_correction_step(
    s: SCorrectionState,
    st: DerivKernelState,
    f4: DerivFourthState,
    n_ell: float,
    C_W: float,
    nl: Nonlinearity,
    nodes: int | None = None,
) -> SCorrectionState:
    """S'_(p) = C_W [ 1/2 sum S_(ij) <d_i d_j F_p> + 1/8 sum kappa_{(j1j2)(j3j4)} <d_j1..d_j4 F_p> ].

    The kappa term is already O(1/n); ``n_ell`` only enters through it.
    """
    if not n_ell >= 1:
        raise OutOfRange("layer width must be >= 1")
    g = Gaussian3(st, nl, nodes)
    d2 = _deriv_table(g, 2)
    d4 = _deriv_table(g, 4)
    out = {}
    for p in PAIRS:
        lin = sum(s.get(i, j) * d2[(p, (i, j))] for i in range(3) for j in range(3))
        quart = 0.0
        for js in itertools.product(range(3), repeat=4):
            v = d4[(p, js)]
            if v:
                quart += f4.get(_pair(js[0], js[1]), _pair(js[2], js[3])) * v
        out["S" + p] = C_W * (0.5 * lin + 0.125 * quart)
    return SCorrectionState(ell=s.ell + 1, **out)


@dataclass
class DerivTrajectory:
    kernels: list[DerivKernelState]
    fourth: list[DerivFourthState]
    corrections: list[SCorrectionState]

    def row(self, i: int) -> dict[str, float]:
        k, f, s = self.kernels[i], self.fourth[i], self.corrections[i]
        r = asdict(k)
        r.update(f.canonical())
        r.update({k_: v for k_, v in asdict(s).items() if k_ != "ell"})
        return r


def run_derivs(spec: NetworkSpec, coords: tuple[int, int] = (0, 1), nodes: int | None = None) -> DerivTrajectory:
    """Kernels, fourth cumulants and S-corrections for layers 1 .. L+1."""
    C_b, C_W, nl = spec.C_b, spec.C_W, spec.nl
    st = seed_state(spec.x, C_b, C_W, coords)
    f4 = DerivFourthState(ell=1)
    s = SCorrectionState(ell=1)
    traj = DerivTrajectory([st], [f4], [s])
    for n in spec.widths:
        s = s_correction_step(s, st, f4, n, C_W, nl, nodes)
        f4 = deriv_fourth_step(f4, st, n, C_W, nl, nodes)
        st = deriv_kernel_step(st, C_b, C_W, nl, nodes)
        traj.kernels.append(st)
        traj.fourth.append(f4)
        traj.corrections.append(s)
    return traj


def normalized_fourth(f4: DerivFourthState, st: DerivKernelState) -> dict[str, float]:
    """kappa_{(p)(q)} / (K_p K_q) for the diagonal-pair entries."""
    K = {"00": st.K00, "11": st.K11, "22": st.K22}
    out = {}
    for name in ("k0000", "k1100", "k1111", "k1122", "k2200", "k2222"):
        p, q = name[1:3], name[3:5]
        den = K[p] * K[q]
        out[name] = getattr(f4, name) / den if den else 0.0
    # (12) has no diagonal kernel; normalize by K11 K22
    den = st.K11 * st.K22
    out["k1212"] = f4.k1212 / den if den else 0.0
    return out


# ---------------------------------------------------------------- asymptotics

# constants of the leading large-depth normalized cumulants, in units of xi
STATEMENT_CONSTANTS = {"k1100": -1.0 / 3.0, "k1111": 8.0 / 3.0, "k1122": 2.0 / 3.0}
PROOF_CONSTANTS = {"k1100": -2.0 / 3.0, "k1111": 7.0 / 3.0, "k1122": 4.0 / 3.0}


@dataclass(frozen=True)
class DerivAsymptotics:
    ell: int
    xi: float
    K00: float
    K10: float
    K11: float
    k1100_hat: float
    k1111_hat: float
    k1122_hat: float
    k0000_hat: float
    kappa00_factor: float
    kappa11_factor: float
    S00: float
    proof_constants: dict

    def to_json(self) -> dict:
        return asdict(self)


def deriv_asymptotics(ell: int, n: float, n0: int, x, nl: Nonlinearity, tuning: CriticalTuning) -> DerivAsymptotics:
    """Leading large-depth predictions at layer ``ell`` for the K*=0 class.

    ``proof_constants`` carries the alternative coefficients printed in
    some derivations; the engine and MC decide between them at runtime.
    """
    require_kstar_zero(nl)
    if ell < 1:
        raise OutOfRange("ell must be >= 1")
    x = np.asarray(x, dtype=float)
    a = taylor_a(nl)
    C_W = tuning.C_W
    xi = 0.0 if math.isinf(n) else ell / n
    return DerivAsymptotics(
        ell=ell,
        xi=xi,
        K00=1.0 / (a * ell),
        K10=C_W * math.exp(-2 * EULER_GAMMA) * x[0] / (n0 * ell**2),
        K11=C_W * math.exp(-EULER_GAMMA) / (n0 * ell),
        k1100_hat=STATEMENT_CONSTANTS["k1100"] * xi,
        k1111_hat=STATEMENT_CONSTANTS["k1111"] * xi,
        k1122_hat=STATEMENT_CONSTANTS["k1122"] * xi,
        k0000_hat=(2.0 / 3.0) * xi,
        kappa00_factor=1.0 - xi / 3.0,
        kappa11_factor=1.0 + xi / 3.0,
        S00=0.0 if math.isinf(n) else -1.0 / (3 * a * n),
        proof_constants={k: v * xi for k, v in PROOF_CONSTANTS.items()},
    )


# ---------------------------------------------------------------- EVGP


def evgp_constant(spec: NetworkSpec, nodes: int | None = None) -> float:
    """C = 3 <s'^4>/<s'^2>^2 * (|x|_4^4/n0) / (|x|^2/n0)^2 - 1 at K^(1)."""
    x = spec.x
    if not np.any(x):
        raise ZeroInput("input_x must be non-zero")
    br = Bracket(spec.nl, spec.K1, nodes)
    ratio_sigma = br(0, 4) / br(0, 2) ** 2
    m2 = float(np.mean(x**2))
    m4 = float(np.mean(x**4))
    return 3.0 * ratio_sigma * m4 / m2**2 - 1.0


def evgp_predict(spec: NetworkSpec, nodes: int | None = None) -> float:
    """Leading prediction C (1 + 8 xi / 3) for Var/mean^2 of first-layer squared gradients."""
    require_kstar_zero(spec.nl)
    return evgp_constant(spec, nodes) * (1.0 + 8.0 * spec.xi / 3.0)


__all__ = [
    "DerivKernelState",
    "DerivFourthState",
    "SCorrectionState",
    "DerivAsymptotics",
    "DerivTrajectory",
    "seed_state",
    "deriv_kernel_step",
    "deriv_fourth_step",
    "s_correction_step",
    "run_derivs",
    "normalized_fourth",
    "deriv_asymptotics",
    "evgp_constant",
    "evgp_predict",
    "STATEMENT_CONSTANTS",
    "PROOF_CONSTANTS",
    "CANONICAL",
    "MIRRORS",
]
