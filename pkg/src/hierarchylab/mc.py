"""Monte Carlo oracle for finite-width networks.

Two routes sample the same law:

* ``forward_with_grads`` draws every weight matrix explicitly and runs the
  chain rule.  It is the reference, O(n^2) per layer.
* The estimators use a sampler that is exact in law and O(n) per layer.
  Given post-activation jets S = [sigma, sigma' d1 z, sigma' d2 z] of a
  layer, the rows of W S are i.i.d. N(0, (C_W/n) S^T S), so the next layer
  is drawn from a k x k Gram factor.  Backward signals use the conditional
  law of W^T v given the forward constraint W s = u.

Even cumulants are Rao-Blackwellized: given the last hidden layer the
output is exactly Gaussian with covariance G = C_b e00 + (C_W/n) S^T S, so
E z^{2k} = (2k-1)!! E[G00^k] and kappa_{(ab)(cd)} = Cov(G_ab, G_cd).  Odd
cumulants come from raw output samples.  Cumulants follow the
kappa_{2k} = kappa(z,..,z) / (2k-1)!! normalization of ``hierarchy``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from ._backend import kernels
from ._kernels_py import ACT_HOMOG1, ACT_TANH, chol3
from ._rng import block_rng, map_blocks
from .derivs import CANONICAL, MIRRORS
from .errors import InsufficientSamples, OutOfRange, ZeroInput
from .hierarchy import NetworkSpec
from .nonlin import HOMOG1, TANH, eval as sigma_eval

N_BATCHES = 20
MIN_SAMPLES = 10_000
POWER_FACTOR = 5.0

STREAM_EXPLICIT = 1
STREAM_CUMULANTS = 2
STREAM_DERIVS = 3
STREAM_EVGP = 4


@dataclass(frozen=True)
class MCEstimate:
    value: float
    std_error: float
    n_samples: int
    n_batches: int

    def z(self, pred: float) -> float:
        if self.std_error == 0.0:
            return 0.0 if pred == self.value else math.copysign(math.inf, self.value - pred)
        return (self.value - pred) / self.std_error

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class GradStats:
    grad_mean: MCEstimate
    grad_var: MCEstimate
    ratio: MCEstimate

    def to_json(self) -> dict:
        return {k: getattr(self, k).to_json() for k in ("grad_mean", "grad_var", "ratio")}


@dataclass(frozen=True)
class VerifyReport:
    passed: bool
    z: float
    pred: float
    value: float
    std_error: float
    z_max: float
    status: str

    def to_json(self) -> dict:
        return asdict(self)


def verify(pred: float, est: MCEstimate, z_max: float = 3.0, check_power: bool = False) -> VerifyReport:
    """Pass iff |pred - value| <= z_max * std_error.

    With ``check_power`` a prediction smaller than POWER_FACTOR standard
    errors is reported as "underpowered" (and passes vacuously).
    """
    z = est.z(pred)
    if check_power and abs(pred) < POWER_FACTOR * est.std_error:
        return VerifyReport(True, z, pred, est.value, est.std_error, z_max, "underpowered")
    ok = abs(pred - est.value) <= z_max * est.std_error
    return VerifyReport(ok, z, pred, est.value, est.std_error, z_max, "pass" if ok else "fail")


# ---------------------------------------------------------------- explicit route


def _draw_weights(spec: NetworkSpec, rng: np.random.Generator):
    dims = (spec.n0,) + spec.widths + (spec.n_out,)
    Ws, bs = [], []
    for n_in, n_out in zip(dims[:-1], dims[1:]):
        Ws.append(rng.standard_normal((n_out, n_in)) * math.sqrt(spec.C_W / n_in))
        bs.append(rng.standard_normal(n_out) * math.sqrt(spec.C_b))
    return Ws, bs


def forward_with_grads(spec: NetworkSpec, seed: int, draw: int = 0, x=None):
    """One explicit network draw.

    Returns (z_out [n_out], dz_dx [n_out, n0], dz_dW1 [n_out, n1, n0]); for
    L = 0 the first layer is the output layer and n1 = n_out.
    """
    rng = block_rng(seed, STREAM_EXPLICIT, draw)
    Ws, bs = _draw_weights(spec, rng)
    x = spec.x if x is None else np.asarray(x, dtype=float)
    nl = spec.nl
    h = x
    zs = []
    for W, b in zip(Ws[:-1], bs[:-1]):
        z = W @ h + b
        zs.append(z)
        h = sigma_eval(nl, z)
    z_out = Ws[-1] @ h + bs[-1]
    J = Ws[-1]
    for W, z in zip(reversed(Ws[:-1]), reversed(zs)):
        J = (J * sigma_eval(nl, z, 1)) @ W
    # J is now dz/dx; dz/dz^(1) is the same product stopped before W1
    if zs:
        D = Ws[-1]
        for W, z in zip(reversed(Ws[1:-1]), reversed(zs[1:])):
            D = (D * sigma_eval(nl, z, 1)) @ W
        D = D * sigma_eval(nl, zs[0], 1)
    else:
        D = np.eye(spec.n_out)
    dW1 = D[:, :, None] * x[None, None, :]
    return z_out, J, dW1


# ---------------------------------------------------------------- fast route


def _act_code(spec: NetworkSpec) -> tuple[int, float, float] | None:
    nl = spec.nl
    if nl.kind == HOMOG1:
        return ACT_HOMOG1, nl.a_plus, nl.a_minus
    if nl.kind == TANH:
        return ACT_TANH, 0.0, 0.0
    return None


def _make_stepper(spec: NetworkSpec) -> Callable:
    code = _act_code(spec)
    nl = spec.nl
    if code is not None:
        c_, ap, am = code
        return lambda S, xi, bias, c: kernels.jet_forward(S, xi, bias, c, c_, ap, am)

    def generic(S, xi, bias, c):
        G = c * np.einsum("mik,mil->mkl", S, S)
        L = chol3(G)
        Z = np.einsum("mjl,mkl->mjk", xi, L)
        Z0 = Z[:, :, 0] + bias
        out = np.empty_like(Z)
        out[:, :, 0] = sigma_eval(nl, Z0)
        out[:, :, 1:] = sigma_eval(nl, Z0, 1)[:, :, None] * Z[:, :, 1:]
        return out, Z0

    return generic


def _activate(spec: NetworkSpec, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    code = _act_code(spec)
    if code is not None:
        return kernels.activate(z, *code)
    return sigma_eval(spec.nl, z), sigma_eval(spec.nl, z, 1)


def _input_gram(spec: NetworkSpec, k: int, coords: tuple[int, int]) -> np.ndarray:
    x = spec.x
    cols = [x]
    for i in coords[: k - 1]:
        e = np.zeros(spec.n0)
        e[i] = 1.0
        cols.append(e)
    X = np.stack(cols, axis=1)
    G = (spec.C_W / spec.n0) * X.T @ X
    G[0, 0] += spec.C_b
    return G


def _jets_to_output_gram(spec: NetworkSpec, rng, m: int, k: int, coords) -> tuple[np.ndarray, np.ndarray]:
    """Output-layer Gram G (m, k, k) and per-layer mean z^2 (m, L+1)."""
    L = spec.L
    G1 = _input_gram(spec, k, coords)
    var = np.empty((m, L + 1))
    if L == 0:
        var[:, 0] = G1[0, 0]
        return np.broadcast_to(G1, (m, k, k)).copy(), var
    n1 = spec.widths[0]
    L1 = chol3(G1[None])[0]
    xi = rng.standard_normal((m, n1, k))
    Z = xi @ L1.T
    Z0 = Z[:, :, 0]
    s, ds = _activate(spec, Z0)
    S = np.empty_like(Z)
    S[:, :, 0] = s
    S[:, :, 1:] = ds[:, :, None] * Z[:, :, 1:]
    var[:, 0] = np.mean(Z0 * Z0, axis=1)
    step = _make_stepper(spec)
    sb = math.sqrt(spec.C_b)
    for ell in range(1, L):
        n_prev, n_next = spec.widths[ell - 1], spec.widths[ell]
        xi = rng.standard_normal((m, n_next, k))
        bias = sb * rng.standard_normal((m, n_next)) if sb else np.zeros((m, n_next))
        S, Z0 = step(S, xi, bias, spec.C_W / n_prev)
        var[:, ell] = np.mean(Z0 * Z0, axis=1)
    G = (spec.C_W / spec.widths[-1]) * np.einsum("mik,mil->mkl", S, S)
    G[:, 0, 0] += spec.C_b
    var[:, L] = G[:, 0, 0]
    return G, var


def _batched(stat: Callable[[dict], dict], data: dict, n: int) -> dict[str, MCEstimate]:
    full = stat(data)
    edges = np.linspace(0, n, N_BATCHES + 1).astype(int)
    per = [stat({k: v[a:b] for k, v in data.items()}) for a, b in zip(edges[:-1], edges[1:])]
    out = {}
    for key, val in full.items():
        arr = np.array([p[key] for p in per], dtype=float)
        se = float(np.std(arr, ddof=1) / math.sqrt(N_BATCHES))
        out[key] = MCEstimate(float(val), se, n, N_BATCHES)
    return out


def _require_samples(n_samples: int) -> None:
    if n_samples < MIN_SAMPLES:
        raise InsufficientSamples(f"need at least {MIN_SAMPLES} samples, got {n_samples}")


def _concat(blocks: list[dict]) -> dict:
    return {k: np.concatenate([b[k] for b in blocks]) for k in blocks[0]}


def _central(x: np.ndarray, p: int) -> float:
    return float(np.mean((x - x.mean()) ** p))


def _cumulant_stats(d: dict) -> dict:
    g = d["g00"]
    m2 = g.mean()
    m4 = 3.0 * np.mean(g**2)
    m6 = 15.0 * np.mean(g**3)
    m8 = 105.0 * np.mean(g**4)
    k4 = (m4 - 3 * m2**2) / 3.0
    k6 = (m6 - 15 * m4 * m2 + 30 * m2**3) / 15.0
    k8 = (m8 - 28 * m6 * m2 - 35 * m4**2 + 420 * m4 * m2**2 - 630 * m2**4) / 105.0
    za, zb = d["za"], d["zb"]
    out = {
        "k2": m2,
        "k4": k4,
        "k6": k6,
        "k8": k8,
        "k4_hat": k4 / m2**2,
        "k6_hat": k6 / m2**3,
        "k8_hat": k8 / m2**4,
        "k0000_cross": float(np.mean(za**2 * zb**2) - np.mean(za**2) * np.mean(zb**2)),
        "k3": _central(za, 3),
        "k5": _central(za, 5) - 10 * _central(za, 3) * _central(za, 2),
    }
    for ell in range(d["var"].shape[1]):
        out[f"var_{ell + 1}"] = float(np.mean(d["var"][:, ell]))
    return out


def estimate_cumulants(spec: NetworkSpec, n_samples: int, seed: int = 0, workers: int | None = None) -> dict[str, MCEstimate]:
    """Output cumulants k2..k8, normalized hats, odd k3/k5, and per-layer mean z^2.

    ``var_l`` is the width-averaged z^2 of layer l (l = L+1 is the output).
    """
    _require_samples(n_samples)

    def block(b, m):
        rng = block_rng(seed, STREAM_CUMULANTS, b)
        G, var = _jets_to_output_gram(spec, rng, m, 1, (0, 1))
        g = G[:, 0, 0]
        z = rng.standard_normal((m, 2)) * np.sqrt(g)[:, None]
        return {"g00": g, "za": z[:, 0], "zb": z[:, 1], "var": var}

    return _batched(_cumulant_stats, _concat(map_blocks(block, n_samples, workers)), n_samples)


_PAIR_IDX = {"00": (0, 0), "10": (1, 0), "20": (2, 0), "11": (1, 1), "22": (2, 2), "12": (1, 2)}


def _deriv_stats(d: dict) -> dict:
    G = d["G"]
    flat = {p: G[:, i, j] for p, (i, j) in _PAIR_IDX.items()}
    mean = {p: float(v.mean()) for p, v in flat.items()}
    out = {f"K{p}": mean[p] for p in _PAIR_IDX}
    for name in CANONICAL + MIRRORS:
        p, q = name[1:3], name[3:5]
        out[name] = float(np.mean(flat[p] * flat[q]) - mean[p] * mean[q])
    out["k0000_hat"] = out["k0000"] / mean["00"] ** 2
    out["k1100_hat"] = out["k1100"] / (mean["11"] * mean["00"])
    out["k1111_hat"] = out["k1111"] / mean["11"] ** 2
    out["k1122_hat"] = out["k1122"] / (mean["11"] * mean["22"])
    out["k1212_hat"] = out["k1212"] / (mean["11"] * mean["22"])
    za, zb = d["za"], d["zb"]
    cov = lambda a, b: float(np.mean(a * b) - a.mean() * b.mean())  # noqa: E731
    out["k1100_cross"] = cov(za[:, 1] ** 2, zb[:, 0] ** 2)
    out["k1111_cross"] = cov(za[:, 1] ** 2, zb[:, 1] ** 2)
    out["k1122_cross"] = cov(za[:, 1] ** 2, zb[:, 2] ** 2)
    out["k1212_cross"] = cov(za[:, 1] * za[:, 2], zb[:, 1] * zb[:, 2])
    return out


def estimate_deriv_cumulants(
    spec: NetworkSpec,
    n_samples: int,
    seed: int = 0,
    coords: tuple[int, int] = (0, 1),
    workers: int | None = None,
) -> dict[str, MCEstimate]:
    """Finite-width derivative kernels E[G_ij] and kappa_{(ab)(cd)} = Cov(G_ab, G_cd).

    ``*_cross`` entries are the raw cross-neuron covariances of squared or
    bilinear output derivatives, e.g. Cov((d1 z_1)^2, (d2 z_2)^2).
    """
    _require_samples(n_samples)
    if spec.n0 < 2:
        raise OutOfRange("derivative cumulants need n0 >= 2")

    def block(b, m):
        rng = block_rng(seed, STREAM_DERIVS, b)
        G, _ = _jets_to_output_gram(spec, rng, m, 3, coords)
        Lf = chol3(G)
        xi = rng.standard_normal((m, 2, 3))
        Z = np.einsum("mjl,mkl->mjk", xi, Lf)
        return {"G": G, "za": Z[:, 0], "zb": Z[:, 1]}

    return _batched(_deriv_stats, _concat(map_blocks(block, n_samples, workers)), n_samples)


def _evgp_block(spec: NetworkSpec, rng, m: int) -> dict:
    L = spec.L
    C_W = spec.C_W
    sb = math.sqrt(spec.C_b)
    n1 = spec.widths[0]
    z = math.sqrt(spec.K1) * rng.standard_normal((m, n1))
    s, ds = _activate(spec, z)
    ss, dss, us = [s], [ds], []
    for ell in range(1, L):
        n_prev, n_next = spec.widths[ell - 1], spec.widths[ell]
        u = np.sqrt(C_W / n_prev * np.sum(s * s, axis=1))[:, None] * rng.standard_normal((m, n_next))
        z = u + (sb * rng.standard_normal((m, n_next)) if sb else 0.0)
        s, ds = _activate(spec, z)
        ss.append(s)
        dss.append(ds)
        us.append(u)
    u_out = np.sqrt(C_W / spec.widths[-1] * np.sum(s * s, axis=1))[:, None] * rng.standard_normal((m, 1))
    us.append(u_out)
    v = np.ones((m, 1))
    for ell in range(L - 1, -1, -1):
        n = spec.widths[ell]
        g = kernels.backward_step(v, us[ell], ss[ell], rng.standard_normal((m, n)), C_W / n)
        v = dss[ell] * g
    h2 = v * v
    x = spec.x
    gm = float(x @ x) / spec.n0 * np.mean(h2, axis=1)
    gv = float(np.sum(x**4)) / spec.n0 * np.mean(h2 * h2, axis=1) - gm**2
    return {"gm": gm, "gv": gv}


def _evgp_stats(d: dict) -> dict:
    gm = float(np.mean(d["gm"]))
    gv = float(np.mean(d["gv"]))
    return {"grad_mean": gm, "grad_var": gv, "ratio": gv / gm**2}


def evgp_exact_L0(spec: NetworkSpec) -> tuple[float, float]:
    """(GradMean, GradVar) with no hidden layer: dz_q/dW_ij = delta_qi x_j."""
    x = spec.x
    n1 = spec.n_out
    gm = float(x @ x) / spec.n0 / n1
    gv = float(np.sum(x**4)) / spec.n0 / n1 - gm**2
    return gm, gv


def estimate_evgp(spec: NetworkSpec, n_samples: int, seed: int = 0, workers: int | None = None) -> GradStats:
    """E[GradMean], E[GradVar] over first-layer weights for output neuron 1, and their ratio.

    The ratio's error bar is the spread of per-batch ratios (delta method over batches).
    """
    _require_samples(n_samples)
    if not np.any(spec.x):
        raise ZeroInput("input_x must be non-zero")
    if spec.L == 0:
        gm, gv = evgp_exact_L0(spec)
        mk = lambda v: MCEstimate(v, 0.0, n_samples, N_BATCHES)  # noqa: E731
        return GradStats(mk(gm), mk(gv), mk(gv / gm**2))

    def block(b, m):
        return _evgp_block(spec, block_rng(seed, STREAM_EVGP, b), m)

    est = _batched(_evgp_stats, _concat(map_blocks(block, n_samples, workers)), n_samples)
    return GradStats(est["grad_mean"], est["grad_var"], est["ratio"])


__all__ = [
    "MCEstimate",
    "GradStats",
    "VerifyReport",
    "verify",
    "forward_with_grads",
    "estimate_cumulants",
    "estimate_deriv_cumulants",
    "estimate_evgp",
    "evgp_exact_L0",
    "N_BATCHES",
]
