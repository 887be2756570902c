"""Compiled vs pure-numpy layer kernels.

Usage: python3 benchmarks/bench_kernels.py [--draws 2048] [--width 64] [--repeat 5]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from hierarchylab import _kernels_py

try:
    from hierarchylab import _kernels
except ImportError:  # extension not built
    _kernels = None


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--draws", type=int, default=2048)
    ap.add_argument("--width", type=int, default=64)
    ap.add_argument("--jets", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    m, n, k = args.draws, args.width, args.jets
    S = rng.standard_normal((m, n, k))
    xi = rng.standard_normal((m, n, k))
    bias = np.zeros((m, n))
    v, u = rng.standard_normal((m, n)), rng.standard_normal((m, n))
    s, g = rng.standard_normal((m, n)), rng.standard_normal((m, n))

    cases = {
        "jet_forward/tanh": lambda mod: mod.jet_forward(S, xi, bias, 1.0 / n, 1, 0.0, 0.0),
        "jet_forward/relu": lambda mod: mod.jet_forward(S, xi, bias, 2.0 / n, 0, 1.0, 0.0),
        "backward_step": lambda mod: mod.backward_step(v, u, s, g, 1.0 / n),
    }
    backends = {"python": _kernels_py}
    if _kernels is not None:
        backends["cython"] = _kernels
    print(f"draws={m} width={n} jets={k} (best of {args.repeat}, ms)")
    print(f"{'kernel':<20}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases.items():
        times = {}
        for b, mod in backends.items():
            times[b] = 1e3 * min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:<20}" + "".join(f"{times[b]:>12.2f}" for b in backends) + f"{speed:>10.2f}")
        if "cython" in times:
            a, c = fn(_kernels_py), fn(_kernels)
            a = a if isinstance(a, tuple) else (a,)
            c = c if isinstance(c, tuple) else (c,)
            diff = max(float(np.max(np.abs(x - y))) for x, y in zip(a, c))
            assert diff < 1e-10, f"{name}: backends disagree by {diff}"


if __name__ == "__main__":
    main()
