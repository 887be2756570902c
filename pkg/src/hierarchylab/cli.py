"""Command-line front end.

Exit codes: 0 success, 1 a ``verify`` check failed, 2 validation error,
3 numerical failure.  Errors are reported on stderr as one JSON line.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import __version__
from .crit import KSTAR_ZERO_CLASS, classify, tune_critical
from .errors import HierarchyLabError
from .nonlin import Nonlinearity, homog1, relu, tanh

SCHEMA_VERSION = 1


# ---------------------------------------------------------------- config schema


class ActivationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["relu", "leaky_relu", "homog1", "tanh"]
    a_plus: float | None = None
    a_minus: float | None = None

    def build(self) -> Nonlinearity:
        if self.kind == "tanh":
            return tanh()
        if self.kind == "relu" and self.a_plus is None and self.a_minus is None:
            return relu()
        defaults = {"relu": (1.0, 0.0), "leaky_relu": (1.0, 0.01), "homog1": (1.0, 0.0)}[self.kind]
        a_plus = defaults[0] if self.a_plus is None else self.a_plus
        a_minus = defaults[1] if self.a_minus is None else self.a_minus
        return homog1(a_plus, a_minus, name=self.kind)


class TuningConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    C_b: float = Field(ge=0)
    C_W: float = Field(gt=0)


class SpecConfig(BaseModel):
    """JSON network specification; unknown fields are rejected."""

    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1] = SCHEMA_VERSION
    activation: ActivationConfig
    input_x: list[float] = Field(min_length=1)
    widths: list[int] = Field(default_factory=list)
    n0: int | None = None
    n_out: int = Field(default=1, ge=1)
    tuning: TuningConfig | None = None

    @model_validator(mode="after")
    def _check(self):
        if self.n0 is not None and self.n0 != len(self.input_x):
            raise ValueError("n0 must equal len(input_x)")
        if any(w < 1 for w in self.widths):
            raise ValueError("all widths must be >= 1")
        return self

    def build(self):
        from .hierarchy import NetworkSpec

        nl = self.activation.build()
        kw = {}
        if self.tuning is not None:
            kw = {"C_b_override": self.tuning.C_b, "C_W_override": self.tuning.C_W}
        return NetworkSpec(
            n0=len(self.input_x),
            widths=tuple(self.widths),
            nl=nl,
            input_x=tuple(self.input_x),
            n_out=self.n_out,
            **kw,
        )


def spec_json_schema() -> dict:
    return SpecConfig.model_json_schema()


# ---------------------------------------------------------------- output helpers


def _num(v) -> str:
    if v is None:
        return "nan"
    return "%.17g" % float(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isfinite(v) and v.is_integer():
            return int(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), separators=(",", ":"), sort_keys=False)


def write_csv(path: str | None, columns: Sequence[str], rows: Iterable[Sequence], config: dict) -> None:
    buf = io.StringIO(newline="")
    buf.write(f"# hierarchylab {__version__}\n")
    buf.write("# config: " + json.dumps(config, sort_keys=True, separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_num(v) if not isinstance(v, str) else v for v in r])
    text = buf.getvalue()
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="")


def write_json(path: str | None, obj) -> None:
    text = dumps(obj) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="")


class CliError(Exception):
    def __init__(self, code: str, message: str, exit_code: int = 2):
        super().__init__(message)
        self.code = code
        self.exit_code = exit_code


def load_spec(path: str) -> tuple[SpecConfig, dict]:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise CliError("FileNotFound", str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise CliError("MalformedJSON", f"{path}: {exc}") from exc
    try:
        cfg = SpecConfig.model_validate(raw)
    except ValidationError as exc:
        msg = "; ".join(f"{'.'.join(map(str, e['loc']))}: {e['msg']}" for e in exc.errors())
        raise CliError("SchemaError", msg) from exc
    return cfg, cfg.model_dump(mode="json")


# ---------------------------------------------------------------- commands


def _nl_from_args(args) -> Nonlinearity:
    """``--activation`` is a kind name or an activation JSON object."""
    text = args.activation.strip()
    if text.startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CliError("MalformedJSON", f"--activation: {exc}") from exc
        try:
            return ActivationConfig.model_validate(raw).build()
        except ValidationError as exc:
            raise CliError("SchemaError", str(exc).splitlines()[0]) from exc
    return ActivationConfig(kind=text, a_plus=args.a_plus, a_minus=args.a_minus).build()


def cmd_tune(args) -> int:
    nl = _nl_from_args(args)
    t = tune_critical(nl, K_star=args.k_star, generic=args.generic)
    write_json(args.out, t.to_json())
    return 0


def cmd_kernel(args) -> int:
    from .hierarchy import kernel_trajectory

    cfg, echo = load_spec(args.spec)
    spec = cfg.build()
    Ks = kernel_trajectory(spec.K1, spec.L + 1, spec.C_b, spec.C_W, spec.nl)
    write_csv(args.out, ["ell", "K"], ((i + 1, K) for i, K in enumerate(Ks)), {"command": "kernel", "spec": echo})
    return 0


def cmd_hierarchy(args) -> int:
    from .hierarchy import run_hierarchy

    cfg, echo = load_spec(args.spec)
    spec = cfg.build()
    states = run_hierarchy(spec)
    cols = ["ell", "K", "k4", "k6", "k8", "k4_hat", "k6_hat", "k8_hat"]
    rows = ((s.ell, s.K, s.k4, s.k6, s.k8, s.k4_hat, s.k6_hat, s.k8_hat) for s in states)
    write_csv(args.out, cols, rows, {"command": "hierarchy", "spec": echo})
    return 0


def cmd_derivs(args) -> int:
    from .derivs import CANONICAL, deriv_asymptotics, run_derivs

    cfg, echo = load_spec(args.spec)
    spec = cfg.build()
    tr = run_derivs(spec)
    asym_cols = ["asym_K00", "asym_K10", "asym_K11", "asym_k1100_hat", "asym_k1111_hat", "asym_k1122_hat"]
    kernel_cols = ["K00", "K10", "K20", "K11", "K22", "K12"]
    s_cols = ["S00", "S10", "S20", "S11", "S22", "S12"]
    cols = ["ell"] + kernel_cols + list(CANONICAL) + s_cols + asym_cols
    kstar0 = classify(spec.nl) == KSTAR_ZERO_CLASS and spec.tuning is not None
    n_mean = float(np.mean(spec.widths)) if spec.widths else math.inf
    rows = []
    for i in range(len(tr.kernels)):
        r = tr.row(i)
        if kstar0:
            a = deriv_asymptotics(r["ell"], n_mean, spec.n0, spec.x, spec.nl, spec.tuning)
            asym = [a.K00, a.K10, a.K11, a.k1100_hat, a.k1111_hat, a.k1122_hat]
        else:
            asym = [None] * len(asym_cols)
        rows.append([r[c] for c in cols[: -len(asym_cols)]] + asym)
    write_csv(args.out, cols, rows, {"command": "derivs", "spec": echo})
    return 0


def cmd_evgp(args) -> int:
    from .derivs import evgp_constant, evgp_predict

    cfg, echo = load_spec(args.spec)
    spec = cfg.build()
    write_json(args.out, {"prediction": evgp_predict(spec), "C": evgp_constant(spec), "xi": spec.xi})
    return 0


def cmd_relu(args) -> int:
    from . import homog

    cfg, echo = load_spec(args.spec)
    spec = cfg.build()
    p = homog.HomogParams.from_nl(spec.nl)
    config = {"command": "relu", "mode": args.mode, "spec": echo}
    if args.mode == "corr":
        config["eps0"] = args.eps0
        config["depth"] = args.depth
        eps = homog.correlation_trajectory(args.eps0, args.depth, p)
        rows = (
            (i + 1, e, homog.correlation_asymptote(i + 1, p), homog.correlation_asymptote_derived(i + 1, p))
            for i, e in enumerate(eps)
        )
        write_csv(args.out, ["ell", "eps", "asym_reference", "asym_derived"], rows, config)
    elif args.mode == "kappa4":
        rows = (
            (ell + 1, homog.kappa4_closed_form(spec.norm_sq_over_n0, spec.widths[:ell], p))
            for ell in range(spec.L + 1)
        )
        write_csv(args.out, ["ell", "k4"], rows, config)
    elif args.mode == "limit":
        mu, s2 = homog.lognormal_limit_params(spec.xi, p)
        write_csv(args.out, ["xi", "mu", "sigma_sq"], [(spec.xi, mu, s2)], config)
    else:
        config["samples"] = args.samples
        config["seed"] = args.seed
        z = homog.sample_exact(spec, args.samples, args.seed)
        write_csv(args.out, ["z"], ((v,) for v in z), config)
    return 0


def cmd_mc(args) -> int:
    from . import mc

    cfg, echo = load_spec(args.spec)
    spec = cfg.build()
    if args.what == "cumulants":
        est = mc.estimate_cumulants(spec, args.samples, args.seed)
        body = {k: v.to_json() for k, v in est.items()}
    elif args.what == "derivs":
        est = mc.estimate_deriv_cumulants(spec, args.samples, args.seed)
        body = {k: v.to_json() for k, v in est.items()}
    else:
        body = mc.estimate_evgp(spec, args.samples, args.seed).to_json()
    report = {
        "hierarchylab": __version__,
        "config": {"command": "mc", "what": args.what, "samples": args.samples, "seed": args.seed, "spec": echo},
        "estimates": body,
    }
    write_json(args.out, report)
    return 0


def _read_pred_csv(path: str) -> dict[str, float]:
    try:
        lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln and not ln.startswith("#")]
    except FileNotFoundError as exc:
        raise CliError("FileNotFound", str(exc)) from exc
    rows = list(csv.reader(lines))
    if not rows or rows[0][:2] != ["name", "value"]:
        raise CliError("MalformedCSV", f"{path}: expected header 'name,value'")
    try:
        return {r[0]: float(r[1]) for r in rows[1:]}
    except (IndexError, ValueError) as exc:
        raise CliError("MalformedCSV", f"{path}: {exc}") from exc


def cmd_verify(args) -> int:
    from .mc import MCEstimate, verify

    preds = _read_pred_csv(args.pred)
    try:
        raw = json.loads(Path(args.est).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise CliError("FileNotFound", str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise CliError("MalformedJSON", f"{args.est}: {exc}") from exc
    ests = raw.get("estimates", raw)
    results = {}
    ok = True
    for name, pred in preds.items():
        if name not in ests:
            raise CliError("MissingEstimate", f"no estimate named {name!r}")
        e = ests[name]
        try:
            est = MCEstimate(float(e["value"]), float(e["std_error"]), int(e["n_samples"]), int(e["n_batches"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise CliError("SchemaError", f"estimate {name!r}: {exc}") from exc
        rep = verify(pred, est, args.zmax)
        results[name] = rep.to_json()
        ok &= rep.passed
    write_json(args.out, {"passed": ok, "z_max": args.zmax, "checks": results})
    return 0 if ok else 1


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hierarchylab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"hierarchylab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("tune", help="critical (C_b, C_W) for an activation")
    t.add_argument("--activation", required=True, help="relu|leaky_relu|homog1|tanh or an activation JSON object")
    t.add_argument("--a-plus", type=float, default=None)
    t.add_argument("--a-minus", type=float, default=None)
    t.add_argument("--k-star", type=float, default=1.0)
    t.add_argument("--generic", action="store_true", help="solve for a K* > 0 fixed point")
    t.add_argument("--out", default=None)
    t.set_defaults(func=cmd_tune)

    for name, func, helptext in (
        ("kernel", cmd_kernel, "infinite-width kernel trajectory"),
        ("hierarchy", cmd_hierarchy, "cumulant hierarchy k4/k6/k8"),
        ("derivs", cmd_derivs, "derivative kernels, fourth cumulants, S-corrections"),
        ("evgp", cmd_evgp, "predicted gradient variance ratio"),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--spec", required=True)
        s.add_argument("--out", default=None)
        s.set_defaults(func=func)

    r = sub.add_parser("relu", help="closed forms and exact sampler for 1-homogeneous nets")
    r.add_argument("--spec", required=True)
    r.add_argument("--mode", required=True, choices=["corr", "kappa4", "limit", "sample"])
    r.add_argument("--eps0", type=float, default=0.3)
    r.add_argument("--depth", type=int, default=100)
    r.add_argument("--samples", type=int, default=10_000)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_relu)

    m = sub.add_parser("mc", help="Monte Carlo estimates with error bars")
    m.add_argument("--spec", required=True)
    m.add_argument("--samples", type=int, required=True)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--what", required=True, choices=["cumulants", "derivs", "evgp"])
    m.add_argument("--out", default=None)
    m.set_defaults(func=cmd_mc)

    v = sub.add_parser("verify", help="compare predictions with MC estimates")
    v.add_argument("--pred", required=True, help="CSV with columns name,value")
    v.add_argument("--est", required=True, help="JSON from the mc command")
    v.add_argument("--zmax", type=float, default=3.0)
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_verify)
    return p


def _fail(code: str, message: str, exit_code: int) -> int:
    sys.stderr.write(json.dumps({"error": code, "message": message}) + "\n")
    return exit_code


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except CliError as exc:
        return _fail(exc.code, str(exc), exc.exit_code)
    except ValidationError as exc:
        return _fail("SchemaError", str(exc).splitlines()[0], 2)
    except HierarchyLabError as exc:
        return _fail(exc.code, str(exc), 3 if exc.kind == "numerical" else 2)
    except OSError as exc:
        return _fail("IOError", str(exc), 2)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
