import json
import subprocess
import sys

import pytest

from hierarchylab import __version__, cli


@pytest.fixture
def spec_file(tmp_path):
    def make(obj, name="spec.json"):
        p = tmp_path / name
        p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
        return str(p)

    return make


RELU_SPEC = {"activation": {"kind": "relu"}, "input_x": [1.0, 0.0], "widths": [16] * 4}
TANH_SPEC = {"activation": {"kind": "tanh"}, "input_x": [0.7, 0.7, 0.7], "widths": [32] * 6}


def _csv(path):
    lines = open(path, newline="").read().split("\n")
    header = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    return header, body


def test_tune_tanh(capsys):
    assert cli.run(["tune", "--activation", "tanh"]) == 0
    assert capsys.readouterr().out == '{"C_b":0,"C_W":1,"K_star":0,"class":"KStarZero"}\n'


def test_tune_json_activation(capsys):
    assert cli.run(["tune", "--activation", '{"kind": "leaky_relu", "a_minus": 0.1}']) == 0
    assert json.loads(capsys.readouterr().out)["C_W"] == pytest.approx(2 / 1.01)


def test_tune_bad_activation(capsys):
    assert cli.run(["tune", "--activation", "{not json"]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "MalformedJSON"
    assert cli.run(["tune", "--activation", '{"kind": "tanh", "extra": 1}']) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "SchemaError"
    assert cli.run(["tune", "--activation", "softplus"]) == 2


def test_tune_numerical_failure(capsys):
    assert cli.run(["tune", "--activation", "tanh", "--generic"]) == 3
    assert json.loads(capsys.readouterr().err)["error"] == "NoCriticalPoint"


def test_hierarchy_rows_and_header(spec_file, tmp_path):
    out = tmp_path / "h.csv"
    assert cli.run(["hierarchy", "--spec", spec_file(TANH_SPEC), "--out", str(out)]) == 0
    header, body = _csv(out)
    assert header[0] == f"# hierarchylab {__version__}"
    echo = json.loads(header[1].removeprefix("# config: "))
    assert echo["command"] == "hierarchy" and echo["spec"]["widths"] == [32] * 6
    assert body[0] == "ell,K,k4,k6,k8,k4_hat,k6_hat,k8_hat"
    assert len(body) - 1 == 6 + 1
    assert b"\r" not in out.read_bytes()


def test_malformed_and_invalid_spec(spec_file, capsys):
    assert cli.run(["hierarchy", "--spec", spec_file("{oops")]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "MalformedJSON"
    assert cli.run(["hierarchy", "--spec", spec_file({**RELU_SPEC, "bogus": 1})]) == 2
    assert cli.run(["hierarchy", "--spec", spec_file({**RELU_SPEC, "widths": [0]})]) == 2
    assert cli.run(["hierarchy", "--spec", spec_file({**RELU_SPEC, "n0": 3})]) == 2
    assert cli.run(["hierarchy", "--spec", "/nonexistent.json"]) == 2
    assert cli.run(["nosuch"]) == 2


def test_kernel_and_derivs(spec_file, tmp_path):
    out = tmp_path / "k.csv"
    assert cli.run(["kernel", "--spec", spec_file(TANH_SPEC), "--out", str(out)]) == 0
    _, body = _csv(out)
    assert body[0] == "ell,K" and len(body) == 8
    assert cli.run(["derivs", "--spec", spec_file(TANH_SPEC), "--out", str(out)]) == 0
    _, body = _csv(out)
    cols = body[0].split(",")
    assert cols[:7] == ["ell", "K00", "K10", "K20", "K11", "K22", "K12"]
    assert "k1111" in cols and "S00" in cols and "asym_k1111_hat" in cols
    assert len(body) == 8
    # relu has no K*=0 asymptotes
    assert cli.run(["derivs", "--spec", spec_file(RELU_SPEC), "--out", str(out)]) == 0
    assert _csv(out)[1][-1].endswith("nan")


def test_evgp(spec_file, capsys):
    assert cli.run(["evgp", "--spec", spec_file(TANH_SPEC)]) == 0
    body = json.loads(capsys.readouterr().out)
    assert set(body) == {"prediction", "C", "xi"}
    assert body["xi"] == pytest.approx(6 / 32)


@pytest.mark.parametrize("mode, cols", [("corr", "ell,eps,asym_reference,asym_derived"), ("kappa4", "ell,k4"), ("limit", "xi,mu,sigma_sq"), ("sample", "z")])
def test_relu_modes(spec_file, tmp_path, mode, cols):
    out = tmp_path / "r.csv"
    args = ["relu", "--spec", spec_file(RELU_SPEC), "--mode", mode, "--out", str(out), "--depth", "20", "--samples", "500"]
    assert cli.run(args) == 0
    header, body = _csv(out)
    assert body[0] == cols
    assert json.loads(header[1].removeprefix("# config: "))["mode"] == mode
    assert len(body) - 1 == {"corr": 20, "kappa4": 5, "limit": 1, "sample": 500}[mode]


def test_relu_mode_rejects_tanh(spec_file):
    assert cli.run(["relu", "--spec", spec_file(TANH_SPEC), "--mode", "limit"]) == 2


def test_round_trip_byte_identical(spec_file, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["relu", "--spec", spec_file(RELU_SPEC), "--mode", "sample", "--samples", "300", "--seed", "7"]
    assert cli.run(args + ["--out", str(a)]) == 0
    # rebuild the run from the echoed config alone
    cfg = json.loads(_csv(a)[0][1].removeprefix("# config: "))
    again = spec_file(cfg["spec"], "echo.json")
    args = ["relu", "--spec", again, "--mode", cfg["mode"], "--samples", str(cfg["samples"]), "--seed", str(cfg["seed"])]
    assert cli.run(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert all(v == "%.17g" % float(v) for v in _csv(a)[1][1:])


def test_mc_and_verify(spec_file, tmp_path, capsys):
    est = tmp_path / "est.json"
    spec = spec_file({"activation": {"kind": "relu"}, "input_x": [1.0, 0.0], "widths": [8, 8]})
    assert cli.run(["mc", "--spec", spec, "--samples", "10000", "--seed", "3", "--what", "cumulants", "--out", str(est)]) == 0
    report = json.loads(est.read_text())
    assert report["config"]["seed"] == 3 and report["hierarchylab"] == __version__
    assert {"value", "std_error", "n_samples", "n_batches"} <= set(report["estimates"]["k2"])
    pred = tmp_path / "pred.csv"
    pred.write_text("name,value\nk2,1.0\n")
    assert cli.run(["verify", "--pred", str(pred), "--est", str(est)]) == 0
    assert json.loads(capsys.readouterr().out)["passed"] is True
    pred.write_text("name,value\nk2,3.0\n")
    assert cli.run(["verify", "--pred", str(pred), "--est", str(est), "--zmax", "3"]) == 1
    pred.write_text("name,value\nk99,1.0\n")
    assert cli.run(["verify", "--pred", str(pred), "--est", str(est)]) == 2
    pred.write_text("wrong,header\n")
    assert cli.run(["verify", "--pred", str(pred), "--est", str(est)]) == 2


@pytest.mark.parametrize("what", ["derivs", "evgp"])
def test_mc_other_reports(spec_file, capsys, what):
    spec = spec_file({"activation": {"kind": "tanh"}, "input_x": [0.5, 0.5], "widths": [8, 8]})
    assert cli.run(["mc", "--spec", spec, "--samples", "10000", "--what", what]) == 0
    assert json.loads(capsys.readouterr().out)["config"]["what"] == what


def test_mc_insufficient_samples(spec_file):
    assert cli.run(["mc", "--spec", spec_file(RELU_SPEC), "--samples", "10", "--what", "cumulants"]) == 2


def test_schema_shipped():
    shipped = json.load(open(__file__.rsplit("/tests/", 1)[0] + "/docs/spec.schema.json"))
    assert shipped == cli.spec_json_schema()


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "hierarchylab", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and __version__ in r.stdout
