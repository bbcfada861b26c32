import json
import math
import subprocess
import sys

import pytest
from hypothesis import given, strategies as st

from rsbcodes.bench import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_SOLVER,
    SWEEP_COLUMNS,
    ConfigError,
    ExperimentConfig,
    emit_plotdata,
    fmt,
    load_config,
    main,
    read_dat,
    read_table,
)
from rsbcodes.optrec import SweepRecord

TM2 = {"family": "two_mode_binomial", "N": 2, "delta": math.pi / 4, "phi": math.pi / 4}


def _config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def _run(tmp_path, kind, doc, *extra):
    out = tmp_path / "out"
    code = main([kind, "--config", _config(tmp_path, {"kind": kind, **doc}), "--out", str(out), *extra])
    return code, out


def test_fmt():
    assert fmt(1 / 3) == "0.333333333333"
    assert fmt(2) == "2" and fmt(True) == "1" and fmt(None) == ""
    assert fmt(1e-20) == "1e-20"


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips_to_twelve_digits(x):
    assert float(fmt(x)) == pytest.approx(x, rel=1e-11, abs=0)


def test_emit_plotdata_round_trip(tmp_path):
    recs = [SweepRecord("a", "trivial", 1, None, 0.0, 0.0, "loss", 1e-3, 0.99, 0.995, 0.0, 0.0, 0),
            SweepRecord("b", "two_mode_binomial", 2, 2, 0.785398163397, 0.3, "loss", 3e-3, 1 / 3, 0.5, 1e-12,
                        2e-9, 120)]
    csv_path, dat_path = emit_plotdata(recs, tmp_path / "t.csv", SWEEP_COLUMNS)
    back = read_table(csv_path, SweepRecord)
    assert back[0] == recs[0]
    assert back[1].F_e == pytest.approx(1 / 3, rel=1e-12) and back[1].iters == 120
    dat = read_dat(dat_path)
    assert dat[0][3] == "NaN" and len(dat[1]) == len(SWEEP_COLUMNS)
    assert dat_path.read_text().startswith("# code family")


def test_config_defaults_and_errors(tmp_path):
    cfg = ExperimentConfig.from_dict({"kind": "gates"})
    assert cfg.solver.tol == 1e-8 and cfg.code.N == 2
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_dict({"kind": "sweep", "bogus": 1, "channel": {"strengths": [1e-2, 1e-3]},
                                    "code": {"N": 3}})
    fields_ = {e["field"] for e in exc.value.errors}
    assert {"bogus", "channel.strengths", "code.N", "codes"} <= fields_
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    cfg = load_config(_config(tmp_path, {"kind": "gates"}), {"seed": 9, "threads": None})
    assert cfg.solver.seed == 9 and cfg.threads == 1


@pytest.mark.parametrize("doc", [
    {"channel": {"kind": "thermal"}},
    {"solver": {"seed": -1}},
    {"threads": 0},
    {"code": {"family": "gkp"}},
])
def test_cli_config_errors_exit_2(tmp_path, capsys, doc):
    code, _ = _run(tmp_path, "gates", doc)
    assert code == EXIT_CONFIG
    assert json.loads(capsys.readouterr().err)["errors"]


def test_cli_unparseable_config(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["gates", "--config", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_cli_gates(tmp_path):
    code, out = _run(tmp_path, "gates", {"code": TM2, "samples": 3})
    assert code == EXIT_OK
    doc = json.loads((out / "gates.json").read_text())
    assert all(g["deviation"] <= 1e-10 for g in doc["gates"])
    assert all(t["worst_deviation"] <= 1e-10 for t in doc["teleported"])
    assert (out / "gates.log").exists()


@pytest.mark.parametrize("kind,verdict", [("loss", "satisfied"), ("dephasing", "violated")])
def test_cli_kl_check(tmp_path, kind, verdict):
    code, out = _run(tmp_path, "kl-check", {"code": {"N": 2}, "channel": {"kind": kind, "strengths": [1e-4]}})
    assert code == EXIT_OK
    assert json.loads((out / "kl-check.json").read_text())["verdict"] == verdict


def test_cli_sweep_is_deterministic(tmp_path):
    doc = {"codes": [{"family": "trivial"}, TM2], "channel": {"kind": "dephasing", "strengths": [1e-3, 1e-2]}}
    code, out = _run(tmp_path, "sweep", doc)
    assert code == EXIT_OK
    first = (out / "sweep.csv").read_text()
    assert first.splitlines()[0] == ",".join(SWEEP_COLUMNS)
    assert len(first.splitlines()) == 5
    code, out = _run(tmp_path, "sweep", doc, "--threads", "2")
    assert code == EXIT_OK
    assert (out / "sweep.csv").read_text() == first
    assert "residual" in (out / "sweep.log").read_text()


def test_cli_solver_failure_exit_3(tmp_path):
    doc = {"code": TM2, "channel": {"kind": "dephasing", "strengths": [1e-2]}, "solver": {"max_iters": 1}}
    code, out = _run(tmp_path, "sdp", doc)
    assert code == EXIT_SOLVER
    assert json.loads((out / "sdp.json").read_text())[0]["converged"] is False


def test_cli_landscape_and_phase_dist(tmp_path):
    code, out = _run(tmp_path, "landscape", {"code": {"N": 2}, "points": 2})
    assert code == EXIT_OK
    rows = read_table(out / "landscape.csv")
    assert len(rows) == 4 and set(rows[0]) == {"delta", "phi", "infidelity"}
    code, out = _run(tmp_path, "phase-dist", {"code": TM2, "grid": 16, "theta": [0.1, 0.1]})
    assert code == EXIT_OK
    doc = json.loads((out / "phase-dist.json").read_text())
    assert 0 <= doc["total_variation"] <= 1
    assert len(read_table(out / "phase_plus.csv")) == 256


def test_cli_corr_demo(tmp_path):
    doc = {"code": TM2, "channel": {"kind": "correlated", "sigma": 0.5}, "samples": 3}
    code, out = _run(tmp_path, "corr-demo", doc, "--seed", "4")
    assert code == EXIT_OK
    doc = json.loads((out / "corr-demo.json").read_text())
    assert doc["fidelity"] == pytest.approx(1, abs=1e-10)
    assert doc["sdp_fidelity"] == pytest.approx(1, abs=1e-6)


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "rsbcodes.bench", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "kl-check" in res.stdout
