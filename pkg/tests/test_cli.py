import json
from pathlib import Path

import pytest

from vplinear.cli import main
from vplinear.config import ExperimentConfig, parse_config
from vplinear.errors import ConfigError

EXAMPLES = Path(__file__).resolve().parents[1] / "src" / "vplinear" / "examples"


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_config_round_trip():
    cfg = parse_config("[equilibrium]\nkind = power_law\nd = 2\nm = 5\n[kernel]\nfit_window = 20, 300\n")
    assert parse_config(cfg.to_ini()) == cfg
    assert parse_config(ExperimentConfig().to_ini()) == ExperimentConfig()


@pytest.mark.parametrize(
    "text",
    [
        "no section header",
        "[bogus]\na = 1\n",
        "[kernel]\nn_xi = 1000\n",
        "[kernel]\nfit_window = 50, 20\n",
        "[evolve]\nslope_tolerance = -0.1\n",
        "[equilibrium]\nd = 4\n",
        "[equilibrium]\nkind = two_stream\nd = 2\n",
        "[penrose]\nunknown_key = 1\n",
        "[dispersion]\nn_r = many\n",
    ],
)
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_malformed_config_exit_2(tmp_path):
    cfg = _write(tmp_path, "[kernel]\nn_xi = 1000\n")
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--out", str(out), "kernel", "decay"]) == 2
    assert not out.exists()
    assert main(["--config", str(tmp_path / "missing.ini"), "--out", str(out), "penrose", "check"]) == 2
    assert main(["--out", str(out), "penrose", "check"]) == 2
    assert main(["--config", str(cfg), "--out", str(out), "nonsense"]) == 2
    assert not out.exists()


def test_symbols_eval(tmp_path):
    out = tmp_path / "sym"
    rc = main(["--config", str(EXAMPLES / "maxwellian_d1.ini"), "--out", str(out), "--rtol", "1e-11",
               "symbols", "eval"])
    assert rc == 0
    lines = (out / "symbols.csv").read_text().splitlines()
    assert lines[0].startswith("re_z,im_z,xi,re_m_vp")
    assert len(lines) == 6
    man = json.loads((out / "manifest.json").read_text())
    assert man["flags"]["rtol"] == 1e-11
    assert set(man["artifacts"]) == {"symbols.csv", "symbols_summary.json", "schema.json"}
    schema = json.loads((out / "schema.json").read_text())
    assert "re_m_ke" in schema["symbols.csv"]["columns"]


def test_symbols_domain_error_fails(tmp_path):
    q = _write(tmp_path, "re_z,im_z,xi\n-5.0,0.0,1.0\n", "q.csv")
    cfg = _write(tmp_path, f"[symbols]\nqueries = {q.name}\n")
    out = tmp_path / "o"
    assert main(["--config", str(cfg), "--out", str(out), "symbols", "eval"]) == 1
    assert "domain_error" in (out / "symbols.csv").read_text()


def test_penrose_check(tmp_path):
    cfg = _write(tmp_path, "[equilibrium]\nkind = maxwellian\n[penrose]\nradii = 0.2, 1.0\ncurve = true\n")
    out = tmp_path / "p"
    assert main(["--config", str(cfg), "--out", str(out), "--threads", "2", "penrose", "check"]) == 0
    rep = json.loads((out / "penrose.json").read_text())
    assert rep["verdict"] == "stable"
    assert (out / "nyquist.csv").read_text().startswith("xi,segment,re_z")


def test_penrose_two_stream(tmp_path):
    out = tmp_path / "ts"
    assert main(["--config", str(EXAMPLES / "two_stream.ini"), "--out", str(out), "penrose", "check"]) == 0
    assert json.loads((out / "penrose.json").read_text())["verdict"] == "unstable"


def test_dispersion_trace(tmp_path):
    out = tmp_path / "d"
    assert main(["--config", str(EXAMPLES / "maxwellian_d1.ini"), "--out", str(out), "dispersion", "trace"]) == 0
    rows = (out / "branch.csv").read_text().splitlines()[1:]
    r = [float(x.split(",")[0]) for x in rows]
    assert all(b > a for a, b in zip(r, r[1:]))
    summary = json.loads((out / "dispersion_summary.json").read_text())
    assert summary["c2_fit"]["c2"] == pytest.approx(1.5, rel=0.01)


SMALL_KERNEL = """
[equilibrium]
kind = maxwellian
d = 1
[kernel]
t_min = 10
t_max = 100
n_t = 24
n_xi = 256
xi_max = 2.0
delta = 0.1
fit_window = 20, 100
dump_times = 50
[evolve]
t_min = 10
t_max = 100
n_t = 24
n_xi = 256
xi_max = 2.0
delta = 0.1
fit_window = 20, 100
dump_times = 50
"""


def test_kernel_decay_outputs(tmp_path):
    cfg = _write(tmp_path, SMALL_KERNEL)
    out = tmp_path / "k"
    rc = main(["--config", str(cfg), "--out", str(out), "kernel", "decay"])
    assert rc in (0, 1)
    summary = json.loads((out / "kernel_summary.json").read_text())
    assert summary["verdict"] == ("pass" if rc == 0 else "fail")
    assert summary["info"]["composition_residual"] < 1e-6
    header = (out / "kernel_norms.csv").read_text().splitlines()[0]
    assert header.startswith("t,G_L1,G_L2,G_Linf,GR_L1")
    dumps = sorted(p.name for p in out.glob("kernel_field_t*.csv"))
    assert len(dumps) == 1


def test_evolve_outputs(tmp_path):
    cfg = _write(tmp_path, SMALL_KERNEL)
    out = tmp_path / "e"
    rc = main(["--config", str(cfg), "--out", str(out), "evolve"])
    assert rc in (0, 1)
    rep = json.loads((out / "decay_reports.json").read_text())
    assert rep["checks"]["composition_residual"] < 1e-6
    assert rep["checks"]["kernel_route_gap"] < 1e-4
    assert [r["component"] for r in rep["reports"]] == ["rhoR", "rhoS", "rhoS"]


def test_numerical_failure_exit_3(tmp_path):
    cfg = _write(tmp_path, "[kernel]\nn_xi = 16\nt_max = 500\ndelta = 0.1\n")
    out = tmp_path / "f"
    assert main(["--config", str(cfg), "--out", str(out), "kernel", "decay"]) == 3
    marker = json.loads((out / "FAILED.json").read_text())
    assert marker["error"] == "ResolutionError"
    assert json.loads((out / "manifest.json").read_text())["status"] == "error"


def test_repeat_runs_identical(tmp_path):
    args = ["--config", str(EXAMPLES / "maxwellian_d1.ini"), "dispersion", "trace"]
    main(["--out", str(tmp_path / "a")] + args)
    main(["--out", str(tmp_path / "b")] + args)
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "vplinear", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "vplinear" in res.stdout
