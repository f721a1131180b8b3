import csv
import json
import re
import subprocess
import sys

import numpy as np
import pytest

from sklab import cli, io
from sklab.singularity import RadialProfile, dyadic_radii


@pytest.fixture(autouse=True)
def out_dir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("SKLAB_OUTPUT_DIR", raising=False)
    return tmp_path


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write_config(path, **cfg):
    cfg = {"schema_version": 1, **cfg}
    path.write_text(json.dumps(cfg))
    return str(path)


BETA_CFG = dict(grid={"r_in": 1e-6, "r_out": 0.05, "n_radial": 128, "n_angular": 32},
                h_spec={"kind": "coordinate_x"})


def test_catalog_list(capsys):
    code, out, _ = run(capsys, "catalog", "list")
    names = {e["name"] for e in json.loads(out)["entries"]}
    assert code == 0 and len(names) >= 6
    assert {"half_plane", "disc", "punctured_disc", "log_metric", "conical(0.5)", "picard_local(0.5)"} <= names


def test_catalog_sample_punctured_disc(capsys, out_dir):
    code, _, _ = run(capsys, "catalog", "sample", "--name", "punctured_disc", "--grid", "0.05,0.5,16,8",
                     "--out", "pd.csv")
    assert code == 0
    with open(out_dir / "pd.csv") as fh:
        rows = list(csv.DictReader(fh))
    r = np.array([float(x["r"]) for x in rows])
    w = np.array([float(x["value"]) for x in rows])
    np.testing.assert_allclose(w, -r * np.log(r), rtol=1e-15)
    assert (out_dir / "pd.csv.json").exists() and (out_dir / "pd_u.csv").exists()


def test_catalog_sample_unknown(capsys):
    code, _, err = run(capsys, "catalog", "sample", "--name", "nosuch", "--out", "x.csv")
    assert code == 2 and "nosuch" in err


def test_catalog_sample_bad_grid(capsys):
    assert run(capsys, "catalog", "sample", "--name", "disc", "--grid", "1,2", "--out", "x.csv")[0] == 2
    assert run(capsys, "catalog", "sample", "--name", "disc", "--grid", "0.5,0.1,16,16", "--out", "x.csv")[0] == 2


def test_output_dir_env(capsys, out_dir, monkeypatch):
    monkeypatch.setenv("SKLAB_OUTPUT_DIR", str(out_dir / "env"))
    assert run(capsys, "catalog", "sample", "--name", "disc", "--n", "16", "--out", "d.csv")[0] == 0
    assert (out_dir / "env" / "d.csv").exists()


def test_solve_beta_pipeline(capsys, out_dir):
    cfg = write_config(out_dir / "c.json", beta=0.5, **BETA_CFG)
    code, out, _ = run(capsys, "solve", "--config", cfg, "--out-dir", "run")
    summary = json.loads((out_dir / "run" / "summary.json").read_text())
    assert code == 0 and summary["converged"] is True
    assert summary["classification"]["branch"] == "power"
    assert summary["classification"]["beta"] == pytest.approx(0.5, abs=0.02)
    for f in ("u.csv", "u.csv.json", "w.csv", "profile.csv"):
        assert (out_dir / "run" / f).exists()
    code, out, _ = run(capsys, "classify", "--profile", "run/profile.csv", "--order", "0")
    assert code == 0 and json.loads(out)["beta"] == pytest.approx(0.5, abs=0.02)


def test_solve_is_deterministic(capsys, out_dir):
    cfg = write_config(out_dir / "c.json", beta=0.0, **BETA_CFG)
    run(capsys, "solve", "--config", cfg, "--out-dir", "a")
    run(capsys, "solve", "--config", cfg, "--out-dir", "b")
    for f in ("summary.json", "u.csv", "w.csv", "profile.csv"):
        assert (out_dir / "a" / f).read_bytes() == (out_dir / "b" / f).read_bytes()


def test_solve_rejects_beta_at_bound(capsys, out_dir):
    cfg = write_config(out_dir / "c.json", beta=1.0, **BETA_CFG)
    code, _, err = run(capsys, "solve", "--config", cfg)
    assert code == 4 and "β < n+1" in err


def test_solve_rejects_negative_rho(capsys, out_dir):
    cfg = write_config(out_dir / "c.json", beta=0.0, rho=-1.0, **BETA_CFG)
    assert run(capsys, "solve", "--config", cfg)[0] == 4


def test_solve_exact_and_bc(capsys, out_dir):
    grid = {"r_in": 0.05, "r_out": 0.9, "n_radial": 32, "n_angular": 32}
    cfg = write_config(out_dir / "e.json", grid=grid, exact="log_metric")
    code, out, _ = run(capsys, "solve", "--config", cfg, "--out-dir", "e")
    s = json.loads(out)
    assert code == 0 and s["max_error"] < 2e-2 and s["max_curvature_tilde"] <= 0
    cfg = write_config(out_dir / "b.json", grid=grid, h_spec={"kind": "constant", "c": 0}, bc={"inner": 1, "outer": 1})
    code, out, _ = run(capsys, "solve", "--config", cfg, "--out-dir", "b")
    assert code == 0 and json.loads(out)["converged"]


def test_solve_non_convergence_exit_code(capsys, out_dir):
    grid = {"r_in": 0.05, "r_out": 0.9, "n_radial": 32, "n_angular": 32}
    cfg = write_config(out_dir / "e.json", grid=grid, exact="punctured_disc", max_iter=1)
    code, _, _ = run(capsys, "solve", "--config", cfg, "--out-dir", "nc")
    assert code == 3 and (out_dir / "nc" / "summary.json").exists()


@pytest.mark.parametrize("cfg", [
    {"grid": {"r_in": 0.1, "r_out": 1, "n_radial": 16, "n_angular": 16}, "beta": 0.5},  # no h_spec
    {"grid": {"r_in": 0.1, "r_out": 1, "n_radial": 16, "n_angular": 16}, "beta": 0.5, "exact": "disc"},
    {"grid": {"r_in": 0.1, "r_out": 1, "n_radial": 16, "n_angular": 16}, "h_spec": {"kind": "x"}, "beta": 0},
    {"grid": {"r_in": 0.1, "r_out": 1, "n_radial": 16}, "h_spec": {"kind": "coordinate_x"}, "beta": 0},
    {"grid": {"r_in": 0.1, "r_out": 1, "n_radial": 16, "n_angular": 16}, "exact": "disc", "extra": 1},
    {"grid": {"r_in": 1.0, "r_out": 0.1, "n_radial": 16, "n_angular": 16}, "exact": "disc"},
])
def test_solve_malformed_configs(capsys, out_dir, cfg):
    path = write_config(out_dir / "m.json", **cfg)
    assert run(capsys, "solve", "--config", path)[0] == 2


def test_solve_unreadable_config(capsys, out_dir):
    (out_dir / "bad.json").write_text("{not json")
    assert run(capsys, "solve", "--config", "bad.json")[0] == 2
    assert run(capsys, "solve", "--config", "missing.json")[0] == 2
    (out_dir / "v.json").write_text(json.dumps({"schema_version": 99, "grid": {}, "exact": "disc"}))
    assert run(capsys, "solve", "--config", "v.json")[0] == 2


def test_solve_model_only(capsys, out_dir):
    cfg = write_config(out_dir / "p.json", grid={"r_in": 0.01, "r_out": 0.5, "n_radial": 16, "n_angular": 16},
                       exact="picard_local(0.5)")
    assert run(capsys, "solve", "--config", cfg)[0] == 5


def test_verify_punctured_disc(capsys, out_dir):
    code, out, _ = run(capsys, "verify", "--metric", "punctured_disc", "--refinements", "3", "--base-n", "64",
                       "--out", "v.json")
    rep = json.loads(out)
    assert code == 0 and rep["passed"]
    assert all(v >= 1.8 for k, v in rep["orders"].items() if k not in rep["rounding_level"])
    assert (out_dir / "v.json").read_text() == out


def test_verify_flat(capsys):
    code, out, _ = run(capsys, "verify", "--metric", "flat", "--refinements", "2", "--base-n", "32")
    rep = json.loads(out)
    assert code == 0
    assert all(v <= 1e-12 for lv in rep["levels"] for v in lv["residuals"].values())


def test_verify_model_only(capsys):
    assert run(capsys, "verify", "--metric", "picard_local")[0] == 5


def test_verify_external_u(capsys, out_dir):
    run(capsys, "catalog", "sample", "--name", "log_metric", "--n", "32", "--out", "lm.csv")
    (out_dir / "h.json").write_text(json.dumps({"kind": "linear_combination",
                                                "terms": [{"weight": -1, "spec": {"kind": "log_abs"}}]}))
    code, out, _ = run(capsys, "verify", "--h-spec", "h.json", "--u-field", "lm_u.csv")
    assert code == 0 and json.loads(out)["residuals"]["symmetry"] < 1e-12
    assert run(capsys, "verify", "--h-spec", "h.json")[0] == 2
    assert run(capsys, "verify", "--h-spec", "h.json", "--u-field", "nope.csv")[0] == 2


def test_convergence_command(capsys):
    code, out, _ = run(capsys, "convergence", "--metric", "log_metric", "--levels", "2", "--base-n", "64",
                       "--r-out", "0.9")
    rep = json.loads(out)
    assert code == 0 and rep["order"] >= 1.8 and rep["levels"][1]["max_error"] <= 5e-3
    assert run(capsys, "convergence", "--metric", "picard_local")[0] == 5


def _write_profile(path, fn):
    r = dyadic_radii(1e-6, 1e-2)
    RadialProfile(r, fn(r), np.ones_like(r)).to_csv(path)
    return str(path)


def test_classify_profiles(capsys, out_dir):
    p = _write_profile(out_dir / "pl.csv", lambda r: -r * np.log(r))
    code, out, _ = run(capsys, "classify", "--profile", p, "--order", "0")
    assert code == 0 and json.loads(out)["branch"] == "logarithmic" and json.loads(out)["n_plus_1"] == 1
    p = _write_profile(out_dir / "pw.csv", lambda r: r**0.5)
    code, out, _ = run(capsys, "classify", "--profile", p, "--out", "c.json")
    assert code == 0 and json.loads(out)["beta"] == pytest.approx(0.5, abs=1e-9)
    assert json.loads((out_dir / "c.json").read_text())["branch"] == "power"


def test_classify_inconclusive_and_malformed(capsys, out_dir):
    p = _write_profile(out_dir / "osc.csv", lambda r: r**0.5 * np.exp(0.5 * np.sin(3 * np.log(r))))
    code, out, _ = run(capsys, "classify", "--profile", p)
    assert code == 6 and json.loads(out)["branch"] == "inconclusive"
    (out_dir / "bad.csv").write_text("a,b\n1,2\n")
    assert run(capsys, "classify", "--profile", "bad.csv")[0] == 2
    assert run(capsys, "classify", "--profile", "missing.csv")[0] == 2


@pytest.mark.parametrize("fn,order", [(lambda r: r**0.5, None), (lambda r: -r * np.log(r), 0)])
def test_plot_references_existing_files(capsys, out_dir, fn, order):
    p = _write_profile(out_dir / "p.csv", fn)
    args = ["plot", "--profile", p, "--out-dir", "plots"] + ([] if order is None else ["--order", str(order)])
    assert run(capsys, *args)[0] == 0
    script = (out_dir / "plots" / "plot_profile.py").read_text()
    for name in re.findall(r'load\("([^"]+)"\)', script):
        assert (out_dir / "plots" / name).exists()
    compile(script, "plot_profile.py", "exec")


def test_usage_errors():
    with pytest.raises(SystemExit) as info:
        cli.main(["nosuch"])
    assert info.value.code == 2


def test_console_script_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "sklab.cli", "catalog", "list"], capture_output=True, text=True)
    assert out.returncode == 0 and json.loads(out.stdout)["schema_version"] == io.SCHEMA_VERSION
