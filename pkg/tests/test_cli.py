import csv
import json

import numpy as np
import pytest

from confcov.cli import (
    COMMANDS,
    covariance_error,
    curvature_error,
    is_monotone,
    load_seed,
    main,
    resolve_config,
    save_seed,
)
from confcov.constraints import GR, rho
from confcov.geometry import Grid, calculus
from confcov.geometry.fieldio import read_field
from confcov.parametrizations import assemble


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture
def cmc_seed(tmp_path):
    """seed.json: flat metric, tau = 0.5, small flat TT sigma, phi = 1."""
    assert run("generate", "--kind", "flat-metric", "--size", 16, "--out", tmp_path / "g.gfld") == 0
    assert run("generate", "--kind", "tt-tensor", "--size", 16, "--amplitude", 0.05,
               "--seed", 3, "--out", tmp_path / "s.gfld") == 0
    spec = {"g": "g.gfld", "sigma": "s.gfld", "tau": 0.5, "phi": 1.0}
    (tmp_path / "seed.json").write_text(json.dumps(spec))
    return tmp_path / "seed.json"


def test_generate_flat_metric_has_no_curvature(tmp_path):
    out = tmp_path / "flat.gfld"
    assert run("generate", "--kind", "flat-metric", "--size", 16, "--out", out) == 0
    g = read_field(out, metric=True)
    assert g.grid.shape == (16, 16, 16)
    curv = calculus.curvature(g)
    for part in (curv.riemann, curv.ricci, curv.scalar):
        assert np.max(np.abs(part.values)) < 1e-12


def test_generate_is_reproducible(tmp_path):
    a, b, c = (tmp_path / f"{x}.gfld" for x in "abc")
    run("generate", "--kind", "tt-tensor", "--seed", 5, "--size", 8, "--out", a)
    run("generate", "--kind", "tt-tensor", "--seed", 5, "--size", 8, "--out", b)
    run("generate", "--kind", "tt-tensor", "--seed", 6, "--size", 8, "--out", c)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_generate_conf_flat_and_report(tmp_path):
    out, rep = tmp_path / "cf.gfld", tmp_path / "r.json"
    assert run("generate", "--kind", "conf-flat", "--size", 12, "--seed", 1,
               "--out", out, "--report", rep) == 0
    g = read_field(out, metric=True).values
    assert np.allclose(g[1], 0.0) and np.allclose(g[0], g[3])
    report = json.loads(rep.read_text())
    assert {"tool_version", "resolved_config", "rng_seed", "grid", "wall_time",
            "result"} <= set(report)
    assert report["rng_seed"] == 1


def test_generate_positive_scalar(tmp_path):
    out = tmp_path / "psi.gfld"
    run("generate", "--kind", "band-limited-scalar", "--positive", "--amplitude", 0.2,
        "--size", 8, "--out", out)
    psi = read_field(out).values
    assert psi.min() > np.exp(-0.21) and psi.max() < np.exp(0.21)


def test_residual_command(tmp_path, cmc_seed):
    gk = (tmp_path / "gh.gfld", tmp_path / "kh.gfld")
    assert run("assemble", "--seed", cmc_seed, "--out-g", gk[0], "--out-k", gk[1]) == 0
    out = tmp_path / "res.json"
    assert run("residual", "--g", gk[0], "--k", gk[1], "--model", "egb", "--alpha", 2.0,
               "--out", out) == 0
    result = json.loads(out.read_text())["result"]
    assert result["model"] == {"model": "egb", "alpha": 2.0}
    expect = rho(GR(), *assemble(load_seed(cmc_seed))).values
    assert result["rho_linf"] == pytest.approx(np.max(np.abs(expect)), rel=1e-12)
    assert run("residual", "--g", gk[0], "--k", gk[1], "--tol", 1e-12, "--out", out) == 3


def test_decompose_command(tmp_path):
    run("generate", "--kind", "conf-flat", "--size", 16, "--amplitude", 0.1, "--out", tmp_path / "g.gfld")
    run("generate", "--kind", "tt-tensor", "--size", 16, "--seed", 2, "--out", tmp_path / "h.gfld")
    assert run("decompose", "--g", tmp_path / "g.gfld", "--h", tmp_path / "h.gfld",
               "--out-sigma", tmp_path / "s.gfld", "--out-w", tmp_path / "w.gfld",
               "--report", tmp_path / "r.json") == 0
    g = read_field(tmp_path / "g.gfld", metric=True)
    sigma = read_field(tmp_path / "s.gfld")
    assert np.max(np.abs(calculus.divergence(g, sigma).values)) < 1e-9
    assert json.loads((tmp_path / "r.json").read_text())["result"]["residual"] < 1e-10


def test_check_covariance_command(tmp_path, cmc_seed):
    psi = tmp_path / "psi.gfld"
    run("generate", "--kind", "band-limited-scalar", "--positive", "--amplitude", 0.1,
        "--size", 16, "--seed", 9, "--out", psi)
    out = tmp_path / "cov.json"
    assert run("check-covariance", "--seed-file", cmc_seed, "--psi", psi, "--out", out) == 0
    result = json.loads(out.read_text())["result"]
    assert result["passed"] and set(result["models"]) == {"gr", "egb", "fofr"}


def test_solve_command(tmp_path, cmc_seed):
    out, trace, rep = tmp_path / "out" / "sol.json", tmp_path / "t.csv", tmp_path / "r.json"
    assert run("solve", "--seed", cmc_seed, "--mode", "cmc", "--out-seed", out,
               "--trace", trace, "--report", rep) == 0
    solved = load_seed(out)
    assert np.max(np.abs(rho(GR(), *assemble(solved)).values)) < 1e-8
    rows = list(csv.DictReader(trace.open()))
    assert rows[0]["iter"] == "0" and float(rows[-1]["rho_linf"]) < 1e-8
    assert json.loads(rep.read_text())["result"]["iterations"] == len(rows) - 1


def test_solve_failure_exit_code(tmp_path, cmc_seed):
    trace = tmp_path / "t.csv"
    code = run("solve", "--seed", cmc_seed, "--mode", "cmc", "--max-newton", 1,
               "--out-seed", tmp_path / "o.json", "--trace", trace)
    assert code == 3
    assert len(list(csv.DictReader(trace.open()))) == 2


def test_seed_round_trip(tmp_path, cmc_seed):
    seed = load_seed(cmc_seed)
    save_seed(seed, tmp_path / "copy" / "s.json")
    again = load_seed(tmp_path / "copy" / "s.json")
    for name in ("g", "tau", "sigma", "phi", "W"):
        assert np.array_equal(getattr(seed, name).values, getattr(again, name).values)


def test_convergence_command(tmp_path):
    out = tmp_path / "c.csv"
    assert run("convergence", "--suite", "curvature", "--sizes", "8,16", "--out", out) == 0
    rows = list(csv.DictReader(out.open()))
    assert [r["size"] for r in rows] == ["8", "16"] and rows[0]["monotone"] == "1"
    assert run("convergence", "--suite", "york", "--sizes", "8,16", "--out", out) == 0
    assert run("convergence", "--suite", "covariance", "--sizes", "8,16", "--psi-one",
               "--out", out) == 0


def test_convergence_helpers():
    assert curvature_error(Grid.cube(3, 16), 0) < curvature_error(Grid.cube(3, 8), 0)
    assert covariance_error(Grid.cube(3, 8), 0, psi_one=True) < 1e-12
    assert is_monotone([3, 2, 2, 0]) and not is_monotone([1, 2])


def test_usage_errors(tmp_path, capsys):
    assert run() == 1
    assert run("generate", "--kind", "nope", "--out", tmp_path / "x") == 1
    assert run("generate", "--kind", "flat-metric") == 1
    assert run("generate", "--bogus") == 1
    assert run("generate", "--seed", "abc", "--kind", "flat-metric", "--out", tmp_path / "x") == 1
    assert run("convergence", "--suite", "nope", "--out", tmp_path / "x") == 1
    assert "usage" in capsys.readouterr().err


def test_validation_errors(tmp_path):
    assert run("residual", "--g", tmp_path / "missing.gfld", "--k", tmp_path / "m.gfld",
               "--out", tmp_path / "o.json") == 2
    bad = tmp_path / "seed.json"
    bad.write_text("{not json")
    assert run("assemble", "--seed", bad, "--out-g", tmp_path / "a", "--out-k", tmp_path / "b") == 2
    assert run("convergence", "--suite", "york", "--sizes", "16,8", "--out", tmp_path / "c") == 2


def test_config_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"size": 12, "amplitude": 0.3, "zero-mean": True}))
    resolved = resolve_config("generate", {"config": str(cfg), "amplitude": 0.5})
    assert resolved["size"] == 12 and resolved["amplitude"] == 0.5
    assert resolved["zero_mean"] is True and resolved["n"] == 3
    cfg.write_text(json.dumps({"nope": 1}))
    assert run("generate", "--config", cfg, "--kind", "flat-metric", "--out", tmp_path / "x") == 1
    cfg.write_text(json.dumps({"sizes": [8, 16]}))
    assert resolve_config("convergence", {"config": str(cfg)})["sizes"] == [8, 16]


def test_every_command_has_a_handler():
    from confcov.cli import HANDLERS

    assert set(HANDLERS) == set(COMMANDS)
