import subprocess
import sys

import numpy as np
import pytest

from curlcurl.cli import run, worker_count
from curlcurl.config import ConfigError, parse_config
from curlcurl.corpus import cutoff
from curlcurl.grid import CylField, build_grid, gaussian, read_field_csv, write_field_csv

BASE = """\
seed = 3
[grid]
rmax = 8.0
zmax = 8.0
nr = 33
nz = 33
"""


def _write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_defaults(tmp_path):
    cfg = parse_config(BASE)
    assert cfg.grid.nr == 33 and cfg.seed == 3
    assert cfg.solver.tol_J == 1e-14 and cfg.nonlinearity.p == 3.0
    assert cfg.reconstruct == {"L": 3.0, "n": 41, "method": "quintic"}


@pytest.mark.parametrize(
    "extra,line,needle",
    [
        ("[solver]\ntol_nehari = -1.0\n", 8, "tol"),
        ("[solver]\nbogus = 1\n", 8, "unknown key"),
        ("[nonlinearity]\nkind = \"cubic\"\n", 8, "must be one of"),
        ("[nonlinearity]\np = 6.0\n", 8, "p"),
        ("[reconstruct]\nn = 40\n", 8, "odd"),
        ("[mystery]\na = 1\n", 7, "unknown section"),
        ("[grid2]\n", 7, "unknown section"),
    ],
)
def test_config_errors_carry_lines(extra, line, needle):
    with pytest.raises(ConfigError) as exc:
        parse_config(BASE + extra, "run.toml")
    assert needle in str(exc.value)
    if line is not None:
        assert exc.value.line == line and f"run.toml:{line}:" in str(exc.value)


def test_unknown_top_level_key():
    with pytest.raises(ConfigError, match="unknown top-level") as exc:
        parse_config("colour = 1\n" + BASE)
    assert exc.value.line == 1


def test_bad_nz_points_at_key():
    text = BASE.replace("nz = 33", "nz = 32")
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == 6


def test_missing_grid():
    with pytest.raises(ConfigError, match=r"\[grid\]"):
        parse_config("seed = 1\n")


def test_wrong_type():
    with pytest.raises(ConfigError) as exc:
        parse_config(BASE.replace("nr = 33", "nr = \"many\""))
    assert exc.value.line == 5


def test_missing_config_file_exit_64(tmp_path, capsys):
    assert run(["solve", "--config", str(tmp_path / "nope.toml")]) == 64
    assert "cannot read" in capsys.readouterr().err


def test_usage_errors_exit_64(capsys):
    assert run([]) == 64
    assert run(["frobnicate"]) == 64
    assert run(["verify", "--config", "x.toml", "--suite", "nonsense"]) == 64


def test_bad_config_exit_64(tmp_path, capsys):
    p = _write(tmp_path, BASE + "[solver]\nmax_iters = \"a lot\"\n")
    assert run(["spectrum", "--config", str(p)]) == 64
    assert "run.toml:8:" in capsys.readouterr().err


def test_verify_hardy_exit_0(tmp_path, capsys):
    p = _write(tmp_path, BASE + "[verify]\ncorpus_size = 20\n")
    out = tmp_path / "o"
    assert run(["verify", "--config", str(p), "--suite", "hardy", "--out", str(out)]) == 0
    lines = (out / "verify_hardy.csv").read_text().splitlines()
    assert lines[0] == "id,lhs,rhs,constant,pass,slack" and len(lines) == 22
    assert all(l.split(",")[4] == "true" for l in lines[1:])


def test_verify_all_exit_0(tmp_path, capsys):
    p = _write(tmp_path, BASE + "[verify]\ncorpus_size = 6\n")
    assert run(["verify", "--config", str(p), "--suite", "all", "--out", str(tmp_path / "o")]) == 0


def _ball_config(tmp_path):
    g = build_grid(8.0, 8.0, 33, 33)
    V = CylField(g, np.where(g.R**2 + g.Z**2 < 9.0, -10.0, 1.0))
    write_field_csv(V, tmp_path / "V.csv")
    return _write(tmp_path, BASE + "[potential]\nkind = \"csv\"\npath = \"V.csv\"\n")


def test_solve_refuses_noncoercive(tmp_path, capsys):
    p = _ball_config(tmp_path)
    assert run(["solve", "--config", str(p), "--out", str(tmp_path / "o")]) == 65
    err = capsys.readouterr().err
    assert "equivalent-norm" in err
    assert not (tmp_path / "o" / "trace.csv").exists()
    assert run(["spectrum", "--config", str(p)]) == 65


def test_solve_refuses_asymmetric_potential(tmp_path, capsys):
    g = build_grid(8.0, 8.0, 33, 33)
    write_field_csv(CylField(g, 2.0 + 0.1 * g.Z), tmp_path / "V.csv")
    p = _write(tmp_path, BASE + "[potential]\nkind = \"csv\"\npath = \"V.csv\"\n")
    assert run(["solve", "--config", str(p)]) == 65
    assert "reversed Steiner" in capsys.readouterr().err


def test_solve_writes_artifacts(tmp_path, capsys):
    p = _write(tmp_path, BASE)
    out = tmp_path / "o"
    assert run(["solve", "--config", str(p), "--out", str(out)]) == 0
    summary = (out / "summary.txt").read_text()
    assert "converged=true" in summary and "symmetric=true" in summary
    u = read_field_csv(out / "field.csv")
    assert u.grid == build_grid(8.0, 8.0, 33, 33)
    assert (out / "trace.csv").read_text().startswith("iter,J,residual,t\n")


def test_solve_not_converged_exit_2(tmp_path, capsys):
    p = _write(tmp_path, BASE + "[solver]\nmax_iters = 2\n")
    assert run(["solve", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_symmetrize(tmp_path, capsys):
    g = build_grid(4.0, 4.0, 17, 17)
    u = CylField(g, g.sample(lambda R, Z: np.exp(-R**2 - (Z - 1.3) ** 2)).values * cutoff(g))
    write_field_csv(u, tmp_path / "u.csv")
    assert run(["symmetrize", "--in", str(tmp_path / "u.csv"), "--out", str(tmp_path / "s.csv")]) == 0
    s = read_field_csv(tmp_path / "s.csv")
    assert np.array_equal(np.sort(s.values, axis=1), np.sort(u.values, axis=1))
    assert "pass=true" in capsys.readouterr().out


def test_symmetrize_negative_input_exit_65(tmp_path, capsys):
    g = build_grid(4.0, 4.0, 17, 17)
    write_field_csv(gaussian(g) * -1.0, tmp_path / "u.csv")
    assert run(["symmetrize", "--in", str(tmp_path / "u.csv"), "--out", str(tmp_path / "s.csv")]) == 65


def test_symmetrize_reports_boundary_data(tmp_path, capsys):
    g = build_grid(4.0, 4.0, 17, 17)
    write_field_csv(g.sample(lambda R, Z: np.exp(-R**2 - (Z - 1.3) ** 2)), tmp_path / "u.csv")
    run(["symmetrize", "--in", str(tmp_path / "u.csv"), "--out", str(tmp_path / "s.csv")])
    assert "precondition_failed=u is nonzero on the Dirichlet boundary" in capsys.readouterr().out


def test_reconstruct(tmp_path, capsys):
    g = build_grid(4.0, 4.0, 33, 33)
    write_field_csv(gaussian(g), tmp_path / "u.csv")
    out = tmp_path / "r"
    code = run(["reconstruct", "--in", str(tmp_path / "u.csv"), "--out", str(out), "--L", "2", "--n", "11",
                "--levels", "11,21"])
    assert code == 0
    assert (out / "field3d.vtk").exists() and (out / "slice.csv").exists()
    text = capsys.readouterr().out
    assert "order_div_11_21=" in text and "max_interior_residual=" in text


def test_reconstruct_rejects_large_cube(tmp_path, capsys):
    g = build_grid(4.0, 4.0, 33, 33)
    write_field_csv(gaussian(g), tmp_path / "u.csv")
    assert run(["reconstruct", "--in", str(tmp_path / "u.csv"), "--out", str(tmp_path / "r"), "--L", "5"]) == 65


def test_worker_count(monkeypatch):
    monkeypatch.setenv("CURLCURL_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("CURLCURL_THREADS", "zero")
    assert worker_count() >= 1


def test_help_lists_defaults():
    res = subprocess.run([sys.executable, "-m", "curlcurl.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "tol_J=1e-14" in res.stdout and "CURLCURL_THREADS" in res.stdout
