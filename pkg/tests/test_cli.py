import numpy as np
import pytest
from scipy.io import mmread

from pim import pointcloud
from pim.cli import main


@pytest.fixture()
def interval_csv(tmp_path):
    path = tmp_path / "interval.csv"
    assert main(["generate", "--shape", "interval", "--n", "101",
                 "--out", str(path)]) == 0
    return str(path)


def read_solution(path):
    rows = open(path).read().strip().splitlines()
    body = np.array([[float(c) for c in r.split(",")] for r in rows[1:]])
    return rows[0], body


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def test_generate_writes_loadable_cloud(tmp_path, capsys):
    out = tmp_path / "disk.csv"
    rc = main(["generate", "--shape", "disk", "--n", "300", "--out", str(out)])
    assert rc == 0
    msg = capsys.readouterr().out
    assert "boundary" in msg and "sum(V)" in msg
    cloud = pointcloud.load(out)
    assert cloud.ambient_dim == 2
    assert cloud.volume_weights.sum() == pytest.approx(np.pi, rel=0.02)


def test_generate_seed_determinism(tmp_path):
    args = ["generate", "--shape", "disk", "--n", "200", "--jitter", "0.25",
            "--out"]
    a, b, c = (tmp_path / name for name in ("a.csv", "b.csv", "c.csv"))
    assert main(args + [str(a), "--seed", "5"]) == 0
    assert main(args + [str(b), "--seed", "5"]) == 0
    assert main(args + [str(c), "--seed", "6"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_generate_rejects_bad_spec(tmp_path, capsys):
    rc = main(["generate", "--shape", "disk", "--n", "-5",
               "--out", str(tmp_path / "x.csv")])
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_missing_out_is_usage_error(capsys):
    rc = main(["generate", "--shape", "disk", "--n", "10"])
    assert rc == 2
    assert "--out" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def test_solve_builtin_case(tmp_path, interval_csv, capsys):
    out = tmp_path / "solution.csv"
    report = tmp_path / "run.txt"
    rc = main(["solve", "--cloud", interval_csv, "--case", "interval_sine",
               "--t", "0.004", "--beta", "0.05",
               "--out", str(out), "--report", str(report)])
    assert rc == 0
    header, body = read_solution(out)
    assert header == "x1,u"
    assert body.shape == (101, 2)
    # interior values approximate sin(pi x); crude sanity, not a convergence claim
    mid = body[50]
    assert abs(mid[1] - np.sin(np.pi * mid[0])) < 0.2
    text = report.read_text()
    assert "residual = " in text and "max_abs_error_vs_exact" in text
    assert "case = interval_sine" in text
    assert "solved n=101" in capsys.readouterr().out


def test_solve_constant_identity(tmp_path, interval_csv):
    # zero source + constant boundary data must return that constant
    out = tmp_path / "const.csv"
    rc = main(["solve", "--cloud", interval_csv, "--f-const", "0",
               "--b-const", "1", "--t", "0.004", "--beta", "0.1",
               "--out", str(out)])
    assert rc == 0
    _, body = read_solution(out)
    assert np.max(np.abs(body[:, 1] - 1.0)) < 1e-9
    # default report path appears next to the solution
    assert (tmp_path / "const.csv.report.txt").exists()


def test_solve_explicit_files(tmp_path, interval_csv):
    fsrc = tmp_path / "f.csv"
    fsrc.write_text("".join(f"{v}\n" for v in np.zeros(101)))
    bsrc = tmp_path / "b.csv"
    bsrc.write_text("2.0\n2.0\n")
    out = tmp_path / "sol.csv"
    rc = main(["solve", "--cloud", interval_csv, "--f-file", str(fsrc),
               "--b-file", str(bsrc), "--t", "0.004", "--beta", "0.1",
               "--out", str(out)])
    assert rc == 0
    _, body = read_solution(out)
    assert np.max(np.abs(body[:, 1] - 2.0)) < 1e-9
    text = (tmp_path / "sol.csv.report.txt").read_text()
    assert "case = (explicit data)" in text


def test_solve_corrupt_cloud(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("this,is,not\na,cloud,file\n")
    rc = main(["solve", "--cloud", str(bad), "--f-const", "0",
               "--out", str(tmp_path / "x.csv")])
    assert rc == 2
    assert "cannot read cloud" in capsys.readouterr().err
    assert not (tmp_path / "x.csv").exists()


def test_solve_case_and_data_conflict(tmp_path, interval_csv, capsys):
    rc = main(["solve", "--cloud", interval_csv, "--case", "interval_sine",
               "--f-const", "1", "--out", str(tmp_path / "x.csv")])
    assert rc == 2
    assert "not both" in capsys.readouterr().err


def test_solve_t_without_beta(tmp_path, interval_csv, capsys):
    rc = main(["solve", "--cloud", interval_csv, "--f-const", "0",
               "--t", "0.01", "--out", str(tmp_path / "x.csv")])
    assert rc == 2
    assert "together" in capsys.readouterr().err


def test_solve_rejects_nonpositive_t(tmp_path, interval_csv, capsys):
    rc = main(["solve", "--cloud", interval_csv, "--f-const", "0",
               "--t", "-0.01", "--beta", "0.1",
               "--out", str(tmp_path / "x.csv")])
    assert rc == 2
    assert "positive" in capsys.readouterr().err


def test_solve_value_length_mismatch(tmp_path, interval_csv, capsys):
    fsrc = tmp_path / "f.csv"
    fsrc.write_text("0.0\n0.0\n")  # 2 values for 101 points
    rc = main(["solve", "--cloud", interval_csv, "--f-file", str(fsrc),
               "--out", str(tmp_path / "x.csv")])
    assert rc == 2
    assert "expected 101" in capsys.readouterr().err


def test_solve_guardrail_warning_on_stderr(tmp_path, interval_csv, capsys):
    out = tmp_path / "warned.csv"
    rc = main(["solve", "--cloud", interval_csv, "--f-const", "0",
               "--b-const", "0", "--t", "1e-4", "--beta", "0.5",
               "--out", str(out)])
    assert rc == 0
    assert "guardrail" in capsys.readouterr().err
    text = (tmp_path / "warned.csv.report.txt").read_text()
    assert "guardrail_flags = " in text
    assert "none" not in [ln.split(" = ")[1] for ln in text.strip().splitlines()
                          if ln.startswith("guardrail_flags")]


def test_solve_matrix_dump(tmp_path, interval_csv):
    mtx = tmp_path / "system.mtx"
    rc = main(["solve", "--cloud", interval_csv, "--case", "interval_sine",
               "--t", "0.004", "--beta", "0.1",
               "--out", str(tmp_path / "s.csv"), "--matrix-out", str(mtx)])
    assert rc == 0
    mat = mmread(mtx)
    assert mat.shape == (101, 101)


def test_solve_alternate_profile(tmp_path, interval_csv):
    out = tmp_path / "tg.csv"
    rc = main(["solve", "--cloud", interval_csv, "--f-const", "0",
               "--b-const", "3", "--t", "0.004", "--beta", "0.1",
               "--profile", "truncated_gaussian", "--out", str(out)])
    assert rc == 0
    _, body = read_solution(out)
    assert np.max(np.abs(body[:, 1] - 3.0)) < 1e-9


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def test_sweep_runs_and_writes_csv(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    rc = main(["sweep", "--case", "interval_sine", "--levels", "51,101",
               "--out", str(out)])
    assert rc == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0].startswith("level,n,h,t,beta")
    assert len(lines) == 3
    stdout = capsys.readouterr().out
    assert "sweep complete: 2 level(s)" in stdout


def test_sweep_seed_determinism(tmp_path):
    outs = []
    for name in ("s1.csv", "s2.csv"):
        out = tmp_path / name
        assert main(["sweep", "--case", "interval_sine", "--levels", "51,101",
                     "--seed", "3", "--out", str(out)]) == 0
        outs.append(out.read_text().strip().splitlines())
    for r1, r2 in zip(outs[0], outs[1]):
        # identical except the timing column
        assert r1.split(",")[:9] == r2.split(",")[:9]


def test_sweep_rejects_steep_coupling_exponent(tmp_path, capsys):
    rc = main(["sweep", "--case", "interval_sine", "--levels", "51",
               "--gamma-t", "0.7", "--out", str(tmp_path / "x.csv")])
    assert rc == 2
    err = capsys.readouterr().err
    assert "2/3" in err and "h/t^(3/2)" in err


def test_sweep_unknown_case(tmp_path, capsys):
    rc = main(["sweep", "--case", "wave_equation", "--levels", "51",
               "--out", str(tmp_path / "x.csv")])
    assert rc == 2
    assert "interval_sine" in capsys.readouterr().err


def test_sweep_bad_levels(tmp_path, capsys):
    rc = main(["sweep", "--case", "interval_sine", "--levels", "abc",
               "--out", str(tmp_path / "x.csv")])
    assert rc == 2


# ---------------------------------------------------------------------------
# config file plumbing and oracle checks
# ---------------------------------------------------------------------------

def test_config_file_and_flag_precedence(tmp_path, interval_csv):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("kernel.profile = truncated_gaussian\nsolver.tol = 1e-9\n")
    out = tmp_path / "cfg.csv"
    rc = main(["--config", str(cfg), "solve", "--cloud", interval_csv,
               "--f-const", "0", "--b-const", "1", "--t", "0.004",
               "--beta", "0.1", "--out", str(out)])
    assert rc == 0
    text = (tmp_path / "cfg.csv.report.txt").read_text()
    assert "profile = truncated_gaussian" in text
    # an explicit flag beats the file
    rc = main(["--config", str(cfg), "solve", "--cloud", interval_csv,
               "--f-const", "0", "--b-const", "1", "--t", "0.004",
               "--beta", "0.1", "--profile", "cubic", "--out", str(out)])
    assert rc == 0
    assert "profile = cubic" in (tmp_path / "cfg.csv.report.txt").read_text()


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("solver.tool = 1e-9\n")
    rc = main(["--config", str(cfg), "oracle-check"])
    assert rc == 2
    assert "solver.tool" in capsys.readouterr().err


def test_oracle_check_all_pass(capsys):
    rc = main(["oracle-check"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "0 failure(s) out of 7 checks" in out
    assert out.count("  pass  ") == 7
