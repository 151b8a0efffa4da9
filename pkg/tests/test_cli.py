import csv
import math

import numpy as np
import pytest

from surftrap.cli import EXIT_CONVERGENCE, EXIT_DOMAIN, EXIT_OK, EXIT_ORACLE, main
from surftrap.finiteplane import modified_greens
from surftrap.gap1d import field_gap, field_gap_gradient, field_pol, strip_alpha
from surftrap.gapsolver import line_curve
from surftrap.geomfile import format_geometry, read_geometry


def run(tmp_path, *argv, name="out.csv"):
    path = tmp_path / name
    code = main([*argv, "-o", str(path)])
    text = path.read_text() if path.exists() else ""
    return code, text


def parse(text):
    comments = [ln for ln in text.splitlines() if ln.startswith("#")]
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    rows = list(csv.DictReader(body))
    return comments, rows


def test_field_gap_matches_library(tmp_path):
    code, text = run(tmp_path, "field", "--model", "gap", "--g", "0.5", "--x=-1:1:5", "--z", "0.3")
    assert code == EXIT_OK
    comments, rows = parse(text)
    assert comments[0].startswith("# surftrap_version=")
    assert "# g=0.5" in comments and "# model=gap" in comments
    assert len(rows) == 5
    for r in rows:
        x, z = float(r["x"]), float(r["z"])
        assert float(r["phi"]) == pytest.approx(field_gap(x, z, 0.5), rel=1e-11)
        gx, gz = field_gap_gradient(x, z, 0.5)
        assert float(r["dphi_dx"]) == pytest.approx(gx, rel=1e-11, abs=1e-15)
        assert float(r["dphi_dz"]) == pytest.approx(gz, rel=1e-11, abs=1e-15)
        assert float(r["dphi_dy"]) == 0.0


def test_field_pol_on_plane(tmp_path):
    code, text = run(tmp_path, "field", "--model", "pol", "--g", "1", "--x=-0.4:0.4:3", "--z", "1e-9")
    assert code == EXIT_OK
    _, rows = parse(text)
    for r in rows:
        assert float(r["phi"]) == pytest.approx(field_pol(float(r["x"]), 1e-9, 1.0), rel=1e-10)


def test_empty_grid_gives_header_only(tmp_path):
    code, text = run(tmp_path, "field", "--model", "gap", "--g", "1", "--x", "0:1:0")
    assert code == EXIT_OK
    lines = text.splitlines()
    assert lines[-1] == "x,y,z,phi,dphi_dx,dphi_dy,dphi_dz"
    assert all(ln.startswith("#") for ln in lines[:-1])


def test_output_is_deterministic(tmp_path):
    args = ("field", "--model", "ring", "--R1", "0.7", "--R2", "3.4", "--g", "0.1",
            "--x", "0", "--z", "0.8:1.2:3")
    _, a = run(tmp_path, *args, name="a.csv")
    _, b = run(tmp_path, *args, name="b.csv")
    assert a == b
    raw = (tmp_path / "a.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")


def test_domain_errors_exit_1(tmp_path, capsys):
    assert run(tmp_path, "field", "--model", "gap", "--g", "-1")[0] == EXIT_DOMAIN
    assert "--g" in capsys.readouterr().err
    assert run(tmp_path, "field", "--model", "gap", "--g", "1", "--x", "a:b")[0] == EXIT_DOMAIN
    assert main(["field", "--model", "bogus"]) == EXIT_DOMAIN
    assert run(tmp_path, "greens-finite", "--rho", "1")[0] == EXIT_DOMAIN


def test_field_reports_offending_point(tmp_path, capsys):
    code, _ = run(tmp_path, "field", "--model", "ring-disc", "--R1", "0.7", "--R2", "3.7", "--S", "10",
                  "--x", "0.5", "--z", "1")
    assert code == EXIT_DOMAIN
    assert "(0.5, 0.0, 1.0)" in capsys.readouterr().err


def test_ring_optimize_rows(tmp_path):
    code, text = run(tmp_path, "ring-optimize", "--gaps", "0.1,0.5")
    assert code == EXIT_OK
    _, rows = parse(text)
    assert [float(r["g_over_z"]) for r in rows] == [0.0, 0.1, 0.5]
    first = rows[0]
    assert (float(first["R1_ratio"]), float(first["R2_ratio"]), float(first["kappa_ratio"])) == (1.0, 1.0, 1.0)
    k = [float(r["kappa_ratio"]) for r in rows]
    assert k[0] >= k[1] >= k[2]
    assert 0.90 <= k[2] <= 0.99


def test_ring_optimize_failure_continues(tmp_path):
    code, text = run(tmp_path, "ring-optimize", "--gaps", "0.1,1.5")
    assert code == EXIT_CONVERGENCE
    comments, rows = parse(text)
    assert len(rows) == 3
    assert rows[2]["kappa_ratio"] == "nan"
    assert any(c.startswith("# error=g_over_z=1.5") for c in comments)


def test_ring_optimize_secular_frequency(tmp_path):
    code, _ = run(tmp_path, "ring-optimize", "--gaps", "0.1", "--mass-amu", "40", "--charge-e", "1",
                  "--urf-volt", "100", "--omega-rf-hz", "2e7")
    assert code == EXIT_DOMAIN
    code, text = run(tmp_path, "ring-optimize", "--gaps", "0.1", "--mass-amu", "40", "--charge-e", "1",
                     "--urf-volt", "100", "--omega-rf-hz", "2e7", "--z-metres", "1e-4")
    assert code == EXIT_OK
    _, rows = parse(text)
    assert all(float(r["secular_hz"]) > 0 for r in rows)


def test_ring_finite_optimize(tmp_path):
    code, text = run(tmp_path, "ring-finite-optimize", "--z-over-s", "0,0.2", "--g", "0.1")
    assert code == EXIT_OK
    comments, rows = parse(text)
    assert (float(rows[0]["R1_ratio"]), float(rows[0]["R2_ratio"]), float(rows[0]["kappa_ratio"])) == (1.0, 1.0, 1.0)
    r = rows[1]
    assert abs(float(r["R2_ratio"]) - 1.0) > abs(float(r["R1_ratio"]) - 1.0)
    assert 0.9 <= float(r["kappa_ratio"]) <= 1.0
    gap_ratio = float(next(c for c in comments if c.startswith("# gap_kappa_ratio=")).split("=")[1])
    assert float(r["kappa_ratio_combined"]) == pytest.approx(float(r["kappa_ratio"]) + gap_ratio - 1.0, rel=1e-10)


def _strip_file(tmp_path, n=8):
    curves = [line_curve((0.5, -2.0), (0.5, 2.0), 0.2, n=n, name="right"),
              line_curve((-0.5, 2.0), (-0.5, -2.0), 0.2, n=n, name="left")]
    path = tmp_path / "strip.geom"
    path.write_text(format_geometry({"rf": 1.0}, curves))
    return path


def test_gap_solve_strip(tmp_path):
    geom = _strip_file(tmp_path)
    ann = tmp_path / "solved.geom"
    code, text = run(tmp_path, "gap-solve", "--geometry", str(geom), "--annotated", str(ann))
    assert code == EXIT_OK
    comments, rows = parse(text)
    assert len(rows) == 16
    ref = strip_alpha(1.0, 0.2)
    for r in rows:
        assert float(r["alpha"]) == pytest.approx(ref, rel=1e-4)
        assert abs(float(r["sigma_residual"])) < 1e-6
    _, curves = read_geometry(ann)
    np.testing.assert_allclose(curves[0].alpha, ref, rtol=1e-4)
    # the multiplier scales the reported amplitudes
    code, text = run(tmp_path, "gap-solve", "--geometry", str(geom), "--multiplier", "0.5", name="half.csv")
    _, half = parse(text)
    assert float(half[0]["alpha"]) == pytest.approx(0.5 * float(rows[0]["alpha"]), rel=1e-12)


def test_gap_solve_single_gap(tmp_path):
    path = tmp_path / "one.geom"
    path.write_text(format_geometry({"rf": 1.0}, [line_curve((0.0, -1.0), (0.0, 1.0), 0.1, n=6, name="g")]))
    code, text = run(tmp_path, "gap-solve", "--geometry", str(path))
    assert code == EXIT_OK
    _, rows = parse(text)
    assert max(abs(float(r["alpha"])) for r in rows) < 1e-10


def test_gap_solve_parse_error(tmp_path, capsys):
    path = tmp_path / "bad.geom"
    path.write_text("[potentials]\nrf = 1\n[curve a electrode=rf]\n0 0 0\n")
    assert run(tmp_path, "gap-solve", "--geometry", str(path))[0] == EXIT_DOMAIN
    assert "line 4" in capsys.readouterr().err


def test_oracle_none_and_exit_codes(tmp_path, monkeypatch):
    code, text = run(tmp_path, "oracle", "--suite", "none")
    assert code == EXIT_OK
    assert text.splitlines()[-1] == "suite,count,max_err,median_err,tol,passed,note"
    code, text = run(tmp_path, "oracle", "--suite", "gap-field", "--count", "10")
    assert code == EXIT_OK
    _, rows = parse(text)
    assert rows[0]["passed"] == "yes" and float(rows[0]["max_err"]) < 1e-4
    assert run(tmp_path, "oracle", "--suite", "nope")[0] == EXIT_DOMAIN

    import surftrap.oracle as oracle
    failing = oracle.SuiteResult("fake", 1, 1.0, 1.0, 1e-4, False)
    monkeypatch.setattr(oracle, "run_suite", lambda *a, **k: [failing])
    assert run(tmp_path, "oracle", "--suite", "all")[0] == EXIT_ORACLE


def test_greens_finite(tmp_path):
    code, text = run(tmp_path, "greens-finite", "--rho", "1", "--S", "10", "--x", "0:2:3", "--z", "0.5")
    assert code == EXIT_OK
    _, rows = parse(text)
    for r in rows:
        x = float(r["x"])
        assert float(r["greens"]) == pytest.approx(modified_greens(1.0, 10.0, (x, 0.0, 0.5)), rel=1e-11)
        assert float(r["greens_free"]) == pytest.approx(0.5 / (2 * math.pi * ((x - 1) ** 2 + 0.25) ** 1.5), rel=1e-11)


def test_help_and_usage(capsys):
    assert main(["--version"]) == EXIT_OK
    assert main([]) == EXIT_DOMAIN
