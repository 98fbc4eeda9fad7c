import csv
from dataclasses import replace

import pytest
from click.testing import CliRunner

from fsalpairs.cli import main
from fsalpairs.library import builtin
from fsalpairs.tableau import load, save


@pytest.fixture
def run(outdir):
    runner = CliRunner()

    def invoke(*args):
        return runner.invoke(main, list(args), catch_exceptions=False)

    return invoke


def test_derive_writes_verified_pair(run, outdir):
    res = run("derive", "--family", "B", "--params", "c2=1/6,c3=1/3,c5=3/4,c6=1")
    assert res.exit_code == 0, res.output
    assert "all satisfied" in res.output
    pair = load(outdir / "B.tab")
    assert pair.mode == "rational" and pair.s == 7


def test_derive_float_root_family(run, outdir):
    out = outdir / "line.tab"
    res = run("derive", "--family", "Bprime", "--params",
              "c2=1/5,c3=1/4,c4=3/5,cp3=1/40,lo=0.8,hi=0.85", "--out", str(out))
    assert res.exit_code == 0, res.output
    pair = load(out)
    assert pair.c[4] == pytest.approx(builtin("sqrt4054").c[4], abs=1e-13)


@pytest.mark.parametrize("params, code", [
    ("c2=1/6,c3=1/6,c5=3/4,c6=1", 2),   # degenerate
    ("c2=1/6,c3=1/3,c4=1/2,c5=3/4", 2),  # wrong parameter set
    ("c2=1/6,c3=1/0,c5=3/4,c6=1", 2),   # unparsable value
])
def test_derive_input_errors(run, params, code):
    res = run("derive", "--family", "B", "--params", params)
    assert res.exit_code == code
    assert "error" in res.output.lower()


def test_derive_no_root(run):
    res = run("derive", "--family", "Bprime", "--params",
              "c2=1/5,c3=1/4,c4=3/5,cp3=1/40,lo=0.3,hi=0.5")
    assert res.exit_code == 3 and "no sign change" in res.output


def test_derive_usage_error(run):
    res = run("derive", "--family", "B", "--params", "c2")
    assert res.exit_code == 2


def test_verify_builtin_and_file(run, outdir):
    res = run("verify", "--pair", "typeB")
    assert res.exit_code == 0 and "all conditions" in res.output
    assert "7/5440" in res.output
    path = outdir / "aprime.tab"
    save(builtin("aprime"), path)
    res = run("verify", "--pair", str(path), "--order", "6")
    assert res.exit_code == 0
    assert res.output.count("\n") > 37  # 37 trees up to order 6 plus headers


def test_verify_reports_violations(run, outdir):
    pair = builtin("fehlberg")
    b = list(pair.b)
    b[2], b[3] = b[3], b[2]
    A = [list(r) for r in pair.A]
    A[-1] = b  # keep the FSAL last row consistent
    path = outdir / "broken.tab"
    save(replace(pair, A=tuple(map(tuple, A)), b=tuple(b), name="broken"), path)
    res = run("verify", "--pair", str(path))
    assert res.exit_code == 1 and "violated" in res.output


def test_verify_bad_inputs(run, outdir):
    assert run("verify", "--pair", "nosuch").exit_code == 2
    bad = outdir / "bad.tab"
    bad.write_text("garbage\n")
    res = run("verify", "--pair", str(bad))
    assert res.exit_code == 2 and "bad.tab:1" in res.output


def test_report(run, outdir):
    path = outdir / "report.csv"
    res = run("report", "--pairs", "typeB,dopri,bs5", "--csv", str(path))
    assert res.exit_code == 0
    assert "7/5440" in res.output and "n/a" in res.output
    rows = list(csv.DictReader(path.open()))
    assert [r["pair"] for r in rows] == ["typeB", "dopri", "bs5"]
    assert float(rows[0]["T6"]) == pytest.approx(8.9041e-4, rel=1e-4)
    assert rows[1]["k6"] == "1/600" and rows[2]["k6"] == ""


def test_integrate(run, outdir):
    res = run("integrate", "--pair", "aprime", "--problem", "a3", "--atol", "1e-8")
    assert res.exit_code == 0
    assert (outdir / "aprime_A3.csv").exists() and "n_rhs" in res.output


def test_integrate_failure(run):
    res = run("integrate", "--pair", "dopri", "--problem", "D5", "--atol", "-1")
    assert res.exit_code == 2


def test_bench(run, outdir):
    res = run("bench", "--pairs", "aprime,dopri", "--problem", "A4", "--n-atol", "4",
              "--workers", "2")
    assert res.exit_code == 0
    rows = list(csv.DictReader((outdir / "bench_A4.csv").open()))
    assert len(rows) == 8 and (outdir / "bench_A4_plot.py").exists()
    res = run("bench", "--pairs", "dopri", "--problem", "A4", "--atol-max", "1e-9",
              "--atol-min", "1e-3")
    assert res.exit_code == 2


def test_scan(run, outdir):
    res = run("scan", "--n", "11")
    assert res.exit_code == 0
    rows = list(csv.DictReader((outdir / "scan.csv").open()))
    assert len(rows) == 11 and float(rows[0]["c3"]) == -0.5
    assert run("scan", "--n", "1").exit_code == 2
    assert run("scan", "--c2", "x").exit_code == 2


def test_stability(run, outdir):
    res = run("stability", "--pair", "dopri", "--points", "64")
    assert res.exit_code == 0
    assert "1/600" in res.output and "-3.306568" in res.output
    rows = list(csv.DictReader((outdir / "dopri_stability.csv").open()))
    assert len(rows) == 64 * 6
