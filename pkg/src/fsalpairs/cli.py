"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 bad input or degenerate
parameters, 3 numerical failure.
"""

from __future__ import annotations

import csv
import os
import sys
from fractions import Fraction
from pathlib import Path

import click

from . import analyze, bench, derive, library, problems
from .integrate import ControllerConfig, IntegrationError, integrate_adaptive, write_trajectory
from .tableau import FLOAT, RATIONAL, TableauParseError, TableauStructureError, load, save

OUTPUT_DIR_ENV = "FSALPAIRS_OUTPUT_DIR"

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


def _out_path(path: str | None, default_name: str) -> Path:
    if path:
        return Path(path)
    return Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / default_name


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_pair(ref: str):
    """A built-in name or a path to a tableau file."""
    try:
        return library.builtin(ref)
    except KeyError:
        pass
    path = Path(ref)
    if not path.exists():
        _fail(f"{ref!r} is neither a built-in pair ({', '.join(library.available())}) "
              "nor an existing file", EXIT_INPUT)
    try:
        return load(path)
    except (TableauParseError, TableauStructureError, OSError) as exc:
        _fail(str(exc), EXIT_INPUT)


def _parse_params(text: str) -> dict:
    out = {}
    for item in filter(None, (t.strip() for t in text.split(","))):
        if "=" not in item:
            raise click.BadParameter(f"expected key=value, got {item!r}", param_hint="--params")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _fmt(x) -> str:
    if x is None:
        return "n/a"
    if isinstance(x, Fraction):
        return f"{x} ({float(x):.6g})"
    return f"{float(x):.6g}"


def _print_metrics(pair) -> None:
    m = analyze.metrics(pair)
    click.echo(f"T6 = {m.T6:.4e}  T7 = {m.T7:.4e}")
    click.echo(f"max|a| = {_fmt(m.max_abs_a)}  min nonzero b = {_fmt(m.min_nonzero_b)}  "
               f"k6 = {_fmt(m.k6)}")


@click.group()
def main():
    """Construct, verify and benchmark embedded FSAL (4,5) Runge-Kutta pairs."""


@main.command("derive")
@click.option("--family", required=True, type=click.Choice(list(derive.FAMILIES)))
@click.option("--params", "params", required=True, help="comma separated k=v, e.g. c2=1/6,c3=7/32")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--mode", type=click.Choice([RATIONAL, FLOAT]), default=None)
@click.option("--method", type=click.Choice(["auto", "closed-form", "general"]), default="auto")
def derive_cmd(family, params, out, mode, method):
    """Build a pair of FAMILY and write it as a tableau file."""
    values = _parse_params(params)
    try:
        pair = derive.construct_family(family, values, mode=mode, method=method)
    except ValueError as exc:  # includes DegenerateParametersError
        _fail(str(exc), EXIT_INPUT)
    except (derive.NoSolutionError, derive.ConstructionError, ArithmeticError) as exc:
        _fail(f"numerical failure: {exc}", EXIT_NUMERIC)
    path = _out_path(out, f"{family}.tab")
    try:
        save(pair, path)
    except ValueError as exc:
        _fail(str(exc), EXIT_NUMERIC)
    rep = analyze.residuals(pair)
    click.echo(f"wrote {path}")
    click.echo(f"order conditions: {'all satisfied' if rep.ok() else 'VIOLATED'}")
    _print_metrics(pair)
    sys.exit(EXIT_OK if rep.ok() else EXIT_NUMERIC)


@main.command("verify")
@click.option("--pair", "pair_ref", required=True, help="built-in name or tableau file")
@click.option("--order", type=click.IntRange(5, 7), default=5)
def verify_cmd(pair_ref, order):
    """Print order-condition residuals; exit 1 if any condition up to order 5 fails."""
    pair = _load_pair(pair_ref)
    rep = analyze.residuals(pair, order)
    click.echo(f"{pair.name} ({pair.mode}, {pair.s} stages)")
    click.echo(f"{'order':>5}  {'tree':<24} {'b residual':>22} {'d residual':>22}")
    for e in rep.entries:
        rb = str(e.b_residual) if pair.mode == RATIONAL else f"{float(e.b_residual):.3e}"
        rd = "" if e.d_residual is None else (
            str(e.d_residual) if pair.mode == RATIONAL else f"{float(e.d_residual):.3e}")
        click.echo(f"{e.order:>5}  {e.tree.bracket():<24} {rb:>22} {rd:>22}")
    _print_metrics(pair)
    bad = rep.failures()
    if bad:
        click.echo("violated: " + ", ".join(e.tree.bracket() for e in bad))
        sys.exit(EXIT_VERIFY)
    click.echo("all conditions up to order 5 (b) and 4 (d) hold")


@main.command("report")
@click.option("--pairs", default=None, help="comma separated names; default: all built-ins")
@click.option("--csv", "csv_out", type=click.Path(dir_okay=False), default=None)
def report_cmd(pairs, csv_out):
    """Comparison table: T6, T7, max|a|, min nonzero b, k6, DSO."""
    names = pairs.split(",") if pairs else library.available()
    rows = []
    for name in names:
        pair = _load_pair(name.strip())
        m = analyze.metrics(pair)
        d5, d4 = analyze.dso(pair)
        rows.append({"pair": pair.name, "T6": m.T6, "T7": m.T7,
                     "max_abs_a": float(m.max_abs_a), "min_nonzero_b": float(m.min_nonzero_b),
                     "k6": "" if m.k6 is None else (str(m.k6) if isinstance(m.k6, Fraction)
                                                         else f"{m.k6:.6g}"),
                     "dso5": d5, "dso4": d4})
    click.echo(f"{'pair':<14}{'1e4 T6':>10}{'1e3 T7':>10}{'max|a|':>10}{'min b':>10}"
               f"{'k6':>14}{'DSO':>6}")
    for r in rows:
        click.echo(f"{r['pair']:<14}{1e4 * r['T6']:>10.4f}{1e3 * r['T7']:>10.4f}"
                   f"{r['max_abs_a']:>10.4f}{r['min_nonzero_b']:>10.4f}"
                   f"{(r['k6'] or 'n/a'):>14}{r['dso5']:>4},{r['dso4']}")
    if csv_out:
        with open(csv_out, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


@main.command("integrate")
@click.option("--pair", "pair_ref", required=True)
@click.option("--problem", "pid", required=True, type=click.Choice(problems.PROBLEMS,
                                                                    case_sensitive=False))
@click.option("--atol", type=float, default=1e-6)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def integrate_cmd(pair_ref, pid, atol, out):
    """Adaptive run on a benchmark problem; writes the trajectory CSV."""
    pair = _load_pair(pair_ref)
    prob = problems.problem(pid)
    try:
        stats = integrate_adaptive(pair, prob.system, prob.t0, prob.tend, prob.x0,
                                   ControllerConfig(atol=atol))
    except IntegrationError as exc:
        _fail(str(exc), EXIT_NUMERIC)
    except ValueError as exc:
        _fail(str(exc), EXIT_INPUT)
    path = _out_path(out, f"{pair.name}_{prob.id}.csv")
    write_trajectory(stats, path)
    err = problems.measure_error(prob, stats.ts, stats.xs)
    click.echo(f"wrote {path}")
    click.echo(f"n_rhs = {stats.n_rhs}  accepted = {stats.n_accept}  rejected = {stats.n_reject}"
               f"  error = {err:.3e}  backend = {stats.backend}")


@main.command("bench")
@click.option("--pairs", required=True, help="comma separated names or files")
@click.option("--problem", "pid", required=True, type=click.Choice(problems.PROBLEMS,
                                                                    case_sensitive=False))
@click.option("--atol-max", type=float, default=1e-3)
@click.option("--atol-min", type=float, default=1e-11)
@click.option("--n-atol", type=int, default=25)
@click.option("--workers", type=int, default=1)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def bench_cmd(pairs, pid, atol_max, atol_min, n_atol, workers, out):
    """Work-precision CSV plus a plotting script."""
    plist = [_load_pair(p.strip()) for p in pairs.split(",")]
    prob = problems.problem(pid)
    try:
        grid = bench.default_atol_grid(n_atol, atol_max, atol_min)
        recs = bench.work_precision(plist, prob, grid, workers=workers)
    except ValueError as exc:
        _fail(str(exc), EXIT_INPUT)
    path = _out_path(out, f"bench_{prob.id}.csv")
    bench.write_records(recs, path)
    script = bench.write_plot_script(path)
    failed = sum(r.failed for r in recs)
    click.echo(f"wrote {path} ({len(recs)} rows, {failed} failed) and {script}")
    for pid_, atol in bench.monotonicity_flags(recs):
        click.echo(f"note: {pid_} error rose sharply at atol = {atol:.2e}")


@main.command("scan")
@click.option("--c2", default="1/5")
@click.option("--c5", default="4/5")
@click.option("--c3-min", default="-1/2")
@click.option("--c3-max", default="3/2")
@click.option("--n", "n_points", type=int, default=201)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def scan_cmd(c2, c5, c3_min, c3_max, n_points, out):
    """c'3 on the A, B and C curves over a c3 grid (c6 = 1)."""
    try:
        c2v, c5v = derive.parse_value(c2), derive.parse_value(c5)
        lo, hi = derive.parse_value(c3_min), derive.parse_value(c3_max)
    except ValueError as exc:
        _fail(str(exc), EXIT_INPUT)
    if n_points < 2 or hi <= lo:
        _fail("need n >= 2 and c3-max > c3-min", EXIT_INPUT)
    grid = [lo + (hi - lo) * Fraction(k, n_points - 1) for k in range(n_points)]
    rows = bench.family_scan(c2v, c5v, grid)
    path = _out_path(out, "scan.csv")
    bench.write_scan(rows, path)
    script = bench.write_plot_script(path, kind="scan")
    click.echo(f"wrote {path} ({len(rows)} rows) and {script}")


@main.command("stability")
@click.option("--pair", "pair_ref", required=True)
@click.option("--points", type=int, default=2048)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def stability_cmd(pair_ref, points, out):
    """Stability polynomial, real-axis interval and a boundary point file."""
    pair = _load_pair(pair_ref)
    poly = analyze.stability(pair)
    click.echo("R(z) coefficients: " + ", ".join(str(a) if isinstance(a, Fraction)
                                                  else f"{a:.10g}" for a in poly.coefficients))
    click.echo(f"k6 = {_fmt(analyze.k6(pair))}")
    try:
        click.echo(f"real stability interval: [{analyze.real_stability_endpoint(poly):.6f}, 0]")
    except ValueError as exc:
        click.echo(f"real stability interval: {exc}")
    pts = analyze.stability_boundary(poly, points, branch_from_origin=False)
    path = _out_path(out, f"{pair.name}_stability.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["branch", "phi_index", "re", "im"])
        for j in range(pts.shape[1]):
            for k in range(pts.shape[0]):
                w.writerow([j, k, repr(float(pts[k, j].real)), repr(float(pts[k, j].imag))])
    click.echo(f"wrote {path}")


if __name__ == "__main__":  # pragma: no cover
    main()
