"""Work-precision runs and the (c3, c'3) family scan.

Everything is emitted as CSV; plotting is left to small generated
matplotlib scripts so the package itself never imports a plotting library.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .derive import DegenerateParametersError, family_cp3, type_C_roots
from .integrate import ControllerConfig, IntegrationError, integrate_adaptive
from .problems import NamedProblem, measure_error
from .tableau import ButcherPair

WP_FIELDS = ("pair_id", "problem_id", "atol", "n_rhs", "n_accept", "n_reject", "error")
SCAN_FIELDS = ("c3", "cp3_A", "cp3_B", "cp3_C_plus", "cp3_C_minus")


def default_atol_grid(n: int = 25, hi: float = 1e-3, lo: float = 1e-11) -> list[float]:
    """``n`` log-spaced tolerances from ``hi`` down to ``lo``."""
    return [float(x) for x in np.logspace(math.log10(hi), math.log10(lo), n)]


@dataclass(frozen=True)
class WorkPrecisionRecord:
    pair_id: str
    problem_id: str
    atol: float
    n_rhs: int
    n_accept: int
    n_reject: int
    error: float  # nan when the run failed

    @property
    def failed(self) -> bool:
        return math.isnan(self.error)


def _run_cell(pair: ButcherPair, prob: NamedProblem, atol: float) -> WorkPrecisionRecord:
    try:
        st = integrate_adaptive(pair, prob.system, prob.t0, prob.tend, prob.x0,
                                ControllerConfig(atol=atol))
        err = measure_error(prob, st.ts, st.xs)
    except IntegrationError as exc:
        st, err = exc.stats, float("nan")
    return WorkPrecisionRecord(pair.name, prob.id, atol, st.n_rhs, st.n_accept,
                               st.n_reject, err)


def work_precision(pairs, prob: NamedProblem, atol_grid=None,
                   workers: int | None = None) -> list[WorkPrecisionRecord]:
    """One record per ``(pair, atol)``, ordered by pair then by the grid.

    Failed integrations become records with ``error = nan``. ``workers``
    runs cells on a thread pool; the output order does not depend on it.
    """
    grid = default_atol_grid() if atol_grid is None else [float(a) for a in atol_grid]
    if not grid or any(a <= 0 for a in grid):
        raise ValueError("atol grid must be non-empty and positive")
    if any(a < b for a, b in zip(grid, grid[1:])):
        raise ValueError("atol grid must be descending")
    pairs = [p.to_float() for p in pairs]
    cells = [(p, a) for p in pairs for a in grid]
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda cell: _run_cell(cell[0], prob, cell[1]), cells))
    return [_run_cell(p, prob, a) for p, a in cells]


def write_records(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(WP_FIELDS)
        for r in records:
            row = list(astuple(r))
            row[2] = repr(r.atol)
            row[6] = "nan" if r.failed else repr(r.error)
            w.writerow(row)


def read_records(path) -> list[WorkPrecisionRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            WorkPrecisionRecord(row["pair_id"], row["problem_id"], float(row["atol"]),
                                int(row["n_rhs"]), int(row["n_accept"]), int(row["n_reject"]),
                                float(row["error"]))
            for row in csv.DictReader(fh)
        ]


def monotonicity_flags(records, factor: float = 10.0) -> list[tuple[str, float]]:
    """``(pair_id, atol)`` where tightening atol raised the error by more than ``factor``."""
    flags = []
    by_pair: dict[str, list] = {}
    for r in records:
        by_pair.setdefault(r.pair_id, []).append(r)
    for pid, rs in by_pair.items():
        rs = sorted((r for r in rs if not r.failed), key=lambda r: -r.atol)
        best = math.inf
        for r in rs:
            if r.error > factor * best:
                flags.append((pid, r.atol))
            best = min(best, r.error)
    return flags


def evals_at_error(records, pair_id: str, error: float) -> float:
    """RHS evaluations needed for ``error``, by log-log interpolation along the curve.

    Returns nan outside the range of achieved errors.
    """
    pts = sorted((r.error, r.n_rhs) for r in records
                 if r.pair_id == pair_id and not r.failed and r.error > 0)
    if not pts:
        return float("nan")
    le = np.log([p[0] for p in pts])
    ln = np.log([p[1] for p in pts])
    # cheapest run reaching at least this accuracy: the curve is close to,
    # but not exactly, monotone
    ln = np.minimum.accumulate(ln)
    x = math.log(error)
    if x < le[0] or x > le[-1]:
        return float("nan")
    return float(np.exp(np.interp(x, le, ln)))


def fit_curve(records, pair_id: str) -> tuple[float, float]:
    """Least-squares line ``log10 n_rhs = intercept + slope * log10 error``."""
    pts = [(r.error, r.n_rhs) for r in records
           if r.pair_id == pair_id and not r.failed and r.error > 0]
    if len(pts) < 2:
        raise ValueError(f"need at least two successful runs of {pair_id!r} to fit")
    slope, intercept = np.polyfit(np.log10([p[0] for p in pts]),
                                  np.log10([p[1] for p in pts]), 1)
    return float(slope), float(intercept)


def matched_ratios(records, pair_a: str, pair_b: str, n_points: int = 20,
                   method: str = "fit", trim: float = 0.0) -> list[tuple]:
    """``(error, evals_a / evals_b)`` over the achieved-error range common to both pairs.

    ``method='fit'`` compares least-squares log-log lines, which smooths
    the step-to-step jitter of the controller; ``'interp'`` interpolates
    the raw curves. ``trim`` drops that fraction of the common log-error
    range at each end.
    """
    errs = {pid: [r.error for r in records if r.pair_id == pid and not r.failed and r.error > 0]
            for pid in (pair_a, pair_b)}
    if not errs[pair_a] or not errs[pair_b]:
        return []
    lo = max(min(errs[pair_a]), min(errs[pair_b]))
    hi = min(max(errs[pair_a]), max(errs[pair_b]))
    if lo >= hi:
        return []
    span = math.log10(hi) - math.log10(lo)
    lo, hi = lo * 10 ** (trim * span), hi / 10 ** (trim * span)
    if method == "fit":
        (ka, ma), (kb, mb) = fit_curve(records, pair_a), fit_curve(records, pair_b)
        evals_a = lambda e: 10 ** (ma + ka * math.log10(e))  # noqa: E731
        evals_b = lambda e: 10 ** (mb + kb * math.log10(e))  # noqa: E731
    elif method == "interp":
        evals_a = lambda e: evals_at_error(records, pair_a, e)  # noqa: E731
        evals_b = lambda e: evals_at_error(records, pair_b, e)  # noqa: E731
    else:
        raise ValueError("method must be 'fit' or 'interp'")
    out = []
    for e in np.logspace(math.log10(lo), math.log10(hi), n_points):
        na, nb = evals_a(e), evals_b(e)
        if not (math.isnan(na) or math.isnan(nb)):
            out.append((float(e), na / nb))
    return out


WP_PLOT_SCRIPT = '''"""Efficiency curves from {csv_name}."""
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{csv_name}"
curves = defaultdict(list)
with open(path, newline="") as fh:
    for row in csv.DictReader(fh):
        if row["error"] != "nan" and float(row["error"]) > 0:
            curves[row["pair_id"]].append((int(row["n_rhs"]), float(row["error"])))
for name, pts in sorted(curves.items()):
    pts.sort()
    plt.loglog([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, label=name)
plt.xlabel("right-hand side evaluations")
plt.ylabel("error")
plt.legend()
plt.grid(True, which="both", alpha=0.3)
plt.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
'''


def write_plot_script(csv_path, kind: str = "work-precision") -> Path:
    """Write ``<csv stem>_plot.py`` next to the CSV and return its path."""
    csv_path = Path(csv_path)
    template = WP_PLOT_SCRIPT if kind == "work-precision" else SCAN_PLOT_SCRIPT
    out = csv_path.with_name(csv_path.stem + "_plot.py")
    out.write_text(template.format(csv_name=csv_path.name), encoding="utf-8")
    return out


# ---------------------------------------------------------------------------
# family scan


@dataclass(frozen=True)
class ScanRow:
    c3: object
    cp3_A: object
    cp3_B: object | None
    cp3_C_plus: object | None
    cp3_C_minus: object | None


def family_scan(c2=Fraction(1, 5), c5=Fraction(4, 5), c3_grid=None) -> list[ScanRow]:
    """``c'3`` on the A, B and C curves for each ``c3``, with ``c6 = 1``.

    Exact for rational inputs except where the type C discriminant is not
    a rational square. Degenerate or complex points are left as None.
    """
    if c3_grid is None:
        c3_grid = [Fraction(k, 100) for k in range(-50, 151)]
    one = c2 ** 0 if isinstance(c2, Fraction) else 1.0
    rows = []
    for c3 in c3_grid:
        a = c3 * c3 / 2
        try:
            b = family_cp3("B", c2, c3)
        except DegenerateParametersError:
            b = None
        try:
            roots = type_C_roots(c2, c3, c5, one)
        except DegenerateParametersError:
            roots = []
        plus = roots[0] if roots else None
        minus = roots[1] if len(roots) > 1 else (roots[0] if roots else None)
        rows.append(ScanRow(c3, a, b, plus, minus))
    return rows


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_scan(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SCAN_FIELDS)
        for r in rows:
            w.writerow([_fmt(v) for v in astuple(r)])


SCAN_PLOT_SCRIPT = '''"""Family curves in the (c3, c'3) plane from {csv_name}."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{csv_name}"
cols = {{k: [] for k in ("c3", "cp3_A", "cp3_B", "cp3_C_plus", "cp3_C_minus")}}
with open(path, newline="") as fh:
    for row in csv.DictReader(fh):
        for k in cols:
            cols[k].append(float(row[k]) if row[k] else float("nan"))
for k, style in (("cp3_A", "-"), ("cp3_B", "--"), ("cp3_C_plus", ":"), ("cp3_C_minus", ":")):
    plt.plot(cols["c3"], cols[k], style, label=k)
plt.xlabel("c3")
plt.ylabel("c'3")
plt.ylim(-0.5, 1.0)
plt.legend()
plt.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
'''
