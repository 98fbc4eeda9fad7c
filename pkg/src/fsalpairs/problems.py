"""Benchmark initial value problems with reference solutions.

A3, A4 and D5 come from the DETEST collection (Hull, Enright, Fellen,
Sedgwick, SIAM J. Numer. Anal. 9 (1972), pp. 617 and 620); PLEI is the
seven-body Pleiades problem (Hairer, Norsett, Wanner, Solving ODEs I,
2nd ed., p. 245).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Callable

import numpy as np

MAX_ALONG_TRAJECTORY = "max-along-trajectory"
ENDPOINT_ON_MASK = "endpoint-on-mask"

# codes shared with the compiled kernel
NATIVE_CODES = {"A3": 0, "A4": 1, "D5": 2, "PLEI": 3}


class ReferenceUnavailableError(RuntimeError):
    """Two reference runs at different tolerances disagree."""


@dataclass(frozen=True)
class OdeSystem:
    """``x' = rhs(t, x)`` in ``dimension`` unknowns.

    ``native_id`` names a right-hand side the compiled kernel can evaluate
    without calling back into Python.
    """

    dimension: int
    rhs: Callable[[float, np.ndarray], np.ndarray]
    native_id: str | None = None


@dataclass(frozen=True)
class NamedProblem:
    id: str
    system: OdeSystem
    t0: float
    tend: float
    x0: np.ndarray = field(repr=False)
    error_rule: str
    mask: tuple[int, ...]
    reference: str  # "closed-form" or "high-accuracy-run"
    exact: Callable[[float], np.ndarray] | None = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return self.system.dimension


# ---------------------------------------------------------------------------
# A3: y' = y cos t


def _a3_rhs(t, x):
    return x * math.cos(t)


def _a3_exact(t):
    return np.array([math.exp(math.sin(t))])


# ---------------------------------------------------------------------------
# A4: logistic growth y' = y (1 - y/20) / 4


def _a4_rhs(t, x):
    return 0.25 * x * (1.0 - x / 20.0)


def _a4_exact(t):
    return np.array([20.0 / (1.0 + 19.0 * math.exp(-t / 4.0))])


# ---------------------------------------------------------------------------
# D5: Kepler orbit with eccentricity 0.9

D5_ECCENTRICITY = 0.9


def _d5_rhs(t, x):
    r3 = (x[0] * x[0] + x[1] * x[1]) ** 1.5
    return np.array([x[2], x[3], -x[0] / r3, -x[1] / r3])


def _d5_x0(e=D5_ECCENTRICITY):
    return np.array([1.0 - e, 0.0, 0.0, math.sqrt((1.0 + e) / (1.0 - e))])


def kepler_anomaly(t: float, e: float = D5_ECCENTRICITY) -> float:
    """Eccentric anomaly ``E`` with ``E - e sin E = t`` (Newton, started at ``pi``)."""
    m = math.remainder(t, 2 * math.pi)
    ecc = math.pi if m >= 0 else -math.pi
    if abs(m) < 1e-300:
        return t - m
    for _ in range(100):
        step = (ecc - e * math.sin(ecc) - m) / (1.0 - e * math.cos(ecc))
        ecc -= step
        if abs(step) <= 1e-16 * max(1.0, abs(ecc)):
            break
    return ecc + (t - m)


def _d5_exact(t, e=D5_ECCENTRICITY):
    ecc = kepler_anomaly(t, e)
    ce, se = math.cos(ecc), math.sin(ecc)
    root = math.sqrt(1.0 - e * e)
    den = 1.0 - e * ce
    return np.array([ce - e, root * se, -se / den, root * ce / den])


def two_body_energy(x) -> float:
    """Conserved ``|v|^2 / 2 - 1/r`` of the D5 orbit."""
    return 0.5 * (x[2] ** 2 + x[3] ** 2) - 1.0 / math.hypot(x[0], x[1])


# ---------------------------------------------------------------------------
# PLEI: seven stars with masses 1..7 in the plane

PLEI_MASSES = np.arange(1.0, 8.0)
_PLEI_POS = np.array([[3.0, 3.0, -1.0, -3.0, 2.0, -2.0, 2.0],
                      [3.0, -3.0, 2.0, 0.0, 0.0, -4.0, 4.0]])
_PLEI_VEL = np.array([[0.0, 0.0, 0.0, 0.0, 0.0, 1.75, -1.5],
                      [0.0, 0.0, 0.0, -1.25, 1.0, 0.0, 0.0]])


def _plei_rhs(t, x):
    px, py = x[0:7], x[7:14]
    dx = px[None, :] - px[:, None]
    dy = py[None, :] - py[:, None]
    r2 = dx * dx + dy * dy
    np.fill_diagonal(r2, 1.0)
    w = PLEI_MASSES[None, :] / (r2 * np.sqrt(r2))
    np.fill_diagonal(w, 0.0)
    # accumulate over the other bodies in index order, as the compiled
    # kernel does, so both backends agree bit for bit
    ax = np.zeros(7)
    ay = np.zeros(7)
    for j in range(7):
        ax = ax + w[:, j] * dx[:, j]
        ay = ay + w[:, j] * dy[:, j]
    return np.concatenate([x[14:21], x[21:28], ax, ay])


def _plei_x0():
    return np.concatenate([_PLEI_POS[0], _PLEI_POS[1], _PLEI_VEL[0], _PLEI_VEL[1]])


# ---------------------------------------------------------------------------


def _make(pid: str) -> NamedProblem:
    if pid == "A3":
        return NamedProblem("A3", OdeSystem(1, _a3_rhs, "A3"), 0.0, 20.0, np.array([1.0]),
                            MAX_ALONG_TRAJECTORY, (0,), "closed-form", _a3_exact)
    if pid == "A4":
        return NamedProblem("A4", OdeSystem(1, _a4_rhs, "A4"), 0.0, 20.0, np.array([1.0]),
                            MAX_ALONG_TRAJECTORY, (0,), "closed-form", _a4_exact)
    if pid == "D5":
        return NamedProblem("D5", OdeSystem(4, _d5_rhs, "D5"), 0.0, 20.0, _d5_x0(),
                            MAX_ALONG_TRAJECTORY, (0, 1, 2, 3), "closed-form", _d5_exact)
    if pid == "PLEI":
        return NamedProblem("PLEI", OdeSystem(28, _plei_rhs, "PLEI"), 0.0, 3.0, _plei_x0(),
                            ENDPOINT_ON_MASK, tuple(range(14)), "high-accuracy-run")
    raise KeyError(f"unknown problem {pid!r}; available: {', '.join(PROBLEMS)}")


PROBLEMS = ("A3", "A4", "D5", "PLEI")


def problem(pid: str) -> NamedProblem:
    """Look up a benchmark problem by id (case-insensitive)."""
    return _make(pid.upper())


# ---------------------------------------------------------------------------
# reference solutions

PLEI_REFERENCE_ATOL = 1e-13
REFERENCE_AGREEMENT = 1e-10


def generate_reference(prob: NamedProblem, pair_name: str = "dopri",
                       atol: float = PLEI_REFERENCE_ATOL) -> np.ndarray:
    """Endpoint state from two adaptive runs at ``atol`` and ``atol / 2``.

    Raises
    ------
    ReferenceUnavailableError
        If the runs differ by more than ``REFERENCE_AGREEMENT`` in the
        measured components.
    """
    from .integrate import ControllerConfig, integrate_adaptive
    from .library import builtin

    pair = builtin(pair_name).to_float()
    ends = []
    for tol in (atol, atol / 2):
        stats = integrate_adaptive(pair, prob.system, prob.t0, prob.tend, prob.x0,
                                   ControllerConfig(atol=tol), record=False)
        ends.append(stats.x_end)
    gap = float(np.max(np.abs(ends[0][list(prob.mask)] - ends[1][list(prob.mask)])))
    if gap > REFERENCE_AGREEMENT:
        raise ReferenceUnavailableError(
            f"{prob.id}: runs at atol {atol:g} and {atol / 2:g} differ by {gap:.3e}")
    return ends[1]


@lru_cache(maxsize=None)
def _cached_endpoint(pid: str) -> tuple:
    text = resources.files("fsalpairs.data").joinpath("references.json").read_text("utf-8")
    return tuple(json.loads(text)[pid]["x_end"])


def reference_solution(prob: NamedProblem, t: float) -> np.ndarray:
    """Exact state at ``t`` where a closed form exists, else the cached endpoint.

    Raises
    ------
    ValueError
        If ``t`` lies outside ``[t0, tend]``, or a run-based reference is
        requested anywhere but at ``tend``.
    """
    if not prob.t0 <= t <= prob.tend:
        raise ValueError(f"t = {t} outside [{prob.t0}, {prob.tend}]")
    if prob.exact is not None:
        return prob.exact(t)
    if t == prob.t0:
        return prob.x0.copy()
    if t != prob.tend:
        raise ValueError(f"{prob.id} has a reference only at t0 and tend")
    return np.array(_cached_endpoint(prob.id))


def measure_error(prob: NamedProblem, ts, xs) -> float:
    """Achieved error of a recorded trajectory under the problem's rule.

    ``ts`` and ``xs`` are the accepted step endpoints (``xs`` has one row
    per time). Errors are l2 norms over the masked components.
    """
    mask = list(prob.mask)
    if prob.error_rule == ENDPOINT_ON_MASK:
        ref = reference_solution(prob, prob.tend)
        return float(np.linalg.norm(np.asarray(xs[-1])[mask] - ref[mask]))
    worst = 0.0
    for t, x in zip(ts, xs):
        e = float(np.linalg.norm(np.asarray(x)[mask] - prob.exact(t)[mask]))
        worst = max(worst, e)
    return worst
