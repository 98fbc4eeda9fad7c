"""Explicit embedded Runge-Kutta stepping.

One step advances with ``b`` and measures ``E = ||h sum_j d_j F_j||_2``.
The adaptive driver controls absolute error only, with the elementary
rule ``h <- safety * h * (atol / E) ** exponent`` after every attempt.

Runs on the built-in benchmark problems use the compiled kernel when it
is available; set ``FSALPAIRS_PURE_PYTHON=1`` to force the numpy
implementation everywhere.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .problems import NATIVE_CODES, OdeSystem
from .tableau import ButcherPair

try:  # pragma: no cover - depends on the build
    from . import _kernels
except ImportError:  # pragma: no cover
    _kernels = None

PURE_PYTHON_ENV = "FSALPAIRS_PURE_PYTHON"


def compiled_available() -> bool:
    return _kernels is not None and os.environ.get(PURE_PYTHON_ENV, "") in ("", "0")


def backend_name() -> str:
    return "compiled" if compiled_available() else "python"


class IntegrationError(RuntimeError):
    """Adaptive run aborted; ``stats`` holds the partial result."""

    def __init__(self, message, stats):
        super().__init__(message)
        self.stats = stats


class CapabilityError(ValueError):
    """The pair lacks something the operation needs (e.g. an interpolant)."""


@dataclass(frozen=True)
class ControllerConfig:
    """Step-size controller settings.

    ``clamp`` bounds the per-attempt step ratio, e.g. ``(0.2, 5.0)``;
    ``None`` (the default) leaves growth and shrinkage unbounded.
    """

    atol: float
    safety: float = 0.9
    exponent: float = 0.2
    h0: float = 1e-6
    clamp: tuple[float, float] | None = None
    max_attempts: int = 10_000_000

    def __post_init__(self):
        if not self.atol > 0:
            raise ValueError("atol must be positive")
        if not 0 < self.safety < 1:
            raise ValueError("safety must lie in (0, 1)")
        if not self.exponent > 0:
            raise ValueError("exponent must be positive")
        if not self.h0 > 0:
            raise ValueError("h0 must be positive")
        if self.clamp is not None and not 0 < self.clamp[0] <= 1 <= self.clamp[1]:
            raise ValueError("clamp must satisfy 0 < lo <= 1 <= hi")


@dataclass
class IntegrationStats:
    n_rhs: int
    n_accept: int
    n_reject: int
    t_end: float
    x_end: np.ndarray
    ts: np.ndarray | None = field(default=None, repr=False)
    xs: np.ndarray | None = field(default=None, repr=False)
    backend: str = "python"

    @property
    def attempts(self) -> int:
        return self.n_accept + self.n_reject

    @property
    def trajectory(self):
        """Accepted ``(t, x)`` pairs, starting with the initial state."""
        if self.ts is None:
            return []
        return list(zip(self.ts, self.xs))


@dataclass
class StepResult:
    x_next: np.ndarray
    error: float
    f_last: np.ndarray
    stages: np.ndarray  # (s, n) stage derivatives


def _float_arrays(pair: ButcherPair):
    c, A, b, d = pair.to_float().arrays()
    return c, np.ascontiguousarray(A), b, d


def rk_step(pair: ButcherPair, system: OdeSystem, t: float, x, h: float, f1=None) -> StepResult:
    """One step of size ``h`` from ``(t, x)``.

    ``f1`` may carry ``rhs(t, x)`` from the previous step (FSAL reuse).
    For an FSAL pair ``f_last`` is the derivative at the new point.
    """
    if h == 0:
        raise ValueError("step size must be nonzero")
    c, A, b, d = _float_arrays(pair)
    x = np.asarray(x, dtype=float)
    K = np.empty((len(c), x.size))
    K[0] = system.rhs(t, x) if f1 is None else f1
    x_new, err, _ = _attempt(system.rhs, c, A, b, d, pair.is_fsal, t, x, h, K)
    if not np.isfinite(err):
        raise FloatingPointError("non-finite stage derivative")
    return StepResult(x_new, err, K[-1].copy(), K.copy())


def _attempt(rhs, c, A, b, d, fsal, t, x, h, K):
    # same operation order as the compiled kernel
    s = len(c)
    stage = x
    for i in range(1, s):
        acc = np.zeros_like(x)
        for j in range(i):
            if A[i, j] != 0.0:
                acc = acc + A[i, j] * K[j]
        stage = x + h * acc
        K[i] = rhs(t + c[i] * h, stage)
    if fsal:
        x_new = stage
    else:
        acc = np.zeros_like(x)
        for j in range(s):
            if b[j] != 0.0:
                acc = acc + b[j] * K[j]
        x_new = x + h * acc
    acc = np.zeros_like(x)
    for j in range(s):
        if d[j] != 0.0:
            acc = acc + d[j] * K[j]
    # sequential sum of squares; numpy's pairwise sum would reorder it
    sq = 0.0
    for v in (h * acc).tolist():
        sq += v * v
    return x_new, math.sqrt(sq), s - 1


def _adaptive_python(rhs, c, A, b, d, fsal, t0, tend, x0, cfg: ControllerConfig,
                     hmin: float, record: bool):
    s = len(c)
    x = np.array(x0, dtype=float)
    K = np.zeros((s, x.size))
    t, h = t0, cfg.h0
    n_rhs = n_acc = n_rej = 0
    have_f1 = False
    eps = np.finfo(float).eps
    ts, xs = ([t], [x.copy()]) if record else (None, None)
    status = 0
    while t < tend:
        if n_acc + n_rej >= cfg.max_attempts:
            status = 2
            break
        if not have_f1:
            K[0] = rhs(t, x)
            n_rhs += 1
            have_f1 = True
        last = t + h >= tend
        hh = tend - t if last else h
        x_new, err, evals = _attempt(rhs, c, A, b, d, fsal, t, x, hh, K)
        n_rhs += evals
        if not math.isfinite(err):
            status = 3
            break
        eff = err if err > 0.0 else eps * cfg.atol
        fac = cfg.safety * (cfg.atol / eff) ** cfg.exponent
        if cfg.clamp is not None:
            fac = min(max(fac, cfg.clamp[0]), cfg.clamp[1])
        h = hh * fac
        if err <= cfg.atol:
            n_acc += 1
            t = tend if last else t + hh
            x = x_new
            if fsal:
                K[0] = K[s - 1]
            else:
                have_f1 = False
            if record:
                ts.append(t)
                xs.append(x.copy())
        else:
            n_rej += 1
        if t < tend and h < hmin:
            status = 1
            break
    return (status, n_rhs, n_acc, n_rej, t, x,
            None if ts is None else np.array(ts), None if xs is None else np.array(xs))


_STATUS = {1: "step size underflow (problem may be stiff)",
           2: "maximum number of attempts reached",
           3: "non-finite error estimate"}


def integrate_adaptive(pair: ButcherPair, system: OdeSystem, t0: float, tend: float, x0,
                       cfg: ControllerConfig, record: bool = True,
                       backend: str = "auto") -> IntegrationStats:
    """Integrate from ``t0`` to ``tend`` with absolute error control.

    An attempt is accepted iff ``E <= atol``; the step size is updated
    after every attempt, accepted or not. The last step is shortened to
    land on ``tend``. ``E = 0`` counts as ``eps * atol``.

    Parameters
    ----------
    backend : {'auto', 'compiled', 'python'}
        ``auto`` uses the compiled kernel for systems with a native
        right-hand side when it is available.

    Raises
    ------
    IntegrationError
        On step-size underflow below ``1e-15 |tend - t0|``, a non-finite
        error estimate, or exhausting ``cfg.max_attempts``; carries the
        partial statistics.
    """
    if not tend > t0:
        raise ValueError("tend must exceed t0")
    c, A, b, d = _float_arrays(pair)
    fsal = pair.is_fsal
    hmin = 1e-15 * abs(tend - t0)
    x0 = np.asarray(x0, dtype=float)
    native = system.native_id in NATIVE_CODES
    if backend == "compiled" and not (native and _kernels is not None):
        raise CapabilityError("the compiled kernel is unavailable for this system")
    use_kernel = backend == "compiled" or (backend == "auto" and native and compiled_available())
    if use_kernel:
        lo, hi = cfg.clamp if cfg.clamp is not None else (0.0, 0.0)
        raw = _kernels.adaptive(NATIVE_CODES[system.native_id], c, A, b, d, fsal,
                                float(t0), float(tend), np.ascontiguousarray(x0), cfg.atol,
                                cfg.safety, cfg.exponent, cfg.h0, lo, hi, hmin,
                                cfg.max_attempts, record)
        used = "compiled"
    else:
        raw = _adaptive_python(system.rhs, c, A, b, d, fsal, float(t0), float(tend), x0, cfg,
                               hmin, record)
        used = "python"
    status, n_rhs, n_acc, n_rej, t, x, ts, xs = raw
    stats = IntegrationStats(n_rhs, n_acc, n_rej, t, np.asarray(x), ts, xs, used)
    if status:
        raise IntegrationError(f"{_STATUS[status]} at t = {t:.6g}", stats)
    return stats


def integrate_fixed(pair: ButcherPair, system: OdeSystem, t0: float, tend: float, x0,
                    n_steps: int, weights: str = "b") -> np.ndarray:
    """Constant step size run returning the state at ``tend``.

    ``weights='b'`` propagates with the 5th order weights, ``'embedded'``
    with ``b + d``.
    """
    if weights not in ("b", "embedded"):
        raise ValueError("weights must be 'b' or 'embedded'")
    c, A, b, d = _float_arrays(pair)
    w = b if weights == "b" else b + d
    h = (tend - t0) / n_steps
    x = np.array(x0, dtype=float)
    K = np.empty((len(c), x.size))
    for k in range(n_steps):
        t = t0 + k * h
        K[0] = system.rhs(t, x)
        for i in range(1, len(c)):
            K[i] = system.rhs(t + c[i] * h, x + h * (A[i, :i] @ K[:i]))
        x = x + h * (w @ K)
    return x


def dense_eval(pair: ButcherPair, stages, x, h: float, theta):
    """``x + h sum_j beta_j(theta) F_j`` from the stage derivatives of a step.

    Raises
    ------
    CapabilityError
        If the pair has no interpolant.
    """
    if pair.interpolant is None:
        raise CapabilityError(f"pair {pair.name!r} has no interpolant")
    w = np.array([float(v) for v in pair.interpolant.weights(theta)])
    return np.asarray(x, dtype=float) + h * (w @ np.asarray(stages))


def write_trajectory(stats: IntegrationStats, path) -> None:
    """CSV with a ``t, x0, x1, ...`` header and one row per accepted step."""
    if stats.ts is None:
        raise ValueError("run was not recorded")
    n = stats.xs.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{k}" for k in range(n)])
        for t, x in zip(stats.ts, stats.xs):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x])


def fixed_step_errors(pair: ButcherPair, rhs, exact, t0, tend, n_steps: int,
                      precision: int = 128, coefficients=None) -> tuple[float, float]:
    """Largest global error over the step points for weights ``b`` and ``b + d``.

    Both methods share one pass over the grid. Arithmetic uses MPFR
    numbers (gmpy2) with ``precision`` bits, which keeps roundoff far below
    the truncation error of a fifth order method even at small steps.

    Parameters
    ----------
    rhs, exact : callable
        ``rhs(t, x)`` and ``exact(t)`` on lists of ``gmpy2.mpfr``; they must
        use gmpy2 functions to keep the working precision.
    coefficients : tuple, optional
        ``(c, A, b, d)`` overriding the pair's own coefficients, e.g. a
        closed form evaluated at full precision. Floats are taken at their
        exact binary value.
    """
    import gmpy2

    def conv(v):
        if isinstance(v, Fraction):
            return gmpy2.mpfr(gmpy2.mpq(v.numerator, v.denominator))
        return gmpy2.mpfr(v)

    with gmpy2.context(gmpy2.get_context(), precision=precision):
        c, A, b, d = coefficients if coefficients is not None else (pair.c, pair.A, pair.b, pair.d)
        c = [conv(v) for v in c]
        # sparse rows: only the nonzero couplings are ever touched
        rows = [[(j, conv(v)) for j, v in enumerate(row[:i]) if v != 0] for i, row in enumerate(A)]
        weights = [[(j, conv(v)) for j, v in enumerate(b) if v != 0],
                   [(j, conv(u) + conv(v)) for j, (u, v) in enumerate(zip(b, d)) if u + v != 0]]
        start = conv(t0)
        h = (conv(tend) - start) / n_steps
        states = [list(exact(start)), list(exact(start))]
        worst = [gmpy2.mpfr(0), gmpy2.mpfr(0)]
        dim = len(states[0])
        for k in range(n_steps):
            t = start + k * h
            ref = exact(t + h)
            for which, x in enumerate(states):
                K = []
                for i, row in enumerate(rows):
                    stage = [x[m] + h * gmpy2.fsum([a * K[j][m] for j, a in row])
                             for m in range(dim)]
                    K.append(rhs(t + c[i] * h, stage))
                x[:] = [x[m] + h * gmpy2.fsum([w * K[j][m] for j, w in weights[which]])
                        for m in range(dim)]
                worst[which] = max(worst[which], max(abs(u - v) for u, v in zip(x, ref)))
        return float(worst[0]), float(worst[1])
