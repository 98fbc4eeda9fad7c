"""Construction of FSAL (4,5) pairs from the nodes and ``c'3``.

Everything here is field-generic: with :class:`fractions.Fraction` inputs
every quantity is exact, with floats the same code runs in double
precision. Notation follows the usual shorthand for stage vectors::

    c'   = A c      c''  = A c'      c''' = A c''

The general route takes ``(c2, c3, c4, c5, c6, c'3)``, fixes ``c''4`` and
``c'4`` in closed form, solves two linear equations for ``c''5`` and
``c''6``, and then reads off ``b5, b6, a65, c'''5, c'''6``. The remaining
coefficients follow by back-substitution and ``d`` is a null vector of the
order <= 4 conditions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction as F
from typing import Callable, Mapping

import numpy as np

from .tableau import FLOAT, RATIONAL, ButcherPair
from .trees import elementary_weights, enumerate_trees

_FLOAT_ZERO = 1e-300


class DegenerateParametersError(ValueError):
    """A denominator or a required nonzero quantity vanished.

    ``factor`` names the offending expression.
    """

    def __init__(self, factor: str, detail: str = ""):
        self.factor = factor
        msg = f"degenerate parameters: {factor} = 0"
        super().__init__(f"{msg} ({detail})" if detail else msg)


class ConstructionError(ArithmeticError):
    """A postcondition of the construction failed (should not happen for valid input)."""


class NoSolutionError(ArithmeticError):
    """Root finding failed: no sign change in the bracket or no convergence."""


class InconsistentPairError(ValueError):
    """The order <= 4 conditions on ``d`` admit only ``d = 0``."""


class ExtraFreedomWarning(UserWarning):
    """The null space for ``d`` has dimension above one."""


def _is_zero(x, scale=1.0) -> bool:
    if isinstance(x, F):
        return x == 0
    return abs(x) <= max(_FLOAT_ZERO, 1e-13 * abs(scale))


def _div(num, den, factor: str):
    if (den == 0) if isinstance(den, F) else abs(den) <= _FLOAT_ZERO:
        raise DegenerateParametersError(factor)
    return num / den


def _nonzero(x, name: str):
    if (x == 0) if isinstance(x, F) else abs(x) <= _FLOAT_ZERO:
        raise DegenerateParametersError(name)
    return x


def _scalar(x, mode: str):
    if mode == RATIONAL:
        if isinstance(x, float):
            raise TypeError(f"float {x!r} given in rational mode")
        return F(x)
    return float(x)


def parse_value(text, mode: str = RATIONAL):
    """Parse ``'p/q'``, an integer, or (float mode only) a decimal."""
    if not isinstance(text, str):
        return _scalar(text, mode)
    text = text.strip()
    if mode == RATIONAL and any(ch in text.lower() for ch in ".e") and "/" not in text:
        raise ValueError(f"decimal {text!r} rejected in rational mode; write it as p/q")
    try:
        if mode == RATIONAL:
            return F(text)
        return float(F(text)) if "/" in text else float(text)
    except ZeroDivisionError:
        raise ValueError(f"{text!r} has a zero denominator") from None


# ----------------------------------------------------------------------------
# parameters and derived node data


@dataclass(frozen=True)
class GeneralParams:
    """The six free parameters: nodes ``c2..c6`` and ``cp3 = c'3``."""

    c2: object
    c3: object
    c4: object
    c5: object
    c6: object
    cp3: object

    def __post_init__(self):
        _nonzero(self.c2, "c2")
        _nonzero(self.cp3, "c'3 (a32)")

    @property
    def mode(self) -> str:
        return RATIONAL if all(isinstance(getattr(self, f.name), F) for f in fields(self)) \
            else FLOAT

    @property
    def one(self):
        return F(1) if self.mode == RATIONAL else 1.0

    @property
    def nodes(self) -> list:
        z = 0 * self.one
        return [z, self.c2, self.c3, self.c4, self.c5, self.c6, self.one]

    @classmethod
    def make(cls, c2, c3, c4, c5, c6, cp3, mode: str | None = None) -> "GeneralParams":
        vals = (c2, c3, c4, c5, c6, cp3)
        if mode is None:
            mode = FLOAT if any(isinstance(v, float) for v in vals) else RATIONAL
        return cls(*(_scalar(v, mode) for v in vals))

    def to_float(self) -> "GeneralParams":
        return GeneralParams(*(float(getattr(self, f.name)) for f in fields(self)))

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class ExtendedNodes:
    """``c'``, ``c''`` (length 7, stage-indexed from 0) and the scalars fixing rows 5-7."""

    cp: tuple
    cpp: tuple
    cppp5: object
    cppp6: object
    a65: object
    b5: object
    b6: object

    @property
    def k6(self):
        """``b6 a65 c'''5``, the z**6 coefficient of the stability polynomial."""
        return self.b6 * self.a65 * self.cppp5


# ----------------------------------------------------------------------------
# auxiliary quantities

POWER_KINDS = {"c^2": 1, "c^3": 2, "c^4": 3}
CP_KINDS = {"c'c": 1, "c'c^2": 2, "c'c^3": 3}
KINDS = tuple(POWER_KINDS) + tuple(CP_KINDS) + ("c'^2", "c''c")
# c'c^3 enters only at order 6
TWELVE_KINDS = tuple(k for k in KINDS if k != "c'c^3")


class AuxQuantities:
    """The gamma/lambda/mu/eta shorthand over stages ``m = 4..7``.

    Parameters
    ----------
    c, cp, cpp : sequence
        Stage vectors of length 7 (0-based, so ``c[m - 1]`` is ``c_m``).
        Entries not yet known may be any placeholder; quantities are
        computed lazily and only touch the stages they need.
    """

    def __init__(self, c, cp, cpp):
        self.c, self.cp, self.cpp = list(c), list(cp), list(cpp)
        self.c2, self.c3, self.c4 = c[1], c[2], c[3]
        self.cp3 = cp[2]
        self.cpp4 = cpp[3]

    def gamma(self, m: int, kind: str):
        c2, c3, cp3 = self.c2, self.c3, self.cp3
        cm, cpm, cppm = self.c[m - 1], self.cp[m - 1], self.cpp[m - 1]
        if kind in POWER_KINDS:
            n = POWER_KINDS[kind]
            return cp3 * cm * (cm ** n - c2 ** n) - cpm * c3 * (c3 ** n - c2 ** n)
        if kind in CP_KINDS:
            n = CP_KINDS[kind]
            return cpm * (cm ** n - c3 ** n)
        if kind == "c'^2":
            return cpm * (cpm - cp3)
        if kind == "c''c":
            return cppm * (cm - self.c4)
        raise KeyError(kind)

    def lam(self, m: int, kind: str):
        return self.cpp4 * self.gamma(m, kind) - self.cpp[m - 1] * self.gamma(4, kind)

    def mu(self, m: int, kind: str):
        c2, c3, cp3 = self.c2, self.c3, self.cp3
        cppm = self.cpp[m - 1]
        if kind in POWER_KINDS:
            n = POWER_KINDS[kind]
            extra = c3 * (c3 ** n - c2 ** n) + 3 * cp3 * (c2 ** n - F(2, n + 2))
            return self.gamma(m, kind) + 4 * cppm * extra
        if kind in CP_KINDS:
            n = CP_KINDS[kind]
            return self.gamma(m, kind) + 4 * cppm * (c3 ** n - F(3, n + 3))
        if kind == "c'^2":
            return self.gamma(m, kind) + 4 * cppm * (cp3 - F(3, 10))
        if kind == "c''c":
            return cppm * (self.c[m - 1] - F(4, 5))
        raise KeyError(kind)

    def eta(self, kind: str):
        c2, c3, cp3 = self.c2, self.c3, self.cp3
        if kind in POWER_KINDS:
            n = POWER_KINDS[kind]
            return c3 * (c3 ** n - c2 ** n) + 4 * cp3 * (c2 ** n - F(3, 4 * n + 2))
        if kind == "c'c":
            return c3 - F(3, 5)
        if kind == "Ac^2":
            return cp3 * (c2 - F(2, 5))
        raise KeyError(kind)

    @property
    def gamma_Ac2(self):
        return self.cpp4 * self.c3 * (self.c3 - self.c2)

    def table(self) -> dict:
        """All quantities keyed as ``('gamma', m, kind)`` etc."""
        out = {}
        for m in range(4, 8):
            for kind in KINDS:
                out["gamma", m, kind] = self.gamma(m, kind)
                out["lambda", m, kind] = self.lam(m, kind)
                out["mu", m, kind] = self.mu(m, kind)
        for kind in ("c^2", "c^3", "c^4", "c'c", "Ac^2"):
            out["eta", kind] = self.eta(kind)
        out["gamma", "Ac^2"] = self.gamma_Ac2
        return out


def aux_quantities(c, cp, cpp) -> AuxQuantities:
    if not len(c) == len(cp) == len(cpp) == 7:
        raise ValueError("stage vectors must have length 7")
    return AuxQuantities(c, cp, cpp)


# ----------------------------------------------------------------------------
# the matrix of the d-system


def construction_matrix(aux: AuxQuantities, cppp5, cppp6, a65) -> list[list]:
    """Untransformed 5x4 matrix ``M`` annihilated by the rows ``[1/120, 0, b6 a65, 0, 0]``,
    ``[0, 1/24, b5, b6, 0]`` and ``[0, 0, d5, d6, d7]``."""
    g4c2 = aux.gamma(4, "c^2")
    cpp4 = aux.cpp4
    first3 = ("c^2", "c^3", "c'c")
    row1 = [aux.gamma(4, k) + 5 * cpp4 * aux.eta(k) for k in first3]
    row1.append(aux.gamma_Ac2 + 5 * cpp4 * aux.eta("Ac^2"))
    row2 = [aux.mu(4, k) for k in first3] + [cpp4 * aux.eta("c^2")]
    row3 = [aux.lam(5, k) for k in first3] + [cppp5 * g4c2]
    row4 = [aux.lam(6, k) for k in first3] + [cppp6 * g4c2 + a65 * aux.lam(5, "c^2")]
    row5 = [aux.lam(7, k) for k in first3] + [(g4c2 - aux.mu(4, "c^2")) / 24]
    return [row1, row2, row3, row4, row5]


def transform_matrix(M, c2, c3, cpp) -> list[list]:
    """Row/column reduction of ``M``; rows 2 and 5 end up depending on ``c2, c3, c'3`` only."""
    M = [list(r) for r in M]
    cpp4 = cpp[3]
    for r in M:
        r[1] = r[1] - (c2 + c3) * r[0]
    for m in (5, 6, 7):
        i = m - 3
        M[i] = [(x + cpp[m - 1] * y) / cpp4 for x, y in zip(M[i], M[0])]
    M[1] = [(y - x) / cpp4 for x, y in zip(M[1], M[0])]
    M[4] = [(x - 3 * y) / c2 for x, y in zip(M[1], M[4])]
    M[1] = [x + 2 * (1 - 4 * c2) * y for x, y in zip(M[1], M[4])]
    return M


def rank_invariant(Mt) -> object:
    """``m51 m24 - m21 m54`` on the transformed matrix (equals ``c'3**2 c2``)."""
    return Mt[4][0] * Mt[1][3] - Mt[1][0] * Mt[4][3]


def twelve_by_two(aux: AuxQuantities, nodes: ExtendedNodes) -> list[list]:
    """The 12x2 matrix whose rank is 1 exactly when the twelve conditions hold."""
    cppp5, cppp6, a65 = nodes.cppp5, nodes.cppp6, nodes.a65
    rows = [[nodes.b6, F(1, 120)]]
    for k in TWELVE_KINDS:
        rows.append([aux.lam(5, k) + 5 * cppp5 * aux.mu(4, k),
                     cppp6 * aux.lam(5, k) - cppp5 * aux.lam(6, k)])
    cpp4 = aux.cpp4
    for k in ("c^2", "c^3", "c'c"):
        rows.append([aux.gamma(4, k) + 5 * cpp4 * aux.eta(k), -a65 * aux.lam(5, k)])
    rows.append([aux.gamma_Ac2 + 5 * cpp4 * aux.eta("Ac^2"),
                 -a65 * cppp5 * aux.gamma(4, "c^2")])
    return rows


# ----------------------------------------------------------------------------
# the general route


def cp_identity(c2, c3, cp3, cm, cppm):
    """``c'_m`` as a function of ``c_m`` and ``c''_m`` (valid for every stage)."""
    s = c3 ** 2 - 2 * cp3
    num = cp3 * c3 * cm ** 2 * (cm - c2) + 3 * cppm * (c3 - c2) * s
    den = c3 ** 3 * (cm - c2) - c2 * (cm - c3) * s
    return _div(num, den, "c3^3 (c_m - c2) - c2 (c_m - c3)(c3^2 - 2 c'3)")


def fourth_stage(c2, c3, c4, cp3):
    """Closed forms ``(c'4, c''4)``."""
    den = c4 * (2 * cp3 ** 2 * c2 + c3 * (c3 - c2) ** 2 * (c3 ** 2 - 2 * cp3)) \
        - cp3 * c2 * c3 * (2 * cp3 - c3 * (c3 - c2))
    label = "denominator of c''4"
    cp4 = _div(cp3 * c4 ** 2 * (c4 - c2) * (c3 ** 2 * (c3 - c2) + cp3 * (3 * c2 - 2 * c3)),
               den, label)
    cpp4 = _div(cp3 ** 2 * c2 * c4 ** 2 * (c4 - c2) * (c4 - c3), den, label)
    return cp4, cpp4


def _solve_affine(f: Callable, name: str, probes=(0, 1, 2, -1, 3)):
    """Root of a function known to be affine, from two evaluations.

    Probe points where ``f`` itself is undefined are skipped.
    """
    pts = []
    for x in probes:
        try:
            pts.append((x, f(x)))
        except (DegenerateParametersError, ZeroDivisionError):
            continue
        if len(pts) == 2:
            break
    if len(pts) < 2:
        raise DegenerateParametersError(name, "could not evaluate the linear equation")
    (x0, y0), (x1, y1) = pts
    slope = (y1 - y0) / (x1 - x0)
    return x0 - _div(y0, slope, f"coefficient of {name} in its linear equation")


def _weights(c, cp, cpp, b5, b6):
    """``b1..b4`` by back-substitution; returns the full length-7 b with ``b7 = 0``."""
    b4 = _div(F(1, 24) - b5 * cpp[4] - b6 * cpp[5], cpp[3], "c''4")
    b3 = _div(F(1, 6) - b4 * cp[3] - b5 * cp[4] - b6 * cp[5], cp[2], "c'3")
    b2 = _div(F(1, 2) - b3 * c[2] - b4 * c[3] - b5 * c[4] - b6 * c[5], c[1], "c2")
    b1 = 1 - b2 - b3 - b4 - b5 - b6
    return [b1, b2, b3, b4, b5, b6, 0 * b1]


def b56_closed_form(aux: AuxQuantities):
    """``(b5, b6)`` from the closed forms in the gamma/lambda/mu shorthand.

    Their common denominator ``lambda5c2 lambda6c'c - lambda5c'c lambda6c2``
    vanishes identically for 6-stage pairs, so the construction itself
    solves the linear system of :func:`solve_weights` instead.
    """
    m2, m1 = aux.mu(4, "c^2"), aux.mu(4, "c'c")
    l5c2, l5c1 = aux.lam(5, "c^2"), aux.lam(5, "c'c")
    l6c2, l6c1 = aux.lam(6, "c^2"), aux.lam(6, "c'c")
    D = l5c2 * l6c1 - l5c1 * l6c2
    label = "lambda5c2 lambda6c'c - lambda5c'c lambda6c2"
    b5 = -_div(m2 * l6c1 - m1 * l6c2, 24 * D, label)
    b6 = _div(m2 * l5c1 - m1 * l5c2, 24 * D, label)
    return b5, b6


def _solve_linear(M, rhs):
    """Gaussian elimination with partial pivoting; returns ``(x, det)``, ``x`` None if singular."""
    n = len(M)
    R = [list(row) + [v] for row, v in zip(M, rhs)]
    det = R[0][0] ** 0
    for col in range(n):
        piv = max(range(col, n), key=lambda i: abs(R[i][col]))
        if R[piv][col] == 0:
            return None, 0 * det
        if piv != col:
            R[col], R[piv] = R[piv], R[col]
            det = -det
        det = det * R[col][col]
        for i in range(col + 1, n):
            f = R[i][col] / R[col][col]
            if f != 0:
                R[i] = [x - f * y for x, y in zip(R[i], R[col])]
    x = [0 * det] * n
    for i in reversed(range(n)):
        x[i] = (R[i][n] - sum(R[i][j] * x[j] for j in range(i + 1, n))) / R[i][i]
    return x, det


_LINEAR_RHS = (F(1), F(1, 2), F(1, 6), F(1, 24), F(1, 3), F(1, 4), F(1, 5), F(1, 8))


def linear_conditions(c, cp, cpp):
    """Rows of the order conditions that are linear in ``b`` once ``c, c', c''`` are known.

    ``b.[1, c, c', c'', c^2, c^3, c^4, c'c] = [1, 1/2, 1/6, 1/24, 1/3, 1/4, 1/5, 1/8]``
    restricted to stages 1..6 (``b7 = 0``). Returns ``(rows, rhs)``.
    """
    one = c[1] ** 0
    c6, cp6, cpp6 = list(c[:6]), list(cp[:6]), list(cpp[:6])
    rows = [
        [one] * 6, c6, cp6, cpp6,
        [x ** 2 for x in c6], [x ** 3 for x in c6], [x ** 4 for x in c6],
        [x * y for x, y in zip(cp6, c6)],
    ]
    return rows, [r * one for r in _LINEAR_RHS]


def _det(M):
    _, det = _solve_linear(M, [0 * M[0][0]] * len(M))
    return det


def consistency_minors(c, cp, cpp) -> list:
    """The eight 7x7 minors of ``[rows | rhs]``; all vanish iff the system is consistent."""
    rows, rhs = linear_conditions(c, cp, cpp)
    aug = [r + [v] for r, v in zip(rows, rhs)]
    return [_det(aug[:k] + aug[k + 1:]) for k in range(len(aug))]


def solve_weights(c, cp, cpp, tol: float = 1e-10):
    """The unique ``b`` (with ``b7 = 0``) satisfying :func:`linear_conditions`.

    Raises
    ------
    DegenerateParametersError
        If the conditions are inconsistent or leave ``b`` undetermined.
    """
    rows, rhs = linear_conditions(c, cp, cpp)
    one = c[1] ** 0
    if isinstance(one, F):
        aug = [r + [-v] for r, v in zip(rows, rhs)]
        basis = nullspace_exact(aug)
        # solutions are the null vectors scaled to last component 1
        hits = [v for v in basis if v[-1] != 0]
        if len(basis) != 1 or not hits:
            raise DegenerateParametersError(
                "rank of the linear weight conditions",
                "weights inconsistent" if not hits else "weights not unique")
        v = hits[0]
        return [x / v[-1] for x in v[:-1]] + [F(0)]
    a = np.array(rows, dtype=float)
    r = np.array(rhs, dtype=float)
    sol, _, rank, _ = np.linalg.lstsq(a, r, rcond=None)
    if rank < 6:
        raise DegenerateParametersError("rank of the linear weight conditions",
                                        "weights not unique")
    if np.max(np.abs(a @ sol - r)) > tol:
        raise DegenerateParametersError("rank of the linear weight conditions",
                                        "weights inconsistent")
    return [float(x) for x in sol] + [0.0]


def span_minors(Mt, i: int) -> list:
    """3x3 minors of rows 2, 5 and ``i`` (1-based) of the transformed matrix.

    Rows 2 and 5 are independent, so row ``i`` lies in their span exactly
    when all four minors vanish. The column triple (1, 3, 4) gives
    ``-c'3 q_i`` with ``q_i = c'3 c2 m_i3 - c3 m_i4``.
    """
    r2, r5, ri = Mt[1], Mt[4], Mt[i - 1]
    out = []
    for cols in ((0, 2, 3), (1, 2, 3), (0, 1, 3), (0, 1, 2)):
        a = [[r[k] for k in cols] for r in (r2, r5, ri)]
        out.append(a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                   - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                   + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]))
    return out


def _cppp5(aux: AuxQuantities):
    g4 = aux.gamma(4, "c^2")
    m11 = g4 + 5 * aux.cpp4 * aux.eta("c^2")
    m14 = aux.gamma_Ac2 + 5 * aux.cpp4 * aux.eta("Ac^2")
    _nonzero(g4, "gamma4c2")
    return _div(aux.lam(5, "c^2") * m14, g4 * m11, "m11 (gamma4c2 + 5 c''4 eta_c2)"), m11


def extended_nodes(params: GeneralParams, check: bool = True) -> ExtendedNodes:
    """Derive ``c', c'', c'''5, c'''6, a65, b5, b6`` from the six parameters.

    Raises
    ------
    DegenerateParametersError
        When a denominator vanishes or one of ``c''4, c'''5, a65, b6`` is zero.
    ConstructionError
        When a postcondition fails (rank 2 of the d-system matrix, ``b.c^4 = 1/5``).
    """
    p = params
    one = p.one
    zero = 0 * one
    c = p.nodes
    c2, c3, c4, c5, c6, cp3 = p.c2, p.c3, p.c4, p.c5, p.c6, p.cp3
    cp4, cpp4 = fourth_stage(c2, c3, c4, cp3)
    _nonzero(cpp4, "c''4 (a43)")
    cp4_check = cp_identity(c2, c3, cp3, c4, cpp4)
    if check and not _is_zero(cp4 - cp4_check, cp4):
        raise ConstructionError("closed-form c'4 disagrees with the c'_m identity")

    cp = [zero, zero, cp3, cp4, zero, zero, one / 2]
    cpp = [zero, zero, zero, cpp4, zero, zero, one / 6]

    # c''5: row 3 of the transformed matrix must lie in the span of rows 2
    # and 5. Every minor is affine in c''5; generically q3 decides, but it
    # vanishes identically when c3 = 0, so take the steepest minor.
    def minors(x):
        x = x * one
        cp[4], cpp[4] = cp_identity(c2, c3, cp3, c5, x), x
        aux = AuxQuantities(c, cp, cpp)
        cppp5, _ = _cppp5(aux)
        Mt = transform_matrix(construction_matrix(aux, cppp5, zero, zero), c2, c3, cpp)
        return span_minors(Mt, 3)

    m0, m1 = minors(0), minors(1)
    k = max(range(4), key=lambda j: abs(m1[j] - m0[j]))
    cpp5 = _solve_affine(lambda x: minors(x)[k], "c''5")
    cp[4], cpp[4] = cp_identity(c2, c3, cp3, c5, cpp5), cpp5

    # c''6: the eight linear conditions on b1..b6 (b.c^4 = 1/5 among them)
    # must be consistent. Only the sixth column depends on c''6, so each 7x7
    # minor of the augmented system is affine in it; take the steepest.
    def consistency(x):
        x = x * one
        cp[5], cpp[5] = cp_identity(c2, c3, cp3, c6, x), x
        return consistency_minors(c, cp, cpp)

    n0, n1 = consistency(0), consistency(1)
    k = max(range(len(n0)), key=lambda j: abs(n1[j] - n0[j]))
    cpp6 = _solve_affine(lambda x: consistency(x)[k], "c''6")
    cp[5], cpp[5] = cp_identity(c2, c3, cp3, c6, cpp6), cpp6

    aux = AuxQuantities(c, cp, cpp)
    cppp5, m11 = _cppp5(aux)
    _nonzero(cppp5, "c'''5 (a54)")
    b = solve_weights(c, cp, cpp)
    b5, b6 = b[4], b[5]
    _nonzero(b6, "b6")
    a65 = -_div(m11, 120 * b6 * aux.lam(5, "c^2"), "b6 lambda5c2")
    _nonzero(a65, "a65")
    cppp6 = (F(1, 120) - b5 * cppp5) / b6
    nodes = ExtendedNodes(tuple(cp), tuple(cpp), cppp5, cppp6, a65, b5, b6)

    if check:
        Mt = transform_matrix(construction_matrix(aux, cppp5, cppp6, a65), c2, c3, cpp)
        scale = (max(abs(float(x)) for row in Mt for x in row) or 1.0) ** 3
        for i in (1, 3, 4):
            bad = [m for m in span_minors(Mt, i) if not _is_zero(m, 1e3 * scale)]
            if bad:
                raise ConstructionError(f"row {i} of the transformed d-system matrix leaves "
                                        f"the span of rows 2 and 5 (minor {bad[0]})")
        r = sum(bj * cj ** 4 for bj, cj in zip(b, c)) - F(1, 5)
        if not _is_zero(r, 1e3):
            raise ConstructionError(f"b.c^4 - 1/5 = {r} after solving for c''6")
    return nodes


def back_substitute(params: GeneralParams, nodes: ExtendedNodes, name: str = "derived",
                    family: str = "general") -> ButcherPair:
    """Fill ``A`` and ``b`` from the extended node data; ``d`` is left zero."""
    c = params.nodes
    cp, cpp = nodes.cp, nodes.cpp
    c2, c3, c4, c5, c6 = c[1:6]
    cp3, cp4, cp5, cp6 = cp[2:6]
    cpp4, cpp5, cpp6 = cpp[3:6]
    z = 0 * params.one
    A = [[z] * 7 for _ in range(7)]
    A[1][0] = c2
    A[2][1] = _div(cp3, c2, "c2")
    A[2][0] = c3 - A[2][1]
    A[3][2] = _div(cpp4, cp3, "c'3")
    A[3][1] = (cp4 - A[3][2] * c3) / c2
    A[3][0] = c4 - A[3][1] - A[3][2]
    A[4][3] = _div(nodes.cppp5, cpp4, "c''4")
    A[4][2] = (cpp5 - A[4][3] * cp4) / cp3
    A[4][1] = (cp5 - A[4][2] * c3 - A[4][3] * c4) / c2
    A[4][0] = c5 - A[4][1] - A[4][2] - A[4][3]
    A[5][4] = nodes.a65
    A[5][3] = (nodes.cppp6 - nodes.a65 * cpp5) / cpp4
    A[5][2] = (cpp6 - A[5][3] * cp4 - A[5][4] * cp5) / cp3
    A[5][1] = (cp6 - A[5][2] * c3 - A[5][3] * c4 - A[5][4] * c5) / c2
    A[5][0] = c6 - A[5][1] - A[5][2] - A[5][3] - A[5][4]
    b = _weights(c, cp, cpp, nodes.b5, nodes.b6)
    A[6] = list(b)
    return ButcherPair.build(c, A, b, [z] * 7, mode=params.mode, name=name, family=family,
                             params={k: str(v) for k, v in params.as_dict().items()})


# ----------------------------------------------------------------------------
# d as a null vector


def _order4_matrix(pair: ButcherPair) -> list[list]:
    one = F(1) if pair.mode == RATIONAL else 1.0
    trees = [e.tree for e in enumerate_trees(4)]
    return elementary_weights(trees, pair.A, one)


def nullspace_exact(rows: list[list]) -> list[list]:
    """Basis of ``{x : R x = 0}`` over the rationals by Gauss-Jordan elimination."""
    R = [[F(x) for x in row] for row in rows]
    n = len(R[0]) if R else 0
    pivots = []
    r = 0
    for col in range(n):
        piv = next((i for i in range(r, len(R)) if R[i][col] != 0), None)
        if piv is None:
            continue
        R[r], R[piv] = R[piv], R[r]
        inv = 1 / R[r][col]
        R[r] = [x * inv for x in R[r]]
        for i in range(len(R)):
            if i != r and R[i][col] != 0:
                f = R[i][col]
                R[i] = [x - f * y for x, y in zip(R[i], R[r])]
        pivots.append(col)
        r += 1
        if r == len(R):
            break
    free = [j for j in range(n) if j not in pivots]
    basis = []
    for fcol in free:
        v = [F(0)] * n
        v[fcol] = F(1)
        for i, pc in enumerate(pivots):
            v[pc] = -R[i][fcol]
        basis.append(v)
    return basis


def rank_exact(rows: list[list]) -> int:
    n = len(rows[0]) if rows else 0
    return n - len(nullspace_exact(rows))


def rank_of(rows: list[list], rtol: float = 1e-10) -> int:
    """Exact rank for Fraction matrices, SVD rank with a relative cutoff otherwise."""
    if all(isinstance(x, (F, int)) for row in rows for x in row):
        return rank_exact(rows)
    a = np.array([[float(x) for x in row] for row in rows])
    sv = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(sv > rtol * (sv[0] if sv.size and sv[0] > 0 else 1.0)))


def normalize_d(d):
    """Scale so that ``max |d_j| = 1`` and the first nonzero entry is positive."""
    big = max(abs(x) for x in d)
    first = next(x for x in d if not _is_zero(x, big))
    s = big if first > 0 else -big
    return [x / s for x in d]


def d_nullspace(pair: ButcherPair, rtol: float = 1e-10) -> list[list]:
    """Basis of the vectors ``d`` with ``d.Phi(t) = 0`` for the 8 trees of order <= 4."""
    rows = _order4_matrix(pair)
    if pair.mode == RATIONAL:
        return nullspace_exact(rows)
    a = np.array(rows, dtype=float)
    _, sv, vt = np.linalg.svd(a)
    sv = np.r_[sv, np.zeros(a.shape[1] - sv.size)]
    null = [list(vt[k]) for k in range(a.shape[1]) if sv[k] <= rtol * max(sv[0], 1.0)]
    return null


def solve_d(pair: ButcherPair, rtol: float = 1e-10) -> list:
    """Normalized null vector of the order <= 4 conditions on ``d``.

    Raises
    ------
    InconsistentPairError
        If only ``d = 0`` satisfies them.
    """
    basis = d_nullspace(pair, rtol)
    if not basis:
        raise InconsistentPairError(f"pair {pair.name!r}: the conditions on d force d = 0")
    if len(basis) > 1:
        warnings.warn(f"d null space of {pair.name!r} has dimension {len(basis)}; "
                      "returning the first basis vector", ExtraFreedomWarning, stacklevel=2)
    return normalize_d(basis[0])


def derive(params: GeneralParams, name: str = "derived", family: str = "general") -> ButcherPair:
    """General route: parameters to a complete pair with normalized ``d``."""
    nodes = extended_nodes(params)
    pair = back_substitute(params, nodes, name=name, family=family)
    return pair.with_d(solve_d(pair))


def params_of(pair: ButcherPair) -> GeneralParams:
    """Recover ``(c2, .., c6, c'3)`` from a 7-stage pair."""
    if pair.s != 7:
        raise ValueError(f"pair {pair.name!r} has {pair.s} stages, expected 7")
    c = pair.c
    cp3 = sum(a * x for a, x in zip(pair.A[2], c))
    return GeneralParams.make(c[1], c[2], c[3], c[4], c[5], cp3, mode=pair.mode)


# ----------------------------------------------------------------------------
# family relations


def c4_six_stage(c2, c3, cp3):
    """The node ``c4`` that makes the pair effectively 6-stage (``d7 = 0``)."""
    t = 2 * cp3 - c3 * (c3 - c2)
    num = cp3 * c2 * t
    den = (2 * cp3 * (1 - 2 * c2) - c3 * (c3 - c2)) ** 2 + 4 * cp3 ** 2 * c2 ** 2
    return _div(num, den, "(2c'3(1-2c2) - c3(c3-c2))^2 + 4c'3^2 c2^2")


def k6_closed_form(c2, c3, c4, cp3):
    """``b6 a65 c'''5 = (c4/120) (1 - 5 c'3 c2 / (2c'3 - c3(c3 - c2)))``."""
    t = _div(5 * cp3 * c2, 2 * cp3 - c3 * (c3 - c2), "2c'3 - c3(c3-c2)")
    return c4 / 120 * (1 - t)


def family_cp3(family: str, c2, c3):
    """``c'3`` on the type A or type B branch."""
    if family.upper() == "A":
        return c3 ** 2 / 2
    if family.upper() == "B":
        return _div(3 * (c3 - c2) * (c2 + c3 - 4 * c2 * c3),
                    2 * (3 - 12 * c2 + 10 * c2 ** 2), "3 - 12c2 + 10c2^2")
    raise ValueError(f"family must be A or B, got {family!r}")


def _Z(c5, c6):
    return lambda a0, a1, a2: a0 - a1 * (c5 + c6) + a2 * c5 * c6


def type_C_coefficients(c2, c3, c5, c6):
    """``(k0, k1, k2)`` with ``k0 + k1 c'3 + k2 c'3**2 = 0`` on the type C branch."""
    Z = _Z(c5, c6)
    z12 = Z(12, 15, 20)
    z33 = Z(33, 40, 50)
    k0 = (3 * z12 - 3 * (c2 + c3) * z33 + 2 * c2 * c3 * Z(138, 165, 200)) \
        * c3 ** 2 * (c3 - c2) ** 2
    k1 = -((12 + 50 * c2 ** 2) * (z12 - c3 * z33) - 3 * c2 * Z(207, 260, 350)
           + 2 * c2 * c3 * Z(852, 1035, 1300)) * c3 * (c3 - c2)
    k2 = ((2 + 10 * c2 * c3) * z12 - 15 * c2 * Z(3, 4, 6) - 2 * c3 * z33) \
        * 2 * (3 - 12 * c2 + 10 * c2 ** 2)
    return k0, k1, k2


def _exact_sqrt(x: F):
    if x < 0:
        return None
    n, d = x.numerator, x.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return F(rn, rd)
    return None


def type_C_roots(c2, c3, c5, c6) -> list:
    """Real roots ``c'3`` of the type C quadratic, larger first; ``[]`` if complex.

    Roots are exact when the discriminant is a rational square, floats otherwise.
    """
    k0, k1, k2 = type_C_coefficients(c2, c3, c5, c6)
    if _is_zero(k2, 1.0):
        if _is_zero(k1, 1.0):
            raise DegenerateParametersError("all type C coefficients",
                                            "the c'3 equation is identically satisfied or void")
        return [-k0 / k1]
    disc = k1 * k1 - 4 * k0 * k2
    if disc < 0:
        return []
    root = _exact_sqrt(disc) if isinstance(disc, F) else None
    if root is None:
        root = math.sqrt(float(disc))
        k1, k2 = float(k1), float(k2)
    # stable quadratic formula
    sign = 1 if k1 >= 0 else -1  # an int, so exact roots stay Fractions
    q = -(k1 + sign * root) / 2 if k1 != 0 else root / 2
    r1 = q / k2
    r2 = k0 / q if q != 0 else -r1
    return sorted({r1, r2}, reverse=True)


# ----------------------------------------------------------------------------
# closed forms per family


def _d_back(c, cp, cpp, d5, d6, d7):
    """``d1..d4`` from ``d5, d6, d7`` by the order <= 4 conditions."""
    d4 = (-d5 * cpp[4] - d6 * cpp[5] - d7 / 6) / cpp[3]
    d3 = (-d4 * cp[3] - d5 * cp[4] - d6 * cp[5] - d7 / 2) / cp[2]
    d2 = (-d3 * c[2] - d4 * c[3] - d5 * c[4] - d6 * c[5] - d7) / c[1]
    d1 = -(d2 + d3 + d4 + d5 + d6 + d7)
    return [d1, d2, d3, d4, d5, d6, d7]


@dataclass(frozen=True)
class ClosedFormResult:
    params: GeneralParams
    nodes: ExtendedNodes
    d: list  # unnormalized, from the explicit d5, d6, d7 formulas
    extra: dict = field(default_factory=dict)


def _complete(params, cp, cpp, cppp5, cppp6, k6, b6cppp6):
    b6 = _div(b6cppp6, _nonzero(cppp6, "c'''6"), "c'''6")
    _nonzero(b6, "b6")
    a65 = _div(k6, b6 * _nonzero(cppp5, "c'''5 (a54)"), "b6 c'''5")
    b5 = (F(1, 120) - b6cppp6) / cppp5
    return ExtendedNodes(tuple(cp), tuple(cpp), cppp5, cppp6, a65, b5, b6)


def closed_form_A(c2, c3, c5, c6) -> ClosedFormResult:
    one = c3 ** 0
    s = 3 - 12 * c3 + 10 * c3 ** 2
    w = 1 - 4 * c3 + 5 * c3 ** 2
    c4 = c3 / (2 * w)
    params = GeneralParams(c2, c3, c4, c5, c6, c3 ** 2 / 2)
    c = params.nodes
    cp = [0 * one, 0 * one] + [x ** 2 / 2 for x in c[2:6]] + [one / 2]
    cpp = [0 * one] * 3 + [
        _div(x * (x - c3) * (c3 + x - 4 * c3 * x), 2 * s, "3 - 12c3 + 10c3^2")
        for x in c[3:6]] + [one / 6]
    cppp5 = c3 * c5 * (c5 - c3) * (c5 - c4) / (4 * s)
    g = 8 * c3 - 15 * c3 ** 2 - 4 * c5 * w + 2 * c6 * (2 - 13 * c3 + 20 * c3 ** 2)
    cppp6 = _div(g * c6 * (c6 - c3) * (c6 - c4),
                 4 * s * (8 - 15 * c3 - 10 * c5 + 20 * c3 * c5), "8 - 15c3 - 10c5 + 20c3c5")
    k6 = c4 * (2 - 5 * c3) / 240
    b6cppp6 = _div(g, 480 * (c6 - c5) * w, "c6 - c5")
    nodes = _complete(params, cp, cpp, cppp5, cppp6, k6, b6cppp6)
    d5 = c6 * (c6 - c3) * (c6 - c4)
    d6 = -c5 * (c5 - c3) * (c5 - c4)
    d = _d_back(c, cp, cpp, d5, d6, 0 * one)
    return ClosedFormResult(params, nodes, d, {"g": g})


def closed_form_B(c2, c3, c5, c6) -> ClosedFormResult:
    one = c3 ** 0
    s2 = 3 - 12 * c2 + 10 * c2 ** 2
    s3 = 3 - 12 * c3 + 10 * c3 ** 2
    u = c2 + c3 - 4 * c2 * c3
    g = s2 * s3 + 15 * u ** 2
    c4 = _div(3 * (3 - 10 * c2 * c3) * u, 2 * g, "g")
    cp3 = _div(3 * (c3 - c2) * u, 2 * s2, "3 - 12c2 + 10c2^2")
    params = GeneralParams(c2, c3, c4, c5, c6, cp3)
    c = params.nodes
    cp = [0 * one, 0 * one] + [3 * (x - c2) * (c2 + x - 4 * c2 * x) / (2 * s2)
                               for x in c[2:6]] + [one / 2]

    def h(x):
        return 3 * (c2 + c3 + x) - 12 * (c2 * c3 + c2 * x + c3 * x) + 38 * c2 * c3 * x

    cpp = [0 * one] * 3 + [
        _div((x - c2) * (x - c3) * h(x), 2 * s2 * s3, "3 - 12c3 + 10c3^2") for x in c[3:6]
    ] + [one / 6]
    cppp5 = 3 * (c5 - c2) * (c5 - c3) * (c5 - c4) * u / (4 * s2 * s3)
    p = 24 - 45 * c2 - 45 * c3 + 100 * c2 * c3 - 10 * (3 - 6 * c2 - 6 * c3 + 14 * c2 * c3) * c5
    q = (3 * u * (24 - 45 * c2 - 45 * c3 + 100 * c2 * c3)
         - (4 * s2 * s3 + 60 * u ** 2) * c5
         + (4 * s2 * s3 - 30 * u * (3 - 8 * c2 - 8 * c3 + 22 * c2 * c3)) * c6)
    cppp6 = _div((c6 - c2) * (c6 - c3) * (c6 - c4) * q, 4 * s2 * s3 * p, "p")
    k6 = u * (6 - 15 * c2 - 15 * c3 + 40 * c2 * c3) / (160 * g)
    b6cppp6 = _div(q, 480 * (c6 - c5) * g, "c6 - c5")
    nodes = _complete(params, cp, cpp, cppp5, cppp6, k6, b6cppp6)
    d5 = (c6 - c2) * (c6 - c3) * (c6 - c4)
    d6 = -(c5 - c2) * (c5 - c3) * (c5 - c4)
    d = _d_back(c, cp, cpp, d5, d6, 0 * one)
    return ClosedFormResult(params, nodes, d, {"g": g, "p": p, "q": q})


# coefficients of the c3 = 0 polynomial g, keyed by the exponents of (5 c2, c4, c5)
ALPHA = {
    (e2, e4, e5): v
    for e5, row in enumerate([
        [144, 180, 180, 228, 72, 93, 9, 12],
        [360, 940, 512, 940, 222, 366, 30, 48],
        [200, 1100, 340, 960, 162, 360, 24, 48],
    ])
    for (e2, e4), v in zip([(e2, e4) for e2 in range(4) for e4 in range(2)], row)
}


def _pq_c3_zero(c2, c4, c5):
    p = 3 - 5 * c2 - 5 * c4 + 10 * c2 * c4
    q = (12 - 15 * c2 - 15 * c4 - 15 * c5 + 20 * c2 * c4 + 20 * c2 * c5 + 20 * c4 * c5
         - 30 * c2 * c4 * c5)
    return p, q


def _cppp56_c3_zero(c2, c4, c5, p, q):
    cppp5 = _div(c4 * c5 * (c5 - c2) * (c5 - c4) * (2 - 5 * c2), 4 * p, "p")
    cppp6 = _div((1 - c2) * (1 - c4) * (2 - 2 * c4 - 2 * c5 + 5 * c2 * c4), 4 * q, "q")
    k6 = c4 * (2 - 5 * c2) / 240
    b6cppp6 = _div(2 - 2 * c4 - 2 * c5 + 5 * c2 * c4, 240 * (1 - c5), "1 - c5")
    return cppp5, cppp6, k6, b6cppp6


def closed_form_bprime_c3_zero(c2, c4, c5) -> ClosedFormResult:
    one = c2 ** 0
    zero = 0 * one
    p, q = _pq_c3_zero(c2, c4, c5)
    _nonzero(p, "p")
    _nonzero(q, "q")
    g = 5 * (c2 ** 2 + 4 * c4 ** 2) * c5 * (3 - 5 * c5) - c2 * c4 * sum(
        (-1) ** (e2 + e4 + e5) * a * (5 * c2) ** e2 * c4 ** e4 * c5 ** e5
        for (e2, e4, e5), a in ALPHA.items())
    cp3 = _div(3 * g, 2 * (6 - 15 * c2 - 10 * c5 + 30 * c2 * c5) * p * q,
               "6 - 15c2 - 10c5 + 30c2c5")
    params = GeneralParams(c2, zero, c4, c5, one, cp3)
    c = params.nodes
    cp4 = 3 * c4 * (c4 - c2) / 2
    cp5 = 3 * (c5 - c2) * (c5 + c4 * (2 - 5 * c2 - 5 * c5 + 10 * c2 * c5)) / (2 * p)
    cp6 = 3 * (1 - c2) * (4 - 7 * c4 - 5 * c5 + 5 * c2 * c4 + 10 * (1 - c2) * c4 * c5) / (2 * q)
    cp = [zero, zero, cp3, cp4, cp5, cp6, one / 2]
    cpp = [zero, zero, zero, cp4 * c4 / 3, cp5 * c5 / 3, cp6 / 3, one / 6]
    nodes = _complete(params, cp, cpp, *_cppp56_c3_zero(c2, c4, c5, p, q))
    d5 = p * (c2 * c4 + (c2 - 2 * c4) * (3 - 5 * c5) + 15 * c2 * (1 - c2) * c4 * (1 - 2 * c5))
    d6 = _div(q * c5 * (c5 - c2) * (c5 - c4) * (4 * c4 - 2 * c2 - 14 * c2 * c4
                                                 + 15 * c2 ** 2 * c4),
              (1 - c2) * (1 - c4), "(1 - c2)(1 - c4)")
    d7 = 15 * c5 * (c5 - c2) * (c5 - c4) * (1 - c5) * (c2 - 2 * c4 + 8 * c2 * c4
                                                       - 10 * c2 ** 2 * c4)
    d = _d_back(c, cp, cpp, d5, d6, d7)
    return ClosedFormResult(params, nodes, d, {"g": g, "p": p, "q": q})


# the reference c3 = c2 pair uses c'3 = 1/5; c'3 only enters column 3 of A and d2, d3
BPRIME_C3_C2_DEFAULT_CP3 = F(1, 5)


def bprime_c3_c2_c4(c5):
    return _div(3 - 5 * c5, 5 * (1 - 2 * c5), "1 - 2c5")


def closed_form_bprime_c3_c2(c2, c5, cp3=None) -> ClosedFormResult:
    one = c2 ** 0
    zero = 0 * one
    cp3 = BPRIME_C3_C2_DEFAULT_CP3 * one if cp3 is None else cp3
    c4 = bprime_c3_c2_c4(c5)
    p, q = _pq_c3_zero(c2, c4, c5)
    _nonzero(p, "p")
    _nonzero(q, "q")
    params = GeneralParams(c2, c2, c4, c5, one, cp3)
    c = params.nodes
    cp = [zero, zero, cp3] + [x ** 2 / 2 for x in (c4, c5)] + [one / 2, one / 2]
    cpp = [zero, zero, zero, c4 ** 2 * (c4 - c2) / 2,
           c5 * (c5 - c2) * (c5 + c4 * (2 - 5 * c2 - 5 * c5 + 10 * c2 * c5)) / (2 * p),
           (1 - c2) * (4 - 7 * c4 - 5 * c5 + 5 * c2 * c4 + 10 * (1 - c2) * c4 * c5) / (2 * q),
           one / 6]
    nodes = _complete(params, cp, cpp, *_cppp56_c3_zero(c2, c4, c5, p, q))
    w = 3 - 10 * c5 + 10 * c5 ** 2
    explicit_b = {
        "b1": (1 - 8 * c5 + 10 * c5 ** 2) / (12 * c5 * (5 * c5 - 3)),
        "b4": 125 * (2 * c5 - 1) ** 4 / (12 * (5 * c5 - 2) * (5 * c5 - 3) * w),
        "b5": 1 / (12 * c5 * (1 - c5) * w),
        "b6": -(3 - 12 * c5 + 10 * c5 ** 2) / (12 * (1 - c5) * (5 * c5 - 2)),
    }
    d5 = -(1 - c2) * (5 * c5 - 3) * (6 - 15 * c2 - 10 * c5 + 30 * c2 * c5) / (3 * c5 * w)
    d6 = (12 - 52 * c2 + 45 * c2 ** 2 - 5 * c5 * (4 - 18 * c2 + 15 * c2 ** 2)) \
        * (3 - 12 * c5 + 10 * c5 ** 2) / (3 * (5 * c5 - 2))
    d7 = (1 - c5) * (6 - 29 * c2 + 30 * c2 ** 2 - 10 * c5 * (1 - 5 * c2 + 5 * c2 ** 2))
    d = _d_back(c, cp, cpp, d5, d6, d7)
    return ClosedFormResult(params, nodes, d, {"p": p, "q": q, **explicit_b})


# ----------------------------------------------------------------------------
# the B' branch by root finding


def _bprime_params(fixed: Mapping, solve_for: str, x, mode):
    vals = dict(fixed)
    vals[solve_for] = x
    vals.setdefault("c6", 1)
    return GeneralParams.make(vals["c2"], vals["c3"], vals["c4"], vals["c5"], vals["c6"],
                              vals["cp3"], mode=mode)


def cpcp_residual(params: GeneralParams):
    """``b.(c' * c') - 1/20`` for the general-route pair at ``params``."""
    nodes = extended_nodes(params, check=False)
    b = _weights(params.nodes, nodes.cp, nodes.cpp, nodes.b5, nodes.b6)
    return sum(bj * x * x for bj, x in zip(b, nodes.cp)) - F(1, 20)


@dataclass(frozen=True)
class RootResult:
    value: F  # dyadic rational, exact bisection midpoint
    residual: float
    iterations: int


def solve_bprime(fixed: Mapping, solve_for: str, bracket, tol: float = 1e-14,
                 max_iter: int = 200) -> RootResult:
    """Find the free parameter on the ``c6 = 1`` branch where ``b.(c'*c') = 1/20``.

    Bisection on exactly evaluated residuals (so the sign is never wrong),
    then a secant polish. ``fixed`` maps four of ``c2, c3, c4, c5, cp3`` to
    values; ``solve_for`` names the fifth.

    Raises
    ------
    NoSolutionError
        If the residual has no sign change on the bracket or does not drop
        below ``tol`` (e.g. the bracket straddles a pole).
    """
    names = {"c2", "c3", "c4", "c5", "cp3"}
    if solve_for not in names or set(fixed) | {solve_for} != names:
        raise ValueError(f"fix four of {sorted(names)} and solve for the fifth")
    fixed = {k: F(v) if not isinstance(v, str) else parse_value(v) for k, v in fixed.items()}

    def res(x):
        return cpcp_residual(_bprime_params(fixed, solve_for, F(x), RATIONAL))

    lo, hi = F(bracket[0]), F(bracket[1])
    flo, fhi = res(lo), res(hi)
    if flo == 0:
        return RootResult(lo, 0.0, 0)
    if fhi == 0:
        return RootResult(hi, 0.0, 0)
    if (flo > 0) == (fhi > 0):
        raise NoSolutionError(f"no sign change of b.(c'*c') - 1/20 on [{float(lo)}, {float(hi)}]")
    it = 0
    # bisection to ~1e-11, dyadic midpoints keep the rationals small
    while hi - lo > F(1, 10 ** 11) and it < max_iter:
        mid = (lo + hi) / 2
        fm = res(mid)
        it += 1
        if fm == 0:
            lo = hi = mid
            break
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    # secant polish in exact arithmetic on a limited denominator
    x0, x1, f0, f1 = lo, hi, flo, fhi
    for _ in range(8):
        if f1 == f0 or abs(float(f1)) < tol * 1e-3:
            break
        x2 = (x1 - f1 * (x1 - x0) / (f1 - f0)).limit_denominator(2 ** 80)
        x0, f0, x1, f1 = x1, f1, x2, res(x2)
        it += 1
    best = min(((x1, f1), (lo, flo), (hi, fhi)), key=lambda t: abs(t[1]))
    if abs(float(best[1])) > tol:
        raise NoSolutionError(f"residual {float(best[1]):.3e} above tolerance; "
                              "the bracket may contain a pole")
    return RootResult(best[0], float(best[1]), it)


# ----------------------------------------------------------------------------
# families

FAMILIES = {
    "A": ("c2", "c3", "c5", "c6"),
    "B": ("c2", "c3", "c5", "c6"),
    "C": ("c2", "c3", "c5", "c6"),
    "Aprime": ("c2", "c3", "c4", "c5"),
    "Bprime-c3-0": ("c2", "c4", "c5"),
    "Bprime-c3-c2": ("c2", "c5"),
    "Bprime": ("c2", "c3", "c4", "cp3", "c5"),
}
OPTIONAL = {"C": ("root",), "Bprime-c3-c2": ("cp3",), "Bprime": ("solve_for", "lo", "hi")}


def _from_closed_form(res: ClosedFormResult, name, family, check_d=True) -> ButcherPair:
    pair = back_substitute(res.params, res.nodes, name=name, family=family)
    d = solve_d(pair)
    if check_d and not _parallel(d, res.d):
        raise ConstructionError(f"{family}: closed-form d is not parallel to the null vector")
    return pair.with_d(d)


def _parallel(u, v) -> bool:
    k = next(i for i, x in enumerate(u) if not _is_zero(x, 1.0))
    if _is_zero(v[k], 1.0):
        return False
    r = v[k] / u[k]
    scale = max(abs(float(x)) for x in v) or 1.0
    return all(_is_zero(y - r * x, scale) for x, y in zip(u, v))


def construct_family(family: str, params: Mapping, mode: str | None = None,
                     method: str = "auto", name: str | None = None) -> ButcherPair:
    """Build a pair of the given family.

    Parameters
    ----------
    family : str
        One of ``A, B, C, Aprime, Bprime, Bprime-c3-0, Bprime-c3-c2``.
    params : mapping
        Family parameters (see :data:`FAMILIES`), values as Fractions,
        ints, floats or ``'p/q'`` strings. ``C`` accepts ``root`` (0 for
        the larger root, 1 for the smaller); ``Bprime-c3-c2`` accepts an
        optional ``cp3``; ``Bprime`` fixes four of ``c2, c3, c4, cp3, c5``
        and takes ``solve_for`` with a bracket ``lo, hi``.
    method : {'auto', 'closed-form', 'general'}
        ``auto`` uses closed forms where they exist.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
    if mode is None:
        mode = FLOAT if any(isinstance(v, float) or (isinstance(v, str) and "." in v)
                            for k, v in params.items() if k != "solve_for") else RATIONAL
    opt = OPTIONAL.get(family, ())
    if family == "Bprime":
        return _construct_bprime(params, mode, name)
    required = FAMILIES[family]
    missing = [k for k in required if k not in params]
    unknown = [k for k in params if k not in required and k not in opt]
    if missing or unknown:
        raise ValueError(f"family {family} takes {', '.join(required + opt)}; "
                         f"missing {missing}, unexpected {unknown}")
    v = {k: parse_value(params[k], mode) for k in required}
    label = name or f"{family}(" + ",".join(f"{k}={params[k]}" for k in required) + ")"
    use_closed_form = method in ("auto", "closed-form")
    if method not in ("auto", "closed-form", "general"):
        raise ValueError(f"method must be auto, closed-form or general, got {method!r}")

    if family in ("A", "B"):
        if use_closed_form:
            fn = closed_form_A if family == "A" else closed_form_B
            return _from_closed_form(fn(v["c2"], v["c3"], v["c5"], v["c6"]), label, family)
        cp3 = family_cp3(family, v["c2"], v["c3"])
        c4 = c4_six_stage(v["c2"], v["c3"], _nonzero(cp3, "c'3 (a32)"))
        gp = GeneralParams.make(v["c2"], v["c3"], c4, v["c5"], v["c6"], cp3, mode)
        return derive(gp, label, family)
    if family == "C":
        roots = type_C_roots(v["c2"], v["c3"], v["c5"], v["c6"])
        idx = int(params.get("root", 0))
        if not roots:
            raise NoSolutionError("type C quadratic in c'3 has complex roots")
        cp3 = roots[min(idx, len(roots) - 1)]
        m = FLOAT if isinstance(cp3, float) else mode
        c4 = c4_six_stage(v["c2"], v["c3"], _nonzero(cp3, "c'3 (a32)"))
        gp = GeneralParams.make(v["c2"], v["c3"], c4, v["c5"], v["c6"], cp3, m)
        return derive(gp, label, family)
    if family == "Aprime":
        one = v["c2"] ** 0
        gp = GeneralParams.make(v["c2"], v["c3"], v["c4"], v["c5"], one, v["c3"] ** 2 / 2, mode)
        return derive(gp, label, family)
    if family == "Bprime-c3-0":
        if use_closed_form:
            return _from_closed_form(closed_form_bprime_c3_zero(v["c2"], v["c4"], v["c5"]),
                                  label, family)
        res = closed_form_bprime_c3_zero(v["c2"], v["c4"], v["c5"])
        return derive(res.params, label, family)
    # Bprime-c3-c2
    cp3 = parse_value(params["cp3"], mode) if "cp3" in params else None
    res = closed_form_bprime_c3_c2(v["c2"], v["c5"], cp3)
    if use_closed_form:
        return _from_closed_form(res, label, family)
    return derive(res.params, label, family)


def _construct_bprime(params: Mapping, mode, name) -> ButcherPair:
    params = dict(params)
    solve_for = params.pop("solve_for", "c5")
    lo, hi = params.pop("lo", None), params.pop("hi", None)
    if lo is None or hi is None:
        raise ValueError("family Bprime needs a bracket lo, hi for the solved parameter")
    fixed = {k: parse_value(params[k], RATIONAL) for k in params}
    # the bracket is only a search interval, so decimals are fine here
    root = solve_bprime(fixed, solve_for, (F(str(lo)), F(str(hi))))
    vals = dict(fixed, **{solve_for: root.value})
    # built exactly at the dyadic root, then rounded: the only inexact step is the root
    gp = GeneralParams.make(vals["c2"], vals["c3"], vals["c4"], vals["c5"], 1, vals["cp3"],
                            RATIONAL)
    label = name or "Bprime(" + ",".join(f"{k}={params[k]}" for k in params) \
        + f",{solve_for}={float(root.value):.15g})"
    exact = derive(gp, label, "Bprime")
    pair = exact.to_float()
    return replace(pair, meta=dict(pair.meta, root=float(root.value),
                                   root_residual=root.residual))
