"""Quality metrics for embedded pairs.

Order residuals, the T6/T7 local error norms, the stability polynomial and
its boundary, dominant stage order, and interpolant checks.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .tableau import FLOAT_ATOL, RATIONAL, ButcherPair
from .trees import RootedTree, elementary_weights, enumerate_trees


def _one(pair):
    return Fraction(1) if pair.mode == RATIONAL else 1.0


def _dot(u, v):
    return sum((x * y for x, y in zip(u, v)), start=0 * v[0])


@dataclass
class ResidualEntry:
    tree: RootedTree
    density: int
    symmetry: int
    b_residual: object
    d_residual: object | None  # None above order 4

    @property
    def order(self) -> int:
        return self.tree.order


@dataclass
class ResidualReport:
    pair_name: str
    mode: str
    order: int
    entries: list[ResidualEntry] = field(default_factory=list)

    def failures(self, b_order: int = 5, d_order: int = 4, tol: float = FLOAT_ATOL):
        """Entries whose b- (up to ``b_order``) or d- (up to ``d_order``) residual is nonzero."""
        exact = self.mode == RATIONAL
        bad = []
        for e in self.entries:
            b_bad = e.order <= b_order and (e.b_residual != 0 if exact else abs(e.b_residual) > tol)
            d_bad = (
                e.order <= d_order
                and e.d_residual is not None
                and (e.d_residual != 0 if exact else abs(e.d_residual) > tol)
            )
            if b_bad or d_bad:
                bad.append(e)
        return bad

    def ok(self, b_order: int = 5, d_order: int = 4, tol: float = FLOAT_ATOL) -> bool:
        return not self.failures(b_order, d_order, tol)

    def max_abs(self, which: str = "b", up_to: int = 5) -> float:
        vals = [
            abs(float(getattr(e, f"{which}_residual")))
            for e in self.entries
            if e.order <= up_to and getattr(e, f"{which}_residual") is not None
        ]
        return max(vals) if vals else 0.0

    def records(self) -> list[dict]:
        return [
            {
                "tree": e.tree.bracket(),
                "order": e.order,
                "density": e.density,
                "symmetry": e.symmetry,
                "b_residual": str(e.b_residual) if self.mode == RATIONAL else float(e.b_residual),
                "d_residual": None if e.d_residual is None
                else (str(e.d_residual) if self.mode == RATIONAL else float(e.d_residual)),
            }
            for e in self.entries
        ]


def residuals(pair: ButcherPair, p: int = 5) -> ResidualReport:
    """``b.Phi(t) - 1/t!`` for every tree up to order ``p`` and ``d.Phi(t)`` up to order 4.

    Exact in rational mode.
    """
    table = enumerate_trees(p)
    phis = elementary_weights([e.tree for e in table], pair.A, _one(pair))
    report = ResidualReport(pair.name, pair.mode, p)
    for e, phi in zip(table, phis):
        target = Fraction(1, e.density) if pair.mode == RATIONAL else 1.0 / e.density
        rb = _dot(pair.b, phi) - target
        rd = _dot(pair.d, phi) if e.tree.order <= 4 else None
        report.entries.append(ResidualEntry(e.tree, e.density, e.symmetry, rb, rd))
    return report


def error_norm(pair: ButcherPair, p: int) -> float:
    """``T_p = sqrt(sum over order-p trees of ((b.Phi - 1/t!) / sigma)**2)``."""
    if p not in (6, 7):
        raise ValueError("error norms are defined here for p = 6 or 7")
    rep = residuals(pair, p)
    total = sum(
        (e.b_residual / e.symmetry) ** 2 for e in rep.entries if e.order == p
    )
    return math.sqrt(float(total))


@dataclass(frozen=True)
class Metrics:
    T6: float
    T7: float
    max_abs_a: float
    min_nonzero_b: object
    k6: object | None

    def as_dict(self) -> dict:
        return {
            "T6": self.T6,
            "T7": self.T7,
            "max_abs_a": float(self.max_abs_a),
            "min_nonzero_b": float(self.min_nonzero_b),
            "k6": None if self.k6 is None else str(self.k6) if isinstance(self.k6, Fraction)
            else float(self.k6),
        }


def k6(pair: ButcherPair):
    """Coefficient of z**6 in R(z), i.e. ``b6 a65 c'''5``.

    None unless the pair is a 7-stage FSAL pair.
    """
    if pair.s != 7 or not pair.is_fsal:
        return None
    return stability(pair).coefficients[6]


def metrics(pair: ButcherPair) -> Metrics:
    max_a = max(abs(x) for row in pair.A for x in row)
    min_b = min(x for x in pair.b if x != 0)
    return Metrics(
        T6=error_norm(pair, 6),
        T7=error_norm(pair, 7),
        max_abs_a=max_a,
        min_nonzero_b=min_b,
        k6=k6(pair),
    )


@dataclass(frozen=True)
class StabilityPoly:
    """``R(z) = sum_k coefficients[k] z**k``."""

    coefficients: tuple

    def __call__(self, z):
        out = 0 * z
        for a in reversed(self.coefficients):
            out = out * z + a
        return out

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1


def stability(pair: ButcherPair) -> StabilityPoly:
    """Stability polynomial ``R(z) = 1 + sum_k b^T A^k 1 z**(k+1)``.

    Exact in rational mode; trailing zero coefficients are dropped.
    """
    one = _one(pair)
    v = [one] * pair.s
    coeffs = [one, _dot(pair.b, v)]
    for _ in range(pair.s - 1):
        v = [_dot(row, v) for row in pair.A]
        coeffs.append(_dot(pair.b, v))
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return StabilityPoly(tuple(coeffs))


def stability_boundary(poly: StabilityPoly, n_points: int = 2048, branch_from_origin: bool = True):
    """Trace ``R(z) = exp(i phi)`` over a uniform ``phi`` grid on ``[0, 2 pi]``.

    Roots are continued from ``phi = 0``; with ``branch_from_origin`` only
    the branch through ``z = 0`` is returned (an ``(n_points, )`` complex
    array), otherwise all ``deg R`` branches as an ``(n_points, deg)``
    array whose union is the full ``|R| = 1`` locus. Continuation jumps are
    reported as a warning; the partial result is still returned.
    """
    coeffs = np.array([float(a) for a in poly.coefficients])
    deg = len(coeffs) - 1
    phis = np.linspace(0.0, 2 * np.pi, n_points)
    # numpy.roots wants highest degree first
    base = coeffs[::-1].astype(complex)
    prev = np.roots(base - np.r_[np.zeros(deg), 1.0])
    order = np.argsort(np.abs(prev))
    prev = prev[order]
    out = np.empty((n_points, deg), dtype=complex)
    out[0] = prev
    worst = 0.0
    for k in range(1, n_points):
        rhs = np.exp(1j * phis[k])
        roots = np.roots(base - np.r_[np.zeros(deg), rhs])
        nxt = np.empty(deg, dtype=complex)
        free = list(range(deg))
        for j in range(deg):
            dist = [abs(roots[m] - prev[j]) for m in free]
            m = free.pop(int(np.argmin(dist)))
            nxt[j] = roots[m]
        worst = max(worst, float(np.max(np.abs(nxt - prev))))
        out[k] = nxt
        prev = nxt
    step = 2 * np.pi / max(n_points - 1, 1)
    if worst > 50 * step * max(1.0, np.max(np.abs(out))):
        warnings.warn("stability boundary continuation jumped; result may be partial",
                      RuntimeWarning, stacklevel=2)
    return out[:, 0] if branch_from_origin else out


def real_stability_endpoint(poly: StabilityPoly, x_min: float = -20.0, n_scan: int = 4000) -> float:
    """Leftmost point of the real interval ``[x, 0]`` on which ``|R| <= 1``.

    Scans leftwards from the origin for the first sign change of
    ``|R(x)| - 1`` and refines it by bisection.
    """
    f = lambda x: abs(float(poly(x))) - 1.0  # noqa: E731
    xs = np.linspace(0.0, x_min, n_scan)[1:]
    prev = xs[0]
    for x in xs[1:]:
        if f(x) > 0 and f(prev) <= 0:
            lo, hi = x, prev
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if f(mid) > 0:
                    lo = mid
                else:
                    hi = mid
            return 0.5 * (lo + hi)
        prev = x
    raise ValueError("no stability boundary crossing found on the scanned interval")


def stage_orders(A, c, mode: str, cap: int = 6) -> list[int]:
    """Largest q per stage such that ``sum_j a_ij c_j**(k-1) = c_i**k / k`` for k <= q."""
    exact = mode == RATIONAL
    s = len(c)
    out = []
    for i in range(s):
        q = 0
        for k in range(1, cap + 1):
            lhs = sum(A[i][j] * c[j] ** (k - 1) for j in range(s))
            rhs = c[i] ** k / k
            if (lhs - rhs == 0) if exact else abs(lhs - rhs) <= 1e-12:
                q = k
            else:
                break
        out.append(q)
    return out


def _dominant(weights, orders, mode) -> int:
    exact = mode == RATIONAL
    used = [q for w, q in zip(weights, orders) if (w != 0 if exact else abs(w) > 1e-12)]
    return min(used)


def dso(pair: ButcherPair, cap: int = 6) -> tuple[int, int]:
    """Dominant stage order of the 5th and of the 4th order method.

    The smallest stage order among the stages that carry a nonzero weight
    (``b`` for the propagating method, ``b + d`` for the embedded one).
    """
    orders = stage_orders(pair.A, pair.c, pair.mode, cap)
    return _dominant(pair.b, orders, pair.mode), _dominant(pair.bhat, orders, pair.mode)


def simplifying_violations(pair: ButcherPair) -> list[int]:
    """1-based stages i >= 3 with ``c'_i != c_i**2 / 2``."""
    orders = stage_orders(pair.A, pair.c, pair.mode, cap=2)
    return [i + 1 for i, q in enumerate(orders) if i >= 2 and q < 2]


@dataclass
class InterpolantRow:
    theta: object
    residuals: list  # continuous order conditions, trees of order <= 4
    endpoint_b: list | None = None


def interpolant_check(pair: ButcherPair, thetas) -> list[InterpolantRow]:
    """Residuals of ``sum_j beta_j(theta) Phi_j(t) - theta**|t| / t!`` for trees of order <= 4."""
    if pair.interpolant is None:
        raise ValueError(f"pair {pair.name!r} has no interpolant")
    table = enumerate_trees(4)
    phis = elementary_weights([e.tree for e in table], pair.A, _one(pair))
    rows = []
    for th in thetas:
        w = pair.interpolant.weights(th)
        res = [
            _dot(w, phi) - th ** e.tree.order / e.density
            for e, phi in zip(table, phis)
        ]
        rows.append(InterpolantRow(th, res))
    return rows


def interpolant_endpoint_residuals(pair: ButcherPair) -> tuple[list, list]:
    """``beta_j(1) - b_j`` and ``beta_j'(1) - delta_{j,s}`` componentwise."""
    one = _one(pair)
    w = pair.interpolant.weights(one)
    dw = pair.interpolant.derivative_weights(one)
    s = pair.s
    return (
        [x - y for x, y in zip(w, pair.b)],
        [x - (one if j == s - 1 else 0 * one) for j, x in enumerate(dw)],
    )


@dataclass
class MDiagnostics:
    """Rank structure of the d-system matrix at a parameter point.

    ``annihilator_residuals`` holds the largest entry of ``v^T M`` for the
    three row vectors ``[1/120, 0, b6 a65, 0, 0]``, ``[0, 1/24, b5, b6, 0]``
    and ``[0, 0, d5, d6, d7]`` (the last is None when no ``d`` exists).
    """

    rank_12x2: int
    rank_M: int
    rows_1_3_proportional: bool
    rank_M_without_row5: int
    d7: object | None
    rank_invariant: object
    expected_invariant: object
    annihilator_residuals: list

    @property
    def six_stage(self) -> bool:
        return self.d7 is not None and self.d7 == 0 if isinstance(self.d7, Fraction) \
            else self.d7 is not None and abs(self.d7) < 1e-12

    def violations(self) -> list[str]:
        out = []
        if self.rank_12x2 != 1:
            out.append(f"12x2 matrix has rank {self.rank_12x2}, expected 1")
        if self.rank_M > 2:
            out.append(f"M has rank {self.rank_M}, expected <= 2")
        if not self.rows_1_3_proportional:
            out.append("rows 1 and 3 of M are not proportional")
        if self.six_stage and self.rank_M_without_row5 != 1:
            out.append("d7 = 0 but M without row 5 does not have rank 1")
        diff = self.rank_invariant - self.expected_invariant
        if (diff != 0) if isinstance(diff, Fraction) else abs(diff) > 1e-10:
            out.append("m51 m24 - m21 m54 differs from c'3^2 c2")
        return out


def m_diagnostics(params) -> MDiagnostics:
    """Check the rank conditions behind the construction at ``params``.

    ``params`` is a :class:`~fsalpairs.derive.GeneralParams`. Node data
    come from the general route without its postconditions, so points off
    the families are reported rather than rejected.
    """
    from . import derive as dv

    nodes = dv.extended_nodes(params, check=False)
    c = params.nodes
    aux = dv.AuxQuantities(c, nodes.cp, nodes.cpp)
    M = dv.construction_matrix(aux, nodes.cppp5, nodes.cppp6, nodes.a65)
    Mt = dv.transform_matrix(M, params.c2, params.c3, nodes.cpp)
    pair = dv.back_substitute(params, nodes)
    basis = dv.d_nullspace(pair)
    d = dv.normalize_d(basis[0]) if len(basis) == 1 else None

    one = params.one
    vecs = [
        [one / 120, 0 * one, nodes.b6 * nodes.a65, 0 * one, 0 * one],
        [0 * one, one / 24, nodes.b5, nodes.b6, 0 * one],
    ]
    if d is not None:
        vecs.append([0 * one, 0 * one, d[4], d[5], d[6]])
    ann = [max(abs(float(sum(v[i] * M[i][j] for i in range(5)))) for j in range(4))
           for v in vecs]
    if d is None:
        ann.append(None)
    return MDiagnostics(
        rank_12x2=dv.rank_of(dv.twelve_by_two(aux, nodes)),
        rank_M=dv.rank_of(M),
        rows_1_3_proportional=dv.rank_of([M[0], M[2]]) <= 1,
        rank_M_without_row5=dv.rank_of(M[:4]),
        d7=None if d is None else d[6],
        rank_invariant=dv.rank_invariant(Mt),
        expected_invariant=params.cp3 ** 2 * params.c2,
        annihilator_residuals=ann,
    )
