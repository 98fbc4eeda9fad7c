"""Embedded pairs: representation, validation and the text file format.

A pair is stored in FSAL form: the last stage sits at ``c = 1`` and its
row of ``A`` repeats the weights ``b``. Six-stage pairs are padded to this
shape with a zero last component of ``d``.

Scalars are either all exact ``Fraction`` (``mode="rational"``) or all
``float`` (``mode="float"``). Going from rational to float is allowed;
the reverse is not.

File format
-----------
UTF-8 text. Lines starting with ``#`` and blank lines are ignored. A
header of ``key: value`` lines (``name``, ``family``, ``mode``, ``source``)
is followed by the sections ``C``, ``A``, ``B``, ``D`` and optionally
``BETA``, each introduced by its label alone on a line::

    name: example
    mode: rational
    C
    0 1/2 1
    A
    0   0   0
    1/2 0   0
    0   1   0
    B
    0 1 0
    D
    1/2 -1 1/2

``C``, ``B`` and ``D`` are one line of ``s`` entries; ``A`` is ``s`` lines
of ``s`` entries; ``BETA`` holds one line of ``s`` entries per power of
theta, starting at theta**1. Rationals are written ``p/q`` (``p`` when the
denominator is 1), floats in shortest round-trip form.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

RATIONAL = "rational"
FLOAT = "float"
MODES = (RATIONAL, FLOAT)

FLOAT_ATOL = 1e-13

SECTIONS = ("C", "A", "B", "D", "BETA")
HEADER_KEYS = ("name", "family", "mode", "source")


class TableauStructureError(ValueError):
    """Malformed dimensions or an unusable scalar."""


class TableauParseError(ValueError):
    """A tableau file could not be parsed."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.path = path
        self.line = line


class TableauWarning(UserWarning):
    """A loaded tableau violates one of the pair invariants."""


def to_scalar(x, mode: str):
    """Convert ``x`` to the scalar type of ``mode``.

    Floats are refused in rational mode, since the conversion would silently
    freeze a rounding error into an exact value.
    """
    if mode == RATIONAL:
        if isinstance(x, Fraction):
            return x
        if isinstance(x, bool):
            raise TableauStructureError(f"boolean is not a scalar: {x!r}")
        if isinstance(x, int):
            return Fraction(x)
        if isinstance(x, str):
            return parse_rational(x)
        raise TableauStructureError(
            f"cannot store {type(x).__name__} {x!r} in rational mode"
        )
    if mode == FLOAT:
        if isinstance(x, str):
            return parse_float(x)
        v = float(x)
        if not math.isfinite(v):
            raise TableauStructureError(f"non-finite entry {x!r}")
        return v
    raise TableauStructureError(f"unknown mode {mode!r}")


def parse_rational(text: str) -> Fraction:
    text = text.strip()
    num, sep, den = text.partition("/")
    try:
        p = int(num)
        q = int(den) if sep else 1
    except ValueError:
        raise TableauStructureError(f"not a rational number: {text!r}") from None
    if q == 0:
        raise TableauStructureError(f"zero denominator in {text!r}")
    return Fraction(p, q)


def parse_float(text: str) -> float:
    text = text.strip()
    if "/" in text:
        # exact rationals are welcome in float files; they round once
        return float(parse_rational(text))
    try:
        v = float(text)
    except ValueError:
        raise TableauStructureError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise TableauStructureError(f"non-finite entry {text!r}")
    return v


def format_scalar(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    return repr(float(x))


@dataclass(frozen=True)
class Interpolant:
    """Continuous extension ``beta_j(theta) = sum_k beta[k-1][j] theta**k``."""

    beta: tuple

    @property
    def degree(self) -> int:
        return len(self.beta)

    def weights(self, theta) -> list:
        out = [0 * theta] * len(self.beta[0])
        power = theta
        for row in self.beta:
            out = [w + r * power for w, r in zip(out, row)]
            power = power * theta
        return out

    def derivative_weights(self, theta) -> list:
        """d/dtheta of the weights."""
        out = [0 * theta] * len(self.beta[0])
        power = 1 + 0 * theta
        for k, row in enumerate(self.beta, start=1):
            out = [w + k * r * power for w, r in zip(out, row)]
            power = power * theta
        return out


@dataclass(frozen=True)
class ButcherPair:
    """Embedded pair in FSAL form.

    Attributes
    ----------
    c, A, b, d
        Nodes, coefficients, propagating (5th order) weights and the
        difference vector; the embedded weights are ``b + d``.
    interpolant
        Optional dense-output coefficients.
    mode
        ``"rational"`` or ``"float"``.
    """

    c: tuple
    A: tuple
    b: tuple
    d: tuple
    interpolant: Interpolant | None = None
    name: str = ""
    family: str = ""
    source: str = ""
    mode: str = RATIONAL
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    @classmethod
    def build(cls, c, A, b, d, beta=None, *, mode=RATIONAL, **meta) -> "ButcherPair":
        """Coerce nested sequences to the scalar type of ``mode``.

        Raises :class:`TableauStructureError` on inconsistent dimensions.
        """
        if mode not in MODES:
            raise TableauStructureError(f"unknown mode {mode!r}")
        s = len(c)
        if s < 2:
            raise TableauStructureError("a pair needs at least two stages")
        if len(A) != s or any(len(row) != s for row in A):
            raise TableauStructureError(f"A must be {s}x{s}")
        if len(b) != s or len(d) != s:
            raise TableauStructureError(f"b and d must have length {s}")
        conv = lambda v: tuple(to_scalar(x, mode) for x in v)  # noqa: E731
        interp = None
        if beta is not None:
            if isinstance(beta, Interpolant):
                beta = beta.beta
            if len(beta) == 0 or any(len(row) != s for row in beta):
                raise TableauStructureError(f"BETA rows must have length {s}")
            interp = Interpolant(tuple(conv(row) for row in beta))
        extra = {k: meta.pop(k) for k in ("name", "family", "source") if k in meta}
        return cls(
            c=conv(c),
            A=tuple(conv(row) for row in A),
            b=conv(b),
            d=conv(d),
            interpolant=interp,
            mode=mode,
            meta=dict(meta),
            **extra,
        )

    @property
    def s(self) -> int:
        return len(self.c)

    @property
    def bhat(self) -> tuple:
        """Weights of the embedded (4th order) method."""
        return tuple(x + y for x, y in zip(self.b, self.d))

    @property
    def is_fsal(self) -> bool:
        return (
            self.c[-1] == 1
            and self.b[-1] == 0
            and all(a == w for a, w in zip(self.A[-1], self.b))
        )

    @property
    def effective_stages(self) -> int:
        """Stages whose derivatives enter either weight vector."""
        if self.d[-1] == 0 and self.b[-1] == 0:
            return self.s - 1
        return self.s

    def to_float(self) -> "ButcherPair":
        if self.mode == FLOAT:
            return self
        f = lambda v: tuple(float(x) for x in v)  # noqa: E731
        interp = None
        if self.interpolant is not None:
            interp = Interpolant(tuple(f(r) for r in self.interpolant.beta))
        return replace(
            self,
            c=f(self.c),
            A=tuple(f(r) for r in self.A),
            b=f(self.b),
            d=f(self.d),
            interpolant=interp,
            mode=FLOAT,
        )

    def arrays(self, dtype=np.float64):
        """``(c, A, b, d)`` as numpy arrays."""
        conv = _to_dtype(dtype)
        return (
            np.array([conv(x) for x in self.c], dtype=dtype),
            np.array([[conv(x) for x in r] for r in self.A], dtype=dtype),
            np.array([conv(x) for x in self.b], dtype=dtype),
            np.array([conv(x) for x in self.d], dtype=dtype),
        )

    def beta_array(self, dtype=np.float64):
        if self.interpolant is None:
            return None
        conv = _to_dtype(dtype)
        return np.array(
            [[conv(x) for x in r] for r in self.interpolant.beta], dtype=dtype
        )

    def with_d(self, d) -> "ButcherPair":
        return replace(self, d=tuple(to_scalar(x, self.mode) for x in d))

    def renamed(self, name: str, **kw) -> "ButcherPair":
        return replace(self, name=name, **kw)


def _to_dtype(dtype):
    if np.dtype(dtype) == np.longdouble and np.dtype(np.longdouble) != np.float64:
        def conv(x):
            if isinstance(x, Fraction):
                return np.longdouble(x.numerator) / np.longdouble(x.denominator)
            return np.longdouble(x)
        return conv
    return float


def _is_zero(x, mode, tol=FLOAT_ATOL) -> bool:
    if mode == RATIONAL:
        return x == 0
    return abs(x) <= tol


def validate(pair: ButcherPair) -> list[str]:
    """List the violated pair invariants (empty when the pair is valid).

    Checks are exact in rational mode and use an absolute tolerance of
    ``1e-13`` in float mode.
    """
    s = pair.s
    if len(pair.A) != s or any(len(r) != s for r in pair.A):
        raise TableauStructureError(f"A must be {s}x{s}")
    if len(pair.b) != s or len(pair.d) != s:
        raise TableauStructureError(f"b and d must have length {s}")
    zero = lambda x: _is_zero(x, pair.mode)  # noqa: E731
    out = []
    for i in range(s):
        for j in range(i, s):
            if pair.A[i][j] != 0:
                out.append(f"A[{i + 1},{j + 1}] = {pair.A[i][j]} is on/above the diagonal")
    for i in range(s):
        r = sum(pair.A[i]) - pair.c[i]
        if not zero(r):
            out.append(f"row sum of A row {i + 1} differs from c{i + 1} by {r}")
    if not zero(pair.c[0]):
        out.append(f"c1 = {pair.c[0]}, expected 0")
    if not zero(pair.c[-1] - 1):
        out.append(f"c{s} = {pair.c[-1]}, expected 1")
    if not zero(pair.b[-1]):
        out.append(f"FSAL: b{s} = {pair.b[-1]}, expected 0")
    for j in range(s):
        if not zero(pair.A[-1][j] - pair.b[j]):
            out.append(f"FSAL: a{s}{j + 1} = {pair.A[-1][j]} differs from b{j + 1} = {pair.b[j]}")
    if all(x == 0 for x in pair.d):
        out.append("d is the zero vector")
    if not zero(sum(pair.d)):
        out.append(f"sum of d is {sum(pair.d)}, expected 0")
    if not zero(sum(pair.b) - 1):
        out.append(f"sum of b is {sum(pair.b)}, expected 1")
    if pair.interpolant is not None:
        at1 = pair.interpolant.weights(1 if pair.mode == RATIONAL else 1.0)
        for j in range(s):
            if not zero(at1[j] - pair.b[j]):
                out.append(f"interpolant: beta_{j + 1}(1) = {at1[j]} differs from b{j + 1}")
    return out


def dumps(pair: ButcherPair) -> str:
    lines = [f"name: {pair.name}", f"family: {pair.family}", f"mode: {pair.mode}"]
    if pair.source:
        lines.append(f"source: {pair.source}")
    row = lambda v: " ".join(format_scalar(x) for x in v)  # noqa: E731
    lines += ["C", row(pair.c), "A"]
    lines += [row(r) for r in pair.A]
    lines += ["B", row(pair.b), "D", row(pair.d)]
    if pair.interpolant is not None:
        lines.append("BETA")
        lines += [row(r) for r in pair.interpolant.beta]
    return "\n".join(lines) + "\n"


def save(pair: ButcherPair, path, *, force: bool = False) -> None:
    """Write ``pair``; refuses invalid pairs unless ``force`` is set."""
    if not force:
        bad = validate(pair)
        if bad:
            raise ValueError("refusing to save an invalid pair: " + "; ".join(bad))
    Path(path).write_text(dumps(pair), encoding="utf-8")


def loads(text: str, path=None) -> ButcherPair:
    header: dict[str, str] = {}
    sections: dict[str, list[tuple[int, list[str]]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line in SECTIONS:
            if line in sections:
                raise TableauParseError(f"duplicate section {line}", path, lineno)
            current = line
            sections[current] = []
            continue
        if current is None:
            key, sep, value = line.partition(":")
            key = key.strip().lower()
            if not sep or key not in HEADER_KEYS:
                raise TableauParseError(f"expected a header line 'key: value', got {line!r}",
                                        path, lineno)
            header[key] = value.strip()
            continue
        sections[current].append((lineno, line.replace(",", " ").split()))

    mode = header.get("mode", RATIONAL)
    if mode not in MODES:
        raise TableauParseError(f"unknown mode {mode!r}", path)
    for name in ("C", "A", "B", "D"):
        if name not in sections:
            raise TableauParseError(f"missing section {name}", path)

    def one_row(name):
        rows = sections[name]
        if len(rows) != 1:
            line = rows[1][0] if len(rows) > 1 else None
            raise TableauParseError(f"section {name} must be a single line", path, line)
        return rows[0]

    def convert(lineno, fields, name, width):
        if len(fields) != width:
            raise TableauParseError(
                f"section {name}: expected {width} entries, found {len(fields)}", path, lineno
            )
        out = []
        for k, text_ in enumerate(fields, start=1):
            try:
                out.append(to_scalar(text_, mode))
            except TableauStructureError as exc:
                raise TableauParseError(f"section {name}, field {k}: {exc}", path, lineno) from None
        return out

    c_line, c_fields = one_row("C")
    s = len(c_fields)
    c = convert(c_line, c_fields, "C", s)
    if len(sections["A"]) != s:
        raise TableauParseError(f"section A must have {s} lines, found {len(sections['A'])}", path)
    A = [convert(ln, f, "A", s) for ln, f in sections["A"]]
    b = convert(*one_row("B"), "B", s)
    d = convert(*one_row("D"), "D", s)
    beta = None
    if "BETA" in sections:
        beta = [convert(ln, f, "BETA", s) for ln, f in sections["BETA"]]
        if not beta:
            raise TableauParseError("empty BETA section", path)
    return ButcherPair.build(
        c, A, b, d, beta,
        mode=mode,
        name=header.get("name", ""),
        family=header.get("family", ""),
        source=header.get("source", ""),
    )


def load(path) -> ButcherPair:
    """Read a tableau file.

    Invariant violations do not reject the file; they are reported through
    a :class:`TableauWarning` so broken tableaux can still be studied.
    """
    text = Path(path).read_text(encoding="utf-8")
    pair = loads(text, path=str(path))
    bad = validate(pair)
    if bad:
        warnings.warn(f"{path}: " + "; ".join(bad), TableauWarning, stacklevel=2)
    return pair

