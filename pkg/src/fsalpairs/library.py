"""Built-in pairs.

The five pairs introduced alongside the family classification are written
out here; literature pairs ship as tableau files under ``data/``.
"""

from __future__ import annotations

from fractions import Fraction as F
from functools import lru_cache
from importlib import resources
from math import isqrt

from .tableau import FLOAT, RATIONAL, ButcherPair, loads

_Z = F(0)


def _pad(rows, s=7):
    return [list(r) + [_Z] * (s - len(r)) for r in rows]


def _type_b():
    c = [0, F(1, 6), F(7, 32), F(33, 68), F(3, 4), F(7, 8), 1]
    b = [F(1, 9), F(-59508, 193375), F(2281472, 3882375), F(1920983, 7492875),
         F(437, 5355), F(76912, 283815), 0]
    A = _pad([
        [],
        [F(1, 6)],
        [F(67, 512), F(45, 512)],
        [F(224787, 903992), F(-1233765, 903992), F(180960, 112999)],
        [F(921, 3496), F(-552447, 1136200), F(125664, 316825), F(103173, 179075)],
        [F(13, 13984), F(-5604237, 49992800), F(2246076, 3485075),
         F(-1822723, 189103200), F(371, 1056)],
        b[:6],
    ])
    d = [0, F(2349, 700), F(-832, 175), F(83521, 31800), F(-377, 168), F(377, 371), 0]
    return ButcherPair.build(c, A, b, d, name="typeB", family="B",
                             source="6-stage pair of type B (c2=1/6, c3=7/32, c5=3/4, c6=7/8)")


def _aprime():
    c = [0, F(1, 5), F(21, 65), F(9, 10), F(39, 40), 1, 1]
    b = [F(1441, 14742), 0, F(114244, 234927), F(118, 81), F(-12800, 4407), F(41, 22), 0]
    A = _pad([
        [],
        [F(1, 5)],
        [F(21, 338), F(441, 1690)],
        [F(639, 392), F(-729, 140), F(1755, 392)],
        [F(4878991, 1693440), F(-16601, 1792), F(210067, 28224), F(-1469, 17280)],
        [F(13759919, 4230954), F(-2995, 287), F(507312091, 61294590), F(-22, 405),
         F(-7040, 180687)],
        b[:6],
    ])
    d = [F(-1, 273), 0, F(2197, 174020), F(-4, 15), F(1280, 1469), F(-33743, 52712),
         F(127, 4792)]
    beta = [
        [1, 0, 0, 0, 0, 0, 0],
        [F(-4489, 1638), 0, F(35152, 8701), F(-118, 9), F(48000, 1469), F(-246, 11), F(3, 2)],
        [F(21170, 7371), 0, F(-1441232, 234927), F(2596, 81), F(-339200, 4407), F(574, 11), -4],
        [F(-2540, 2457), 0, F(202124, 78309), F(-472, 27), F(60800, 1469), F(-615, 22), F(5, 2)],
    ]
    return ButcherPair.build(c, A, b, d, beta, name="aprime", family="Aprime",
                             source="FSAL pair of type A' with 4th order interpolant")


def _bprime_c3_0():
    c = [0, F(4, 15), 0, F(1, 2), F(4, 5), 1, 1]
    b = [F(41, 384), F(3375, 9856), F(-7, 384), F(4, 21), F(125, 384), F(7, 132), 0]
    A = _pad([
        [],
        [F(4, 15)],
        [F(6, 7), F(-6, 7)],
        [F(-11, 384), F(21, 32), F(-49, 384)],
        [F(4, 75), F(-6, 35), F(14, 75), F(128, 175)],
        [F(81, 224), F(4917, 1568), F(-33, 32), F(-132, 49), F(275, 224)],
        b[:6],
    ])
    d = [F(1, 40), F(405, 616), F(-7, 40), F(-32, 35), F(5, 8), F(-56, 55), F(4, 5)]
    return ButcherPair.build(c, A, b, d, name="bprime-c3-0", family="Bprime-c3-0",
                             source="FSAL pair of type B' with c3 = 0")


def _bprime_c3_c2():
    c = [0, F(1, 4), F(1, 4), F(1, 3), F(4, 5), 1, 1]
    b = [F(5, 48), 0, 0, F(27, 56), F(125, 336), F(1, 24), 0]
    A = _pad([
        [],
        [F(1, 4)],
        [F(-11, 20), F(4, 5)],
        [F(1, 9), F(43, 216), F(5, 216)],
        [F(66, 125), F(-593, 250), F(-19, 50), F(378, 125)],
        [F(-7, 2), F(151, 8), F(25, 8), F(-135, 7), F(25, 14)],
        b[:6],
    ])
    # the reference d2, d3 (BPRIME_C3_C2_REFERENCE_D) belong to c'3 = 1/40, not to
    # this A; these are the null-vector entries for the tableau above
    d = [F(11, 8), -9, F(-5, 3), F(297, 28), F(-125, 56), F(-1, 12), 1]
    return ButcherPair.build(c, A, b, d, name="bprime-c3-c2", family="Bprime-c3-c2",
                             source="FSAL pair of type B' with c3 = c2")


BPRIME_C3_C2_REFERENCE_D = (F(11, 8), F(8, 3), F(-40, 3), F(297, 28), F(-125, 56),
                            F(-1, 12), F(1))


def sqrt4054_c5(digits: int = 40) -> F:
    """Rational approximation of ``3 (8 sqrt(4054) - 431) / 289``."""
    scale = 10 ** digits
    root = F(isqrt(4054 * scale * scale), scale)
    return 3 * (8 * root - 431) / 289


def sqrt4054_entries(x):
    """Closed-form tableau of the c2=1/5, c3=1/4, c'3=1/40, c4=3/5 B' line.

    ``x`` is the node c5. Returns ``(c, A, b, d)`` lists in the scalar type
    of ``x``.
    """
    e = 39 * x - 5
    f = 285 - 319 * x
    g = 5 * x - 1
    h = 4 * x - 1
    k = 5 * x - 3
    m = 1 - x
    n = 43 * x - 33
    one = x ** 0
    c = [0 * x, F(1, 5) * one, F(1, 4) * one, F(3, 5) * one, x, one, one]
    row5 = [
        -x * (860 * x ** 3 - 1077 * x ** 2 + 379 * x - 48) / (3 * e),
        x * g * (1340 * x ** 2 - 1367 * x + 277) / (2 * e),
        -16 * x * g * h * (73 * x - 55) / (7 * e),
        115 * x * g * h * k / (42 * e),
    ]
    row6 = [
        (113 * x ** 2 - 35 * x - 40) / (x * f),
        -4 * (2845 * x ** 2 - 2999 * x + 654) / (g * f),
        384 * (168 * x ** 2 - 193 * x + 52) / (7 * h * f),
        -460 * (35 * x ** 2 - 55 * x + 22) / (7 * k * f),
        24 * m * e / (x * g * h * k * f),
    ]
    b = [
        (31 * x - 5) / (288 * x),
        -125 * (3 - x) / (768 * g),
        8 * (7 * x + 3) / (63 * h),
        2875 * (7 * x - 5) / (8064 * k),
        e / (96 * x * g * h * k * m),
        f / (2304 * m),
        0 * x,
    ]
    d = [
        5 * n / (216 * x),
        175 * n / (288 * g),
        -152 * n / (189 * h),
        575 * n / (1512 * k),
        -e * n / (72 * x * g * h * k * m),
        -5 * f / (864 * m),
        one,
    ]
    A = [
        [0 * x] * 7,
        [F(1, 5) * one] + [0 * x] * 6,
        [F(1, 8) * one, F(1, 8) * one] + [0 * x] * 5,
        [F(141, 575) * one, F(-228, 115) * one, F(1344, 575) * one] + [0 * x] * 4,
        row5 + [0 * x] * 3,
        row6 + [0 * x] * 2,
        b[:6] + [0 * x],
    ]
    return c, A, b, d


def _sqrt4054():
    c, A, b, d = sqrt4054_entries(sqrt4054_c5())
    return ButcherPair.build(c, [[float(x) for x in r] for r in A], b, d, mode=FLOAT,
                             name="sqrt4054", family="Bprime",
                             source="FSAL pair of type B' with c5 = 3(8 sqrt(4054) - 431)/289")


# the sqrt(4054) pair rounded to the nearest thousandth
SQRT4054_ROUNDED = {
    "c": [0.000, 0.200, 0.250, 0.600, 0.814, 1.000, 1.000],
    "A": [
        [],
        [0.200],
        [0.125, 0.125],
        [0.245, -1.983, 2.337],
        [-0.107, 2.416, -2.110, 0.615],
        [0.304, -4.967, 5.896, -1.014, 0.782],
        [0.086, -0.116, 0.490, 0.232, 0.249, 0.059],
    ],
    "b": [0.086, -0.116, 0.490, 0.232, 0.249, 0.059, 0.0],
    "d": [0.056, 0.392, -0.707, 0.706, -0.657, -0.791, 1.000],
}

_FAMILY = {
    "typeB": (_type_b, RATIONAL),
    "aprime": (_aprime, RATIONAL),
    "bprime-c3-0": (_bprime_c3_0, RATIONAL),
    "bprime-c3-c2": (_bprime_c3_c2, RATIONAL),
    "sqrt4054": (_sqrt4054, FLOAT),
}

# name -> (data file, best mode)
_LITERATURE = {
    "fehlberg": ("fehlberg.tab", RATIONAL),
    "cashkarp": ("cashkarp.tab", RATIONAL),
    "dopri": ("dopri.tab", RATIONAL),
    "tsit5": ("tsit5.tab", FLOAT),
    "bs5": ("bs5.tab", RATIONAL),
}

FAMILY_PAIRS = tuple(_FAMILY)
LITERATURE_PAIRS = tuple(_LITERATURE)
ALIASES = {"dp5": "dopri", "tsitouras": "tsit5", "type-b": "typeB", "typeb": "typeB",
           "a-prime": "aprime", "bogacki-shampine": "bs5"}


def available() -> list[str]:
    return list(_FAMILY) + list(_LITERATURE)


def best_mode(name: str) -> str:
    name = ALIASES.get(name, name)
    if name in _FAMILY:
        return _FAMILY[name][1]
    return _LITERATURE[name][1]


@lru_cache(maxsize=None)
def builtin(name: str) -> ButcherPair:
    """Look up a built-in pair by name.

    Raises
    ------
    KeyError
        For an unknown name; the message lists what is available.
    """
    key = ALIASES.get(name, name)
    if key in _FAMILY:
        return _FAMILY[key][0]()
    if key in _LITERATURE:
        fname = _LITERATURE[key][0]
        text = resources.files("fsalpairs.data").joinpath(fname).read_text(encoding="utf-8")
        return loads(text, path=fname)
    raise KeyError(f"unknown pair {name!r}; available: {', '.join(available())}")
