"""Rooted trees, their densities and symmetries, and elementary weights.

Trees are kept in a canonical form (children sorted under a fixed total
order), so equality and hashing never need an isomorphism test.
"""

from __future__ import annotations

from collections import Counter
from functools import lru_cache
from math import factorial, prod
from typing import Iterator, NamedTuple, Sequence

MAX_ORDER = 8


class RootedTree:
    """Unlabelled rooted tree in canonical form.

    Parameters
    ----------
    children : iterable of RootedTree
        Subtrees hanging off the root. Their order is irrelevant; they are
        sorted on construction.
    """

    __slots__ = ("children", "order", "_key")

    def __init__(self, children: Sequence["RootedTree"] = ()):
        kids = tuple(sorted(children, key=lambda t: t._key))
        self.children = kids
        self.order = 1 + sum(t.order for t in kids)
        self._key = (self.order, tuple(t._key for t in kids))

    def __eq__(self, other):
        return isinstance(other, RootedTree) and self._key == other._key

    def __lt__(self, other):
        return self._key < other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"RootedTree({self.bracket()})"

    def bracket(self) -> str:
        """Bracket notation: ``.`` is a leaf, ``[t1 t2]`` a root with children."""
        if not self.children:
            return "."
        return "[" + " ".join(t.bracket() for t in self.children) + "]"

    @property
    def is_leaf(self) -> bool:
        return not self.children


LEAF = RootedTree()


def chain(n: int) -> RootedTree:
    """Tall tree: a path of ``n`` vertices hanging from the root."""
    t = LEAF
    for _ in range(n - 1):
        t = RootedTree([t])
    return t


def bushy(n: int) -> RootedTree:
    """Root with ``n - 1`` leaf children."""
    return RootedTree([LEAF] * (n - 1))


def density(t: RootedTree) -> int:
    """Tree factorial ``t! = |t| * prod(child densities)``."""
    return t.order * prod(density(u) for u in t.children)


def symmetry(t: RootedTree) -> int:
    """Order of the automorphism group of ``t``."""
    s = prod(symmetry(u) for u in t.children)
    for mult in Counter(t.children).values():
        s *= factorial(mult)
    return s


class TreeEntry(NamedTuple):
    tree: RootedTree
    density: int
    symmetry: int


@lru_cache(maxsize=None)
def _trees_of_order(n: int) -> tuple[RootedTree, ...]:
    if n == 1:
        return (LEAF,)
    out = {RootedTree(forest) for forest in _forests(n - 1, None)}
    return tuple(sorted(out))


def _forests(total: int, bound) -> Iterator[tuple[RootedTree, ...]]:
    # multisets of trees with orders summing to ``total``, generated in
    # non-increasing canonical order so each multiset appears once
    if total == 0:
        yield ()
        return
    for k in range(min(total, bound.order if bound is not None else total), 0, -1):
        for t in reversed(_trees_of_order(k)):
            if bound is not None and bound < t:
                continue
            for rest in _forests(total - k, t):
                yield (t,) + rest


def enumerate_trees(p: int) -> list[TreeEntry]:
    """All rooted trees with at most ``p`` vertices.

    Sorted by order, then by canonical comparison.

    Raises
    ------
    ValueError
        If ``p`` is outside ``1..MAX_ORDER``.
    """
    if not isinstance(p, int) or not 1 <= p <= MAX_ORDER:
        raise ValueError(f"tree order must be an integer in 1..{MAX_ORDER}, got {p!r}")
    return [
        TreeEntry(t, density(t), symmetry(t))
        for n in range(1, p + 1)
        for t in _trees_of_order(n)
    ]


def trees_of_order(n: int) -> list[RootedTree]:
    if not 1 <= n <= MAX_ORDER:
        raise ValueError(f"tree order must be in 1..{MAX_ORDER}, got {n!r}")
    return list(_trees_of_order(n))


def _matvec(A, v):
    return [sum((a * x for a, x in zip(row, v) if a), start=0 * v[0]) for row in A]


def elementary_weight(t: RootedTree, A, one=1) -> list:
    """Stage vector Phi(t) for the coefficient matrix ``A``.

    A leaf maps to the all-ones vector; an internal vertex to the
    componentwise product of ``A @ Phi(child)`` over its children. The
    root contraction (with b, d or interpolant weights) is left to the
    caller.

    ``A`` is a square nested sequence of Fractions or floats; ``one`` fixes
    the scalar type of the leaf vector.
    """
    cache: dict[RootedTree, list] = {}
    return _phi(t, A, one, cache)


def _phi(t, A, one, cache):
    hit = cache.get(t)
    if hit is not None:
        return hit
    s = len(A)
    v = [one] * s
    for u in t.children:
        w = _matvec(A, _phi(u, A, one, cache))
        v = [x * y for x, y in zip(v, w)]
    cache[t] = v
    return v


def elementary_weights(trees: Sequence[RootedTree], A, one=1) -> list[list]:
    """Phi for several trees, sharing subtree evaluations."""
    cache: dict[RootedTree, list] = {}
    return [_phi(t, A, one, cache) for t in trees]
