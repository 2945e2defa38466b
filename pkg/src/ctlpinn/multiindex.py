"""Graded-lexicographic multi-index enumeration and jet coefficient spaces.

This is the single place that fixes how jet coefficients are laid out.
Multi-indices alpha (one exponent per input variable) are enumerated by
total degree |alpha|, and within a degree by descending lexicographic
order of the exponent tuple, e.g. for two variables and order 2:

    (0,0), (1,0), (0,1), (2,0), (1,1), (0,2)

Every module that touches jet coefficients indexes through this table.
Coefficients are stored as plain partial derivatives (not divided by
alpha!); the Leibniz binomial factors live in the product tables.

A :class:`JetSpace` is either the full set of multi-indices up to an
order, or a downward-closed subset of it.  Because the coefficient of a
product or composition at gamma only involves coefficients at alpha <=
gamma, arithmetic restricted to a downward-closed subset stays exact for
every retained index; residual operators that need only a handful of
high-order derivatives use reduced spaces to cut the per-point cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement
from math import comb

import numpy as np

#: Highest derivative order any problem requests (plate residual).
MAX_ORDER = 4


def coeff_count(dim: int, order: int) -> int:
    """Number of multi-indices with |alpha| <= order in `dim` variables."""
    return comb(dim + order, order)


@lru_cache(maxsize=None)
def multi_indices(dim: int, order: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices with |alpha| <= order, in graded-lex order."""
    out = []
    for degree in range(order + 1):
        for axes in combinations_with_replacement(range(dim), degree):
            alpha = [0] * dim
            for a in axes:
                alpha[a] += 1
            out.append(tuple(alpha))
    return tuple(out)


@lru_cache(maxsize=None)
def _index_map(dim: int, order: int) -> dict[tuple[int, ...], int]:
    return {alpha: i for i, alpha in enumerate(multi_indices(dim, order))}


def index_of(dim: int, order: int, alpha: tuple[int, ...]) -> int:
    """Position of the multi-index `alpha` in the full enumeration."""
    try:
        return _index_map(dim, order)[tuple(alpha)]
    except KeyError:
        raise KeyError(f"multi-index {alpha} not stored at dim={dim}, order={order}")


def derivative_index(dim: int, order: int, *axes: int) -> int:
    """Index of the partial derivative taken once per listed axis."""
    alpha = [0] * dim
    for a in axes:
        alpha[a] += 1
    return index_of(dim, order, tuple(alpha))


def _downward_closure(dim: int, wanted) -> tuple[tuple[int, ...], ...]:
    """Smallest graded-lex-ordered, downward-closed set containing `wanted`."""
    todo = {tuple(a) for a in wanted}
    todo.add((0,) * dim)
    for j in range(dim):
        unit = tuple(1 if i == j else 0 for i in range(dim))
        todo.add(unit)
    closed: set[tuple[int, ...]] = set()
    while todo:
        alpha = todo.pop()
        if alpha in closed:
            continue
        closed.add(alpha)
        for j in range(dim):
            if alpha[j] > 0:
                down = tuple(a - (1 if i == j else 0) for i, a in enumerate(alpha))
                if down not in closed:
                    todo.add(down)
    order = max(sum(a) for a in closed)
    return tuple(a for a in multi_indices(dim, order) if a in closed)


def _segment_table(rows, key: int, count: int):
    """Sort product rows by rows[key] and build reduceat segment starts."""
    rows = sorted(rows, key=lambda r: r[key])
    arr = np.array(rows, dtype=np.float64)
    idx = arr[:, :3].astype(np.intp)
    factor = arr[:, 3]
    sort_col = idx[:, key]
    starts = np.searchsorted(sort_col, np.arange(count))
    for a in (idx, factor, starts):
        a.setflags(write=False)
    return idx[:, 0], idx[:, 1], idx[:, 2], factor, starts


@dataclass(frozen=True)
class JetSpace:
    """A fixed set of retained multi-indices plus its product tables."""

    dim: int
    order: int
    alphas: tuple[tuple[int, ...], ...]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @staticmethod
    @lru_cache(maxsize=None)
    def full(dim: int, order: int) -> "JetSpace":
        return JetSpace(dim, order, multi_indices(dim, order))

    @staticmethod
    def reduced(dim: int, wanted: tuple[tuple[int, ...], ...]) -> "JetSpace":
        """Space retaining the downward closure of the wanted derivatives."""
        alphas = _downward_closure(dim, wanted)
        order = max(sum(a) for a in alphas)
        full = multi_indices(dim, order)
        if len(alphas) == len(full):
            return JetSpace.full(dim, order)
        return JetSpace(dim, order, alphas)

    @property
    def size(self) -> int:
        return len(self.alphas)

    def index_of(self, alpha) -> int:
        key = tuple(alpha)
        lookup = self._cache.get("lookup")
        if lookup is None:
            lookup = {a: i for i, a in enumerate(self.alphas)}
            self._cache["lookup"] = lookup
        try:
            return lookup[key]
        except KeyError:
            raise KeyError(f"multi-index {key} not retained in this jet space")

    def derivative_index(self, *axes: int) -> int:
        alpha = [0] * self.dim
        for a in axes:
            alpha[a] += 1
        return self.index_of(tuple(alpha))

    def tables(self):
        """Product tables: forward (by output), backward (by each factor).

        Each entry is (i_out, i_a, i_b, factor, segment_starts) with rows
        sorted by the table's own reduction target, ready for
        ``np.add.reduceat`` along the last axis.
        """
        tabs = self._cache.get("tables")
        if tabs is None:
            lookup = {a: i for i, a in enumerate(self.alphas)}
            rows = []
            for ia, alpha in enumerate(self.alphas):
                for ib, beta in enumerate(self.alphas):
                    gamma = tuple(a + b for a, b in zip(alpha, beta))
                    iout = lookup.get(gamma)
                    if iout is None:
                        continue
                    f = 1.0
                    for g, a in zip(gamma, alpha):
                        f *= comb(g, a)
                    rows.append((iout, ia, ib, f))
            tabs = tuple(_segment_table(rows, key, self.size) for key in (0, 1, 2))
            self._cache["tables"] = tabs
        return tabs

    def seed(self, points: np.ndarray) -> np.ndarray:
        """Seed jets for a batch of points: shape (N, dim, size)."""
        points = np.asarray(points, dtype=np.float64)
        n, dim = points.shape
        if dim != self.dim:
            raise ValueError(f"points have {dim} coordinates, space has {self.dim}")
        out = np.zeros((n, dim, self.size), dtype=np.float64)
        out[:, :, 0] = points
        if self.order >= 1:
            for j in range(dim):
                out[:, j, self.derivative_index(j)] = 1.0
        return out
