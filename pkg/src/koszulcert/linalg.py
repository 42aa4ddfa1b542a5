"""Exact linear algebra over the rationals.

Matrices are stored sparsely as one ``{col: Fraction}`` dict per row and are
never mutated after construction.  Rank and kernel computations clear
denominators row by row and run fraction-free integer elimination, dividing
every updated row by the gcd of its entries to keep coefficients small.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from math import gcd, lcm
from typing import Iterable, Iterator, Sequence

Rat = Fraction


def as_rat(x) -> Fraction:
    """Coerce ints, Fractions and ``"p/q"`` strings to a Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise TypeError("floating point input is not allowed")
    return Fraction(x)


def rat_to_str(x: Fraction) -> str:
    x = as_rat(x)
    return f"{x.numerator}/{x.denominator}"


class RatMatrix:
    """Immutable sparse matrix with Fraction entries."""

    __slots__ = ("nrows", "ncols", "_rows")

    def __init__(self, nrows: int, ncols: int, rows: Sequence[dict] | None = None):
        if nrows < 0 or ncols < 0:
            raise ValueError("matrix dimensions must be nonnegative")
        self.nrows = nrows
        self.ncols = ncols
        if rows is None:
            self._rows = tuple({} for _ in range(nrows))
            return
        if len(rows) != nrows:
            raise ValueError(f"expected {nrows} rows, got {len(rows)}")
        clean = []
        for row in rows:
            r = {}
            for c, v in row.items():
                if not 0 <= c < ncols:
                    raise IndexError(f"column {c} out of range for {ncols} columns")
                v = as_rat(v)
                if v:
                    r[c] = v
            clean.append(r)
        self._rows = tuple(clean)

    # construction helpers

    @classmethod
    def from_dense(cls, data: Sequence[Sequence], ncols: int | None = None) -> "RatMatrix":
        data = [list(row) for row in data]
        if ncols is None:
            ncols = len(data[0]) if data else 0
        for row in data:
            if len(row) != ncols:
                raise ValueError("ragged dense matrix")
        return cls(len(data), ncols, [{j: v for j, v in enumerate(row) if v} for row in data])

    @classmethod
    def from_entries(cls, nrows: int, ncols: int, entries: dict) -> "RatMatrix":
        rows = [dict() for _ in range(nrows)]
        for (i, j), v in entries.items():
            if v:
                rows[i][j] = rows[i].get(j, 0) + as_rat(v)
        return cls(nrows, ncols, rows)

    @classmethod
    def from_columns(cls, nrows: int, columns: Sequence[dict]) -> "RatMatrix":
        """Build from sparse columns given as ``{row: value}`` dicts."""
        rows = [dict() for _ in range(nrows)]
        for j, col in enumerate(columns):
            for i, v in col.items():
                if v:
                    rows[i][j] = v
        return cls(nrows, len(columns), rows)

    @classmethod
    def identity(cls, n: int) -> "RatMatrix":
        return cls(n, n, [{i: Fraction(1)} for i in range(n)])

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> "RatMatrix":
        return cls(nrows, ncols)

    @classmethod
    def diag(cls, values: Sequence) -> "RatMatrix":
        return cls(len(values), len(values), [{i: v} for i, v in enumerate(values)])

    # access

    def row(self, i: int) -> dict:
        return dict(self._rows[i])

    def __getitem__(self, key) -> Fraction:
        i, j = key
        if not (0 <= i < self.nrows and 0 <= j < self.ncols):
            raise IndexError(key)
        return self._rows[i].get(j, Fraction(0))

    def entries(self) -> Iterator[tuple[tuple[int, int], Fraction]]:
        for i, row in enumerate(self._rows):
            for j in sorted(row):
                yield (i, j), row[j]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    def nnz(self) -> int:
        return sum(len(r) for r in self._rows)

    def is_zero(self) -> bool:
        return all(not r for r in self._rows)

    def to_dense(self) -> list[list[Fraction]]:
        out = [[Fraction(0)] * self.ncols for _ in range(self.nrows)]
        for (i, j), v in self.entries():
            out[i][j] = v
        return out

    def transpose(self) -> "RatMatrix":
        rows = [dict() for _ in range(self.ncols)]
        for i, row in enumerate(self._rows):
            for j, v in row.items():
                rows[j][i] = v
        return RatMatrix(self.ncols, self.nrows, rows)

    def __matmul__(self, other: "RatMatrix") -> "RatMatrix":
        if self.ncols != other.nrows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        rows = []
        for row in self._rows:
            acc: dict = {}
            for k, a in row.items():
                for j, b in other._rows[k].items():
                    acc[j] = acc.get(j, 0) + a * b
            rows.append(acc)
        return RatMatrix(self.nrows, other.ncols, rows)

    def apply(self, vec: Sequence) -> list[Fraction]:
        if len(vec) != self.ncols:
            raise ValueError("vector length mismatch")
        return [sum((v * vec[j] for j, v in row.items()), Fraction(0)) for row in self._rows]

    def __eq__(self, other) -> bool:
        if not isinstance(other, RatMatrix):
            return NotImplemented
        return self.shape == other.shape and self._rows == other._rows

    def __hash__(self):
        return hash((self.shape, tuple(tuple(sorted(r.items())) for r in self._rows)))

    def __repr__(self) -> str:
        return f"RatMatrix({self.nrows}x{self.ncols}, nnz={self.nnz()})"


# --- fraction-free elimination -------------------------------------------


def _integer_row(row: dict) -> dict:
    """Scale a rational row to a primitive integer row with positive lead."""
    if not row:
        return {}
    den = lcm(*(v.denominator for v in row.values()))
    ints = {c: int(v * den) for c, v in row.items()}
    return _primitive(ints)


def _primitive(row: dict) -> dict:
    g = gcd(*row.values())
    lead = row[min(row)]
    if lead < 0:
        g = -g
    if g != 1:
        row = {c: v // g for c, v in row.items()}
    return row


def _combine(a: int, row: dict, b: int, piv: dict) -> dict:
    """Return the primitive part of ``a*row - b*piv``."""
    out = {c: a * v for c, v in row.items()} if a != 1 else dict(row)
    for c, v in piv.items():
        nv = out.get(c, 0) - b * v
        if nv:
            out[c] = nv
        else:
            out.pop(c, None)
    if out:
        out = _primitive(out)
    return out


def _reduce_against(row: dict, pivots: dict) -> dict:
    while row:
        lead = min(row)
        piv = pivots.get(lead)
        if piv is None:
            return row
        a, b = piv[lead], row[lead]
        g = gcd(a, b)
        row = _combine(a // g, row, b // g, piv)
    return row


def echelon(m: RatMatrix) -> dict[int, dict]:
    """Row echelon form as ``{pivot_col: primitive integer row}``.

    Rows are inserted in index order and each is reduced against the pivots
    found so far by its smallest column, so the result is deterministic.
    """
    pivots: dict[int, dict] = {}
    for row in m._rows:
        r = _reduce_against(_integer_row(row), pivots)
        if r:
            pivots[min(r)] = r
    return pivots


def rank(m: RatMatrix) -> int:
    """Exact rank over Q."""
    if m.nrows > m.ncols:
        # fewer, longer rows reduce faster
        m = m.transpose()
    return len(echelon(m))


def rref_pivots(m: RatMatrix) -> dict[int, dict]:
    """Reduced echelon form: each pivot row is zero in every other pivot column."""
    pivots = echelon(m)
    cols = sorted(pivots)
    for c in reversed(cols):
        piv = pivots[c]
        for c2 in cols:
            if c2 >= c:
                break
            r = pivots[c2]
            b = r.get(c)
            if b:
                a = piv[c]
                g = gcd(a, b)
                pivots[c2] = _combine(a // g, r, b // g, piv)
    return pivots


def kernel_basis(m: RatMatrix) -> list[list[Fraction]]:
    """Basis of the right kernel of ``m``.

    The vector attached to free column ``f`` has a 1 in position ``f`` and 0 in
    every other free position, so coordinates of a kernel element with respect
    to this basis are read off at the free columns (see :func:`free_columns`).
    """
    pivots = rref_pivots(m)
    basis = []
    for f in range(m.ncols):
        if f in pivots:
            continue
        v = [Fraction(0)] * m.ncols
        v[f] = Fraction(1)
        for c, row in pivots.items():
            x = row.get(f)
            if x:
                v[c] = Fraction(-x, row[c])
        basis.append(v)
    return basis


def kernel_with_free_columns(m: RatMatrix) -> tuple[list[list[Fraction]], list[int]]:
    pivots = rref_pivots(m)
    free = [f for f in range(m.ncols) if f not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * m.ncols
        v[f] = Fraction(1)
        for c, row in pivots.items():
            x = row.get(f)
            if x:
                v[c] = Fraction(-x, row[c])
        basis.append(v)
    return basis, free


def nullity(m: RatMatrix) -> int:
    return m.ncols - rank(m)


def is_in_span(vectors: Sequence[Sequence], v: Sequence) -> bool:
    """True iff ``v`` lies in the span of ``vectors``."""
    if not vectors:
        return not any(v)
    n = len(v)
    base = RatMatrix.from_dense(vectors, ncols=n)
    aug = RatMatrix.from_dense(list(vectors) + [list(v)], ncols=n)
    return rank(base) == rank(aug)


# --- exterior powers ------------------------------------------------------


class WedgeIndex:
    """Lexicographic enumeration of p-subsets of ``range(ambient_dim)``.

    The position of a tuple in :meth:`tuples` is its basis index in the
    p-th exterior power.
    """

    __slots__ = ("ambient_dim", "degree", "_tuples", "_index")

    def __init__(self, ambient_dim: int, degree: int):
        if ambient_dim < 0 or degree < 0:
            raise ValueError("negative wedge data")
        self.ambient_dim = ambient_dim
        self.degree = degree
        self._tuples = tuple(itertools.combinations(range(ambient_dim), degree))
        self._index = {t: i for i, t in enumerate(self._tuples)}

    def __len__(self) -> int:
        return len(self._tuples)

    def tuples(self) -> tuple[tuple[int, ...], ...]:
        return self._tuples

    def index(self, t: tuple[int, ...]) -> int:
        return self._index[t]

    def __iter__(self):
        return iter(self._tuples)


def _det(m: list[list[Fraction]]) -> Fraction:
    n = len(m)
    a = [list(r) for r in m]
    det = Fraction(1)
    for c in range(n):
        p = next((r for r in range(c, n) if a[r][c]), None)
        if p is None:
            return Fraction(0)
        if p != c:
            a[c], a[p] = a[p], a[c]
            det = -det
        det *= a[c][c]
        inv = 1 / a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] * inv
            if f:
                for k in range(c, n):
                    a[r][k] -= f * a[c][k]
    return det


def determinant(m: RatMatrix) -> Fraction:
    if m.nrows != m.ncols:
        raise ValueError("determinant of a non-square matrix")
    return _det(m.to_dense())


def wedge_map_matrix(base: RatMatrix, p: int) -> RatMatrix:
    """Matrix of the p-th exterior power of ``base`` in lexicographic wedge bases.

    Entry (I, J) is the minor of ``base`` on rows I and columns J.
    """
    if p < 0 or p > min(base.nrows, base.ncols):
        raise ValueError(f"wedge degree {p} out of range for a {base.nrows}x{base.ncols} matrix")
    if p == 1:
        return base
    dense = base.to_dense()
    rows_idx = WedgeIndex(base.nrows, p)
    cols_idx = WedgeIndex(base.ncols, p)
    entries = {}
    for i, I in enumerate(rows_idx):
        for j, J in enumerate(cols_idx):
            d = _det([[dense[a][b] for b in J] for a in I])
            if d:
                entries[(i, j)] = d
    return RatMatrix.from_entries(len(rows_idx), len(cols_idx), entries)


def iter_nonzero(vec: Iterable) -> Iterator[tuple[int, Fraction]]:
    for i, v in enumerate(vec):
        if v:
            yield i, v
