"""Koszul differentials, Koszul cohomology dimensions and Betti tables.

For a line bundle L with section space V = H^0(L) and a coefficient bundle B,
the differential

    d_{p,q}: wedge^p V (x) H^0(B L^q) -> wedge^(p-1) V (x) H^0(B L^(q+1))
    v_1 ^ ... ^ v_p (x) s  |->  sum_i (-1)^i v_1 ^ ..^ v_i-hat ^ .. ^ v_p (x) v_i s

is assembled in lexicographic wedge bases (positions i counted from 1).
Column ``I, j`` of the matrix has index ``wedge_index(I) * dim W + j``.

Dimensions computed on a nodal model upper-bound the values for a general
smooth pair, by semicontinuity of rank.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

from .curves import (
    LineBundleData,
    SectionBasis,
    dualizing_bundle,
    h0_basis,
    model_hash,
    multiply,
    trivial_bundle,
)
from .errors import PreconditionError
from .linalg import RatMatrix, WedgeIndex, rank

Q_MAX = 3


def _twisted(L: LineBundleData, q: int, twist: LineBundleData | None) -> LineBundleData:
    B = L.power(q)
    return B if twist is None else twist.tensor(B)


@lru_cache(maxsize=4096)
def multiplication_table(V: SectionBasis, W: SectionBasis, T: SectionBasis) -> tuple[tuple[dict, ...], ...]:
    """``table[i][j]`` = coordinates of ``V[i] * W[j]`` in the basis ``T`` (sparse)."""
    if V.bundle.tensor(W.bundle) != T.bundle:
        raise AssertionError("target basis is not on the product bundle")
    out = []
    for v in V.vectors:
        row = []
        for w in W.vectors:
            prod = multiply(v, V.bundle, w, W.bundle)
            coords = T.coordinates(prod)
            row.append({t: c for t, c in enumerate(coords) if c})
        out.append(tuple(row))
    return tuple(out)


def koszul_map(V: SectionBasis, p: int, W: SectionBasis, T: SectionBasis) -> RatMatrix:
    """Matrix of wedge^p V (x) W -> wedge^(p-1) V (x) T."""
    n = V.dim
    dom = WedgeIndex(n, p) if p >= 0 else ()
    ncols = len(dom) * W.dim
    if p <= 0 or not ncols:
        nrows = len(WedgeIndex(n, p - 1)) * T.dim if p >= 1 else 0
        return RatMatrix.zeros(nrows, ncols)
    cod = WedgeIndex(n, p - 1)
    table = multiplication_table(V, W, T)
    wdim, tdim = W.dim, T.dim
    columns = []
    for I in dom:
        faces = []
        for pos, i in enumerate(I):
            sign = -1 if pos % 2 == 0 else 1  # (-1)^(pos+1)
            faces.append((sign, i, cod.index(I[:pos] + I[pos + 1:]) * tdim))
        for j in range(wdim):
            col: dict = {}
            for sign, i, base in faces:
                for t, c in table[i][j].items():
                    col[base + t] = col.get(base + t, 0) + sign * c
            columns.append(col)
    return RatMatrix.from_columns(len(cod) * tdim, columns)


def koszul_differential(p: int, q: int, L: LineBundleData, twist: LineBundleData | None = None) -> RatMatrix:
    """d_{p,q} for L with coefficients in ``twist`` (trivial when None)."""
    V = h0_basis(L)
    if p < 0 or p > V.dim:
        raise ValueError(f"p = {p} outside [0, {V.dim}]")
    return koszul_map(V, p, h0_basis(_twisted(L, q, twist)), h0_basis(_twisted(L, q + 1, twist)))


@lru_cache(maxsize=8192)
def _rank_d(p: int, q: int, L: LineBundleData, twist: LineBundleData | None) -> int:
    V = h0_basis(L)
    if p <= 0 or p > V.dim:
        return 0
    W = h0_basis(_twisted(L, q, twist))
    if not W.dim:
        return 0
    return rank(koszul_differential(p, q, L, twist))


@dataclass(frozen=True)
class KoszulCell:
    p: int
    q: int
    k: int
    rank_in: int
    rank_out: int
    dim: int
    twisted: bool = False

    def to_json(self) -> dict:
        return {"p": self.p, "q": self.q, "k": self.k, "rank_in": self.rank_in, "rank_out": self.rank_out}


def koszul_cell(L: LineBundleData, p: int, q: int, twist: LineBundleData | None = None) -> KoszulCell:
    """K_{p,q}(L; twist) as dim(middle) - rank(in) - rank(out)."""
    n = h0_basis(L).dim
    dim = comb(n, p) * h0_basis(_twisted(L, q, twist)).dim if p >= 0 else 0
    rin = _rank_d(p + 1, q - 1, L, twist)
    rout = _rank_d(p, q, L, twist)
    k = dim - rin - rout
    if k < 0:
        raise AssertionError(f"negative Koszul dimension at ({p},{q})")
    return KoszulCell(p, q, k, rin, rout, dim, twist is not None)


def kpq(L: LineBundleData, p: int, q: int, twist: LineBundleData | None = None) -> int:
    return koszul_cell(L, p, q, twist).k


# --- base points -----------------------------------------------------------------


def _poly_trim(f: list) -> list:
    while f and not f[-1]:
        f.pop()
    return f


def _poly_gcd(f: list, g: list) -> list:
    """gcd of polynomials given low-degree-first; returns a monic polynomial."""
    f, g = _poly_trim(list(f)), _poly_trim(list(g))
    while g:
        r = list(f)
        while len(r) >= len(g) and r:
            c = r[-1] / g[-1]
            shift = len(r) - len(g)
            for i, x in enumerate(g):
                r[i + shift] -= c * x
            _poly_trim(r)
        f, g = g, r
    if not f:
        return []
    return [x / f[-1] for x in f]


def base_points_on(L: LineBundleData, component: int) -> bool:
    """True when every section of L vanishes somewhere on ``component``."""
    V = h0_basis(L)
    d = L.degrees[component]
    if d < 0:
        return True
    forms = [V.forms(i)[component] for i in range(V.dim)]
    forms = [f for f in forms if any(f)]
    if not forms:
        return True
    if all(not f[0] for f in forms):
        return True  # common zero at (1:0)
    # f(x, 1) low-degree-first is the reversed coefficient list
    g = list(reversed(forms[0]))
    for f in forms[1:]:
        g = _poly_gcd(g, list(reversed(f)))
        if len(_poly_trim(list(g))) <= 1:
            return False
    return len(_poly_trim(list(g))) > 1


def is_base_point_free(L: LineBundleData) -> bool:
    return not any(base_points_on(L, i) for i in range(L.curve.n_components))


def require_base_point_free(L: LineBundleData) -> None:
    if not is_base_point_free(L):
        raise PreconditionError("bundle not base point free")


# --- Betti tables --------------------------------------------------------------------


@dataclass
class BettiTable:
    r: int
    g: int
    d: int
    cells: dict = field(default_factory=dict)
    curve_hash: str = ""
    seed: int = 0

    def k(self, p: int, q: int) -> int:
        return self.cells[(p, q)].k

    def to_json(self) -> dict:
        return {
            "r": self.r,
            "g": self.g,
            "d": self.d,
            "cells": [self.cells[key].to_json() for key in sorted(self.cells, key=lambda t: (t[1], t[0]))],
            "curve_hash": self.curve_hash,
            "seed": self.seed,
        }

    def rows(self) -> list[list[int]]:
        """k_{p,q} as rows q = 0..3, columns p = 0..r."""
        return [[self.k(p, q) for p in range(self.r + 1)] for q in range(Q_MAX + 1)]

    def pretty(self) -> str:
        width = max(len(str(c.k)) for c in self.cells.values())
        lines = []
        for q in range(Q_MAX, -1, -1):
            lines.append(f"q={q}: " + " ".join(str(self.k(p, q)).rjust(width) for p in range(self.r + 1)))
        return "\n".join(lines)


def betti_table(L: LineBundleData, q_max: int = Q_MAX) -> BettiTable:
    require_base_point_free(L)
    r = h0_basis(L).dim - 1
    table = BettiTable(r=r, g=L.curve.genus, d=L.degree, curve_hash=model_hash(L), seed=L.curve.seed)
    for q in range(q_max + 1):
        for p in range(r + 1):
            table.cells[(p, q)] = koszul_cell(L, p, q)
    return table


def chi_expected(g: int, r: int, d: int, p: int) -> int:
    """Euler characteristic of the (p,1) strand for a nonspecial-squared g^r_d."""
    if not 1 <= p <= r:
        raise ValueError("need 1 <= p <= r")
    return comb(r + 1, p) * (g - d + r) - comb(r + 1, p + 1) * g + comb(r - 1, p) * d + comb(r, p + 1) * (g - 1)


@dataclass(frozen=True)
class StrandCheck:
    p: int
    difference: int  # k_{p,1} - k_{p-1,2}
    expected: int | None  # chi_expected, when the strand has the standard shape
    euler_k: int
    euler_dims: int
    standard_shape: bool

    @property
    def ok(self) -> bool:
        if self.euler_k != self.euler_dims:
            return False
        return not self.standard_shape or self.difference == self.expected


def strand_check(L: LineBundleData, p: int) -> StrandCheck:
    """Compare k_{p,1} - k_{p-1,2} with the strand's Euler characteristic.

    The strand is wedge^(p+1-j) V (x) H^0(L^j), j = 0..p+1.  When every spot
    other than (p,1) and (p-1,2) has zero cohomology and L^j is nonspecial for
    j >= 2, the difference must equal :func:`chi_expected`; otherwise only the
    full alternating sum is compared with the dimension count.
    """
    g, d = L.curve.genus, L.degree
    n = h0_basis(L).dim
    r = n - 1
    ks, dims = [], []
    for j in range(p + 2):
        cell = koszul_cell(L, p + 1 - j, j)
        ks.append(cell.k)
        dims.append(cell.dim)
    sign = [(-1) ** (j + 1) for j in range(p + 2)]
    euler_k = sum(s * k for s, k in zip(sign, ks))
    euler_dims = sum(s * x for s, x in zip(sign, dims))
    shape = (
        1 <= p <= r
        and h0_basis(trivial_bundle(L.curve)).dim == 1
        and all(h0_basis(L.power(j)).dim == j * d - g + 1 for j in range(2, p + 2))
        and all(ks[j] == 0 for j in range(p + 2) if j not in (1, 2))
    )
    expected = chi_expected(g, r, d, p) if 1 <= p <= r else None
    diff = ks[1] - (ks[2] if p >= 1 else 0)
    return StrandCheck(p, diff, expected if shape else None, euler_k, euler_dims, shape)


# --- kernel bundles and twisted groups ------------------------------------------------


def kernel_bundle_h0(A: LineBundleData, k: int, B) -> int:
    """h^0(wedge^k M_A (x) B) as the kernel dimension of

        wedge^k H^0(A) (x) W -> wedge^(k-1) H^0(A) (x) H^0(A (x) B),

    where W is H^0(B), or the given subspace when ``B`` is a SectionBasis.
    """
    V = h0_basis(A)
    W = B if isinstance(B, SectionBasis) else h0_basis(B)
    if W.bundle.curve != A.curve:
        raise ValueError("coefficient space on another curve")
    T = h0_basis(A.tensor(W.bundle))
    if k < 0 or k > V.dim:
        return 0
    dom = comb(V.dim, k) * W.dim
    if k == 0 or not dom:
        return dom
    return dom - rank(koszul_map(V, k, W, T))


def twisted_cell(L: LineBundleData, p: int, q: int = 0, omega: LineBundleData | None = None) -> KoszulCell:
    """K_{p,q}(X, L; omega_X)."""
    if omega is None:
        omega = dualizing_bundle(L.curve)
    return koszul_cell(L, p, q, omega)


def twisted_k00(L: LineBundleData, p: int) -> int:
    """dim K_{r-p,0}(X, L; omega_X): kernel of d_0 modulo the image of d_{-1}."""
    r = h0_basis(L).dim - 1
    if not 0 <= r - p <= r + 1:
        raise ValueError("p out of range")
    return twisted_cell(L, r - p, 0).k


def mult_sym2_matrix(V: SectionBasis) -> tuple[RatMatrix, list[tuple[int, int]]]:
    """Matrix of Sym^2 H^0(L) -> H^0(L^2) on the monomials v_i v_j, i <= j."""
    L = V.bundle
    T = h0_basis(L.power(2))
    pairs = [(i, j) for i in range(V.dim) for j in range(i, V.dim)]
    cols = []
    for i, j in pairs:
        prod = multiply(V.vectors[i], L, V.vectors[j], L)
        coords = T.coordinates(prod)
        cols.append({t: c for t, c in enumerate(coords) if c})
    return RatMatrix.from_columns(T.dim, cols), pairs


def matrix_dims(m: RatMatrix) -> list[int]:
    return [m.nrows, m.ncols]


def sym2_dim(n: int) -> int:
    return n * (n + 1) // 2


__all__ = [
    "BettiTable",
    "KoszulCell",
    "StrandCheck",
    "betti_table",
    "chi_expected",
    "is_base_point_free",
    "kernel_bundle_h0",
    "koszul_cell",
    "koszul_differential",
    "koszul_map",
    "kpq",
    "mult_sym2_matrix",
    "strand_check",
    "twisted_cell",
    "twisted_k00",
]

