from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from koszulcert.linalg import (
    RatMatrix,
    WedgeIndex,
    determinant,
    kernel_basis,
    rank,
    wedge_map_matrix,
)
from oracles import dense_rank, p1_sym2_matrix

small_rats = st.fractions(min_value=-5, max_value=5, max_denominator=4)


@st.composite
def matrices(draw, max_dim=30):
    m = draw(st.integers(0, max_dim))
    n = draw(st.integers(0, max_dim))
    density = draw(st.sampled_from([0.1, 0.3, 1.0]))
    entries = {}
    for i in range(m):
        for j in range(n):
            if draw(st.floats(0, 1)) < density:
                entries[(i, j)] = draw(small_rats)
    return RatMatrix.from_entries(m, n, entries)


@st.composite
def low_rank_matrices(draw):
    """Products of thin factors, so rank deficiency is common."""
    m, n, k = draw(st.integers(1, 12)), draw(st.integers(1, 12)), draw(st.integers(0, 5))
    a = RatMatrix.from_dense([[draw(small_rats) for _ in range(k)] for _ in range(m)], ncols=k)
    b = RatMatrix.from_dense([[draw(small_rats) for _ in range(n)] for _ in range(k)], ncols=n)
    return a @ b


def test_rank_identity():
    assert rank(RatMatrix.identity(2)) == 2


def test_rank_all_ones():
    assert rank(RatMatrix.from_dense([[1] * 3] * 3)) == 1


def test_rank_p1_sym2_quartic():
    dense = p1_sym2_matrix(4)
    m = RatMatrix.from_dense(dense)
    assert m.shape == (9, 15)
    assert dense_rank(dense) == 9
    assert rank(m) == 9


def test_kernel_identity_is_empty():
    assert kernel_basis(RatMatrix.identity(4)) == []


def test_kernel_of_difference():
    (v,) = kernel_basis(RatMatrix.from_dense([[1, -1]]))
    assert v[0] == v[1] != 0


def test_zero_size_matrices():
    assert rank(RatMatrix.zeros(0, 5)) == 0
    assert len(kernel_basis(RatMatrix.zeros(0, 5))) == 5
    assert rank(RatMatrix.zeros(3, 0)) == 0


def test_entries_never_store_zero():
    m = RatMatrix.from_dense([[0, 1], [Fraction(0), 0]])
    assert m.nnz() == 1


def test_floats_rejected():
    with pytest.raises(TypeError):
        RatMatrix.from_dense([[0.5]])


@settings(max_examples=60, deadline=None)
@given(matrices())
def test_rank_matches_dense_oracle(m):
    assert rank(m) == dense_rank(m.to_dense())


@settings(max_examples=60, deadline=None)
@given(low_rank_matrices())
def test_rank_matches_dense_oracle_low_rank(m):
    assert rank(m) == dense_rank(m.to_dense())


@settings(max_examples=60, deadline=None)
@given(matrices(max_dim=15))
def test_rank_of_transpose(m):
    assert rank(m) == rank(m.transpose())


@settings(max_examples=60, deadline=None)
@given(low_rank_matrices())
def test_kernel_vectors_are_killed(m):
    basis = kernel_basis(m)
    assert rank(m) + len(basis) == m.ncols
    for v in basis:
        assert not any(m.apply(v))
    if basis:
        assert rank(RatMatrix.from_dense(basis)) == len(basis)


def test_rank_against_sympy():
    sympy = pytest.importorskip("sympy")
    rows = [[(i * j + 3 * i - j) % 7 - 3 for j in range(9)] for i in range(8)]
    rows[5] = [a + b for a, b in zip(rows[1], rows[2])]
    assert rank(RatMatrix.from_dense(rows)) == sympy.Matrix(rows).rank()


def test_wedge_index_lexicographic():
    w = WedgeIndex(4, 2)
    assert w.tuples() == ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
    assert w.index((1, 3)) == 4
    assert len(WedgeIndex(3, 0)) == 1
    assert len(WedgeIndex(3, 4)) == 0


def test_wedge_degree_one_is_identity_map():
    base = RatMatrix.from_dense([[1, 2], [3, 4], [5, 6]])
    assert wedge_map_matrix(base, 1) == base


def test_wedge_of_identity():
    assert wedge_map_matrix(RatMatrix.identity(2), 2) == RatMatrix.identity(1)


def test_wedge_of_diagonal_is_determinant():
    assert wedge_map_matrix(RatMatrix.diag([2, 3]), 2).to_dense() == [[6]]


def test_wedge_out_of_range():
    with pytest.raises(ValueError):
        wedge_map_matrix(RatMatrix.identity(2), 3)
    with pytest.raises(ValueError):
        wedge_map_matrix(RatMatrix.identity(2), -1)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: st.lists(st.lists(small_rats, min_size=n, max_size=n), min_size=n, max_size=n)))
def test_top_wedge_is_determinant(rows):
    m = RatMatrix.from_dense(rows)
    top = wedge_map_matrix(m, m.nrows)
    assert top[0, 0] == determinant(m)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.data())
def test_wedge_is_functorial(n, data):
    p = data.draw(st.integers(1, n))
    a = RatMatrix.from_dense([[data.draw(small_rats) for _ in range(n)] for _ in range(n)])
    b = RatMatrix.from_dense([[data.draw(small_rats) for _ in range(n)] for _ in range(n)])
    assert wedge_map_matrix(a @ b, p) == wedge_map_matrix(a, p) @ wedge_map_matrix(b, p)
