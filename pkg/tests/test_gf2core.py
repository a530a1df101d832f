import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from cnotsynth.gf2core import (
    BitMatrix, apply_cnot, block_diag, diag_ones, from_key, from_lists, from_rows,
    hamming_to_identity, identity, inverse, is_identity, is_invertible, make_rng, multiply,
    offdiag_ones, parse_text, rank, submatrix, to_key, to_text, transpose, zeros,
)

from conftest import invertible_matrices, matrices, ref_identity, ref_mul, ref_rank

SWAP2 = from_lists([[0, 1], [1, 0]])


def test_identity_examples():
    assert identity(2).to_lists() == [[1, 0], [0, 1]]
    assert identity(1).to_lists() == [[1]]
    assert (diag_ones(identity(8)), offdiag_ones(identity(8))) == (8, 0)


def test_identity_rejects_bad_dimension():
    with pytest.raises(ValueError):
        identity(0)
    with pytest.raises(ValueError):
        identity(65)


def test_apply_cnot_examples():
    assert apply_cnot(identity(2), 0, 1).to_lists() == [[1, 0], [1, 1]]
    assert apply_cnot(from_lists([[1, 1], [0, 1]]), 1, 0) == identity(2)


def test_apply_cnot_errors():
    with pytest.raises(ValueError):
        apply_cnot(identity(3), 1, 1)
    with pytest.raises(IndexError):
        apply_cnot(identity(3), 0, 3)


@given(matrices(min_n=2, max_n=8), st.data())
def test_apply_cnot_involution(m, data):
    c = data.draw(st.integers(0, m.n - 1))
    t = data.draw(st.integers(0, m.n - 1).filter(lambda x: x != c))
    assert apply_cnot(apply_cnot(m, c, t), c, t) == m


def test_invertibility_examples():
    assert is_invertible(identity(4))
    assert not is_invertible(zeros(4))
    assert not is_invertible(from_lists([[1, 1], [1, 1]]))


@settings(max_examples=200)
@given(matrices(max_n=8))
def test_rank_and_invertibility_match_oracles(m):
    lists = m.to_lists()
    assert rank(m) == ref_rank(lists)
    det = sympy.Matrix(lists).det()
    assert is_invertible(m) == (det % 2 == 1)


def test_counts_examples():
    assert (diag_ones(identity(8)), offdiag_ones(identity(8)), hamming_to_identity(identity(8))) == (8, 0, 0)
    one = apply_cnot(identity(3), 0, 1)
    assert (diag_ones(one), offdiag_ones(one), hamming_to_identity(one)) == (3, 1, 1)
    assert (diag_ones(SWAP2), offdiag_ones(SWAP2), hamming_to_identity(SWAP2)) == (0, 2, 4)


@given(matrices())
def test_counts_relation(m):
    assert hamming_to_identity(m) == (m.n - diag_ones(m)) + offdiag_ones(m)


@given(matrices())
def test_transpose_involution_and_entries(m):
    t = transpose(m)
    assert transpose(t) == m
    assert all(t[i, j] == m[j, i] for i in range(m.n) for j in range(m.n))


@settings(max_examples=200)
@given(matrices(min_n=3, max_n=3), matrices(min_n=3, max_n=3))
def test_multiply_matches_oracle(a, b):
    assert multiply(a, b).to_lists() == ref_mul(a.to_lists(), b.to_lists())


def test_multiply_example():
    u = from_lists([[1, 1], [0, 1]])
    assert multiply(u, u) == identity(2)


@given(invertible_matrices(max_n=10))
def test_inverse(m):
    assert multiply(m, inverse(m)).to_lists() == ref_identity(m.n)
    assert multiply(inverse(m), m) == identity(m.n)


def test_inverse_singular():
    with pytest.raises(ValueError):
        inverse(zeros(3))


def test_block_diag_and_submatrix():
    b = block_diag(identity(2), SWAP2)
    assert b.to_lists() == [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]
    assert submatrix(b, 2) == SWAP2


@given(matrices(max_n=8))
def test_key_roundtrip(m):
    assert from_key(to_key(m), m.n) == m


@given(matrices())
def test_text_roundtrip(m):
    assert parse_text(to_text(m)) == m


@pytest.mark.parametrize("text", ["", "x\n", "2\n01\n", "2\n012\n10\n", "2\n02\n10\n"])
def test_parse_text_rejects(text):
    with pytest.raises(ValueError):
        parse_text(text)


def test_constructor_validation():
    with pytest.raises(ValueError):
        BitMatrix(2, (1,))
    with pytest.raises(ValueError):
        BitMatrix(2, (4, 1))
    with pytest.raises(ValueError):
        from_lists([[1, 0], [1]])
    with pytest.raises(ValueError):
        from_lists([[2, 0], [0, 1]])
    assert from_rows([1, 2]) == identity(2)
    assert is_identity(identity(5)) and not is_identity(SWAP2)


def test_to_array():
    arr = SWAP2.to_array()
    assert arr.dtype == np.uint8 and arr.tolist() == [[0, 1], [1, 0]]


def test_rng_is_deterministic():
    assert make_rng(7).integers(0, 1 << 30, 5).tolist() == make_rng(7).integers(0, 1 << 30, 5).tolist()
