import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imunpack import BitBound, digit_decompose, exact_gemm, ob_count
from imunpack.errors import AccumulatorOverflowError, ShapeError
from imunpack.intmat import as_intmatrix, trunc_divmod

from .conftest import log_uniform_ints, naive_gemm


def test_bitbound():
    bb = BitBound(4)
    assert bb.s == 8 and bb.shift == 3
    assert bb.is_in_bound(7) and bb.is_in_bound(-7)
    assert not bb.is_in_bound(8) and not bb.is_in_bound(-8)
    with pytest.raises(ValueError):
        BitBound(1)


@pytest.mark.parametrize(
    "v, b, digits",
    [(0, 3, (0,)), (137, 4, (1, 1, 2)), (-5, 3, (-1, -1))],
)
def test_digit_decompose_examples(v, b, digits):
    dv = digit_decompose(v, b)
    assert dv.digits == digits
    assert dv.value() == v


def test_digit_decompose_rejects_b1():
    with pytest.raises(ValueError):
        digit_decompose(5, 1)


@pytest.mark.parametrize("v", [7, -7, 9, -9, 100, -100, 2**40 - 1, -(2**40)])
def test_trunc_divmod_identity(v):
    q, r = trunc_divmod(v, 8)
    assert v == 8 * q + r
    assert abs(r) < 8
    assert r == 0 or (r > 0) == (v > 0)


@settings(max_examples=500)
@given(v=st.integers(-(2**40), 2**40), b=st.integers(2, 9))
def test_digit_decompose_properties(v, b):
    s = 1 << (b - 1)
    digits = digit_decompose(v, b).digits
    assert sum(d * s**i for i, d in enumerate(digits)) == v
    assert all(-s < d < s for d in digits)
    assert len(digits) <= -(-41 // (b - 1)) + 1
    if v != 0:
        assert digits[-1] != 0
        assert all(d == 0 or (d > 0) == (v > 0) for d in digits)


def test_exact_gemm_examples():
    I2 = np.eye(2, dtype=np.int64)
    assert exact_gemm(I2, I2).tolist() == [[1, 0], [0, 1]]
    assert exact_gemm([[3]], [[4]]).tolist() == [[12]]
    assert exact_gemm([[1, 2], [3, 4]], [[5, 6], [7, 8]]).tolist() == [[17, 23], [39, 53]]


def test_exact_gemm_matches_naive(backend):
    rng = np.random.default_rng(1)
    for _ in range(200):
        n, d, h = rng.integers(1, 17, size=3)
        A = rng.integers(-(2**15), 2**15, size=(n, d), endpoint=True)
        B = rng.integers(-(2**15), 2**15, size=(h, d), endpoint=True)
        assert exact_gemm(A, B).tolist() == naive_gemm(A, B)


def test_exact_gemm_order_independent():
    rng = np.random.default_rng(2)
    A = log_uniform_ints(rng, (9, 13), 1 << 20)
    B = log_uniform_ints(rng, (7, 13), 1 << 20)
    perm = rng.permutation(13)
    assert np.array_equal(exact_gemm(A, B), exact_gemm(A[:, perm], B[:, perm]))


def test_exact_gemm_errors():
    with pytest.raises(ShapeError):
        exact_gemm(np.zeros((2, 3), int), np.zeros((2, 4), int))
    big = np.full((1, 4), 2**31, dtype=np.int64)
    with pytest.raises(AccumulatorOverflowError):
        exact_gemm(big, big)


def test_as_intmatrix_validation():
    assert as_intmatrix([[1.0, 2.0]]).dtype == np.int64
    with pytest.raises(ValueError):
        as_intmatrix([[1.5]])
    with pytest.raises(OverflowError):
        as_intmatrix(np.array([[np.iinfo(np.int64).min]]))
    with pytest.raises(ShapeError):
        as_intmatrix([1, 2, 3])


def test_ob_count_examples():
    assert ob_count(np.zeros((3, 4), int), 5, "rows").tolist() == [0, 0, 0]
    A = [[1, 9], [9, 9]]
    assert ob_count(A, 3, "rows").tolist() == [1, 2]
    assert ob_count(A, 3, "cols").tolist() == [1, 2]
    # boundary: |v| == s is OB
    assert ob_count([[4, -4, 3, -3]], 3).tolist() == [2]
