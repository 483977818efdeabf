from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from imunpack import (
    QuantizedMatrix,
    QuantParams,
    dequant_gemm,
    heavy_hitter_ratio,
    percentile_abs,
    percentile_vs_std,
    rtn_quantize,
)
from imunpack.quantize import round_half_away


def _round_oracle(x: float) -> int:
    # decimal ROUND_HALF_UP rounds ties away from zero
    return int(Decimal(x).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def test_percentile_examples():
    vals = np.arange(1, 21, dtype=float).reshape(4, 5)
    assert percentile_abs(vals, 95) == 19
    assert percentile_abs(vals, 100) == 20
    assert percentile_abs([[-7.5]], 30) == 7.5


def test_percentile_nearest_rank_uses_decimal_p():
    vals = np.arange(1, 1001, dtype=float)
    # 99.9% of 1000 is exactly 999 despite 99.9 not being a binary float
    assert percentile_abs(vals, 99.9) == 999


def test_percentile_errors():
    with pytest.raises(ValueError):
        percentile_abs(np.zeros((0, 3)), 95)
    with pytest.raises(ValueError):
        percentile_abs([[1.0]], 0)
    with pytest.raises(ValueError):
        percentile_abs([[1.0]], 100.5)


def test_percentile_matches_sort_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.standard_normal(int(rng.integers(1, 200)))
        p = float(rng.uniform(1, 100))
        mags = sorted(abs(v) for v in x)
        k = int(np.ceil(p / 100 * len(mags) - 1e-9))
        assert percentile_abs(x, p) == mags[max(k, 1) - 1]


def test_round_half_away():
    x = np.array([0.5, 1.5, 2.5, -0.5, -2.5, 0.49999999999999994, -1.2, 7.5])
    assert round_half_away(x).tolist() == [1, 2, 3, -1, -3, 0, -1, 8]
    for v in x:
        assert round_half_away(np.float64(v)) == _round_oracle(float(v))


def test_rtn_examples():
    Aq = rtn_quantize([[0.0, 1.0, -2.0, 4.0]], p=95, beta=15)
    assert Aq.params.alpha == 4.0
    assert Aq.params.scale == 1.875
    assert Aq.q.tolist() == [[0, 2, -4, 8]]
    assert Aq.q.ravel().tolist() == [_round_oracle(v * 1.875) for v in (0.0, 1.0, -2.0, 4.0)]
    assert rtn_quantize([[1.0]], p=100, beta=15).q.tolist() == [[8]]


def test_rtn_overflow():
    with pytest.raises(OverflowError):
        rtn_quantize([[1.0, 2.2250738585072014e-309]], p=50, beta=3)


def test_rtn_degenerate():
    Aq = rtn_quantize(np.zeros((2, 3)), p=95, beta=15)
    assert Aq.degenerate and Aq.params.alpha == 0
    assert not Aq.q.any()
    assert Aq.params.scale == 1.0


def test_rtn_keeps_outliers_unless_clipped():
    A = np.concatenate([np.linspace(-1, 1, 99), [100.0]]).reshape(1, -1)
    Aq = rtn_quantize(A, p=95, beta=15)
    assert Aq.q.max() > 100
    Ac = rtn_quantize(A, p=95, beta=15, clip=True)
    assert Ac.q.max() == Ac.params.level_bound == 8


def test_quant_params_validation():
    with pytest.raises(ValueError):
        QuantParams(95, 16, 1.0)
    with pytest.raises(ValueError):
        QuantParams(95, 1, 1.0)
    with pytest.raises(ValueError):
        QuantParams(0, 15, 1.0)
    with pytest.raises(ValueError):
        QuantParams(95, 15, -1.0)


def test_dequant_gemm_examples():
    I2 = np.eye(2, dtype=np.int64)
    qa = QuantizedMatrix(I2, QuantParams(95, 15, 7.5))
    assert dequant_gemm(qa, qa).tolist() == [[1.0, 0.0], [0.0, 1.0]]
    a = QuantizedMatrix(np.array([[2]]), QuantParams(95, 15, 7.5))
    b = QuantizedMatrix(np.array([[3]]), QuantParams(95, 15, 7.5))
    assert dequant_gemm(a, b).tolist() == [[6.0]]
    a = QuantizedMatrix(np.array([[2]]), QuantParams(95, 15, 1.0))
    b = QuantizedMatrix(np.array([[3]]), QuantParams(95, 15, 2.0))
    assert dequant_gemm(a, b)[0, 0] == pytest.approx(6 * 2 / 56.25, rel=1e-15)


def test_dequant_gemm_errors():
    a = QuantizedMatrix(np.array([[2]]), QuantParams(95, 15, 1.0))
    b = QuantizedMatrix(np.array([[3]]), QuantParams(95, 31, 1.0))
    with pytest.raises(ValueError):
        dequant_gemm(a, b)
    c = QuantizedMatrix(np.array([[3, 1]]), QuantParams(95, 15, 1.0))
    with pytest.raises(ValueError):
        dequant_gemm(a, c)


def test_heavy_hitter_examples():
    assert heavy_hitter_ratio(np.full((3, 3), 3.0)) == 1.0
    assert heavy_hitter_ratio(np.arange(1, 101)) == pytest.approx(100 / 95)
    vals = np.concatenate([np.arange(1, 100), [10000]])
    assert heavy_hitter_ratio(vals) == pytest.approx(10000 / 95)
    with pytest.raises(ZeroDivisionError):
        heavy_hitter_ratio(np.zeros(10))


matrices = arrays(
    np.float64,
    st.tuples(st.integers(1, 12), st.integers(1, 12)),
    elements=st.one_of(st.just(0.0), st.floats(1e-6, 1e6), st.floats(-1e6, -1e-6)),
)


@settings(max_examples=200)
@given(A=matrices, p=st.sampled_from([50.0, 90.0, 95.0, 99.5, 100.0]), beta=st.sampled_from([3, 5, 15, 31, 255]))
def test_coverage_and_half_step(A, p, beta):
    Aq = rtn_quantize(A, p=p, beta=beta)
    pr = Aq.params
    if pr.degenerate:
        return
    inside = np.abs(Aq.q) <= pr.level_bound
    assert inside.mean() >= p / 100 - 1 / A.size
    assert_half_step(A, Aq)


def assert_half_step(A, Aq):
    """|a - q * alpha / (beta/2)| <= alpha / beta, exactly, for |a| <= alpha."""
    pr = Aq.params
    alpha = Fraction(pr.alpha)
    step = alpha / Fraction(pr.beta, 2)
    for a, q in zip(A.ravel().tolist(), Aq.q.ravel().tolist()):
        a = Fraction(a)
        if abs(a) <= alpha:
            assert abs(a - q * step) <= step / 2


def test_dequant_gemm_improves_with_beta():
    rng = np.random.default_rng(0)
    for _ in range(20):
        A = rng.standard_normal((8, 16))
        B = rng.standard_normal((6, 16))
        true = A @ B.T
        errs = [
            np.linalg.norm(dequant_gemm(rtn_quantize(A, 100, beta), rtn_quantize(B, 100, beta)) - true)
            for beta in (15, 255)
        ]
        assert errs[1] < errs[0]


def test_percentile_vs_std_rows():
    rng = np.random.default_rng(1)
    x = rng.standard_t(2, size=5000)
    rows = percentile_vs_std(x, removed=(0, 10, 100, 10**6))
    assert [r["removed"] for r in rows] == [0, 10, 100]
    assert rows[0]["percentile"] == percentile_abs(x, 95)
    assert rows[0]["std"] >= rows[1]["std"] >= rows[2]["std"]


def test_tie_at_alpha_is_exact():
    a = 1.9989561654821517e-87
    Aq = rtn_quantize([[a]], 50, 15)
    assert Aq.q.tolist() == [[8]]
    assert_half_step(np.array([[a]]), Aq)


def test_near_tie_resolved_exactly():
    rng = np.random.default_rng(5)
    for _ in range(200):
        A = rng.standard_normal((4, 4))
        beta = int(rng.choice([3, 5, 15, 31, 255]))
        Aq = rtn_quantize(A, 95, beta)
        alpha = Fraction(Aq.params.alpha)
        for a, q in zip(A.ravel().tolist(), Aq.q.ravel().tolist()):
            exact = Fraction(a) * beta / (2 * alpha)
            assert abs(exact - q) <= Fraction(1, 2)
            if abs(exact - q) == Fraction(1, 2):
                assert abs(q) > abs(exact)
