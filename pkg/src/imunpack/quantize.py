"""Percentile-scaled round-to-nearest quantization and range statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ShapeError
from .intmat import as_intmatrix, exact_gemm


def as_floatmatrix(x, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has NaN or infinite entries")
    return np.ascontiguousarray(arr)


def _check_p(p: float) -> None:
    if not 0 < p <= 100:
        raise ValueError(f"percentile must lie in (0, 100], got {p}")


def percentile_abs(A, p: float = 95.0) -> float:
    """Nearest-rank ``p``-th percentile of ``|A|``.

    The k-th smallest magnitude with ``k = ceil(p/100 * N)``; no
    interpolation, so the result is always one of the entries.
    """
    _check_p(p)
    mags = np.abs(np.asarray(A, dtype=np.float64)).ravel()
    if mags.size == 0:
        raise ValueError("percentile of an empty matrix")
    # decimal reading of p so that e.g. 99.9 is not perturbed by binary rounding
    k = max(1, math.ceil(Fraction(repr(float(p))) * mags.size / 100))
    return float(np.partition(mags, k - 1)[k - 1])


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round to nearest, ties away from zero.

    ``x - trunc(x)`` is exact in binary floating point, which avoids the
    ``floor(x + 0.5)`` misrounding of 0.49999999999999994.
    """
    t = np.trunc(x)
    return t + np.sign(x) * (np.abs(x - t) >= 0.5)


@dataclass(frozen=True)
class QuantParams:
    p: float
    beta: int
    alpha: float

    def __post_init__(self):
        _check_p(self.p)
        if int(self.beta) != self.beta or self.beta < 3 or self.beta % 2 == 0:
            raise ValueError(f"beta must be an odd integer >= 3, got {self.beta!r}")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha!r}")

    @property
    def degenerate(self) -> bool:
        return self.alpha == 0

    @property
    def scale(self) -> float:
        """Multiplier from float to integer domain (1 when degenerate)."""
        return 1.0 if self.degenerate else 0.5 * self.beta / self.alpha

    @property
    def step(self) -> float:
        """Float value of one integer level."""
        return 1.0 if self.degenerate else self.alpha / (0.5 * self.beta)

    @property
    def level_bound(self) -> int:
        """Largest |q| an entry within the percentile can map to."""
        return int(round_half_away(np.float64(0.5 * self.beta)))


@dataclass(frozen=True)
class QuantizedMatrix:
    q: np.ndarray
    params: QuantParams

    @property
    def degenerate(self) -> bool:
        return self.params.degenerate

    def dequantize(self) -> np.ndarray:
        return self.q * self.params.step


def rtn_quantize(A, p: float = 95.0, beta: int = 31, clip: bool = False) -> QuantizedMatrix:
    """``q = round(0.5 * beta / alpha_p(A) * A)`` with ties away from zero.

    Entries above the percentile are kept (not clipped) unless ``clip`` is
    set, in which case ``|q|`` is capped at ``round(0.5 * beta)``. A matrix
    whose percentile is zero is quantized with scale 1 and flagged
    degenerate.
    """
    A = as_floatmatrix(A, "A")
    alpha = percentile_abs(A, p) if A.size else 0.0
    params = QuantParams(p, int(beta), alpha)
    # divide first: 0.5 * beta / alpha overflows for subnormal alpha
    with np.errstate(over="ignore"):
        x = A * params.scale if params.degenerate else (A / params.alpha) * (0.5 * params.beta)
    if x.size and not (np.max(np.abs(x)) < 2.0**63):
        raise OverflowError("quantized values do not fit in int64")
    q = round_half_away(x)
    if not params.degenerate:
        _fix_near_ties(q, A, x, params)
    if clip:
        q = np.clip(q, -params.level_bound, params.level_bound)
    return QuantizedMatrix(as_intmatrix(q.astype(np.int64)), params)


def _fix_near_ties(q, A, x, params) -> None:
    """Re-round entries whose scaled value sits next to a .5 tie using exact
    rational arithmetic, so ``q`` is the true rounding of ``a * beta / (2 alpha)``."""
    frac = np.abs(x - np.trunc(x))
    near = (np.abs(frac - 0.5) < 1e-6) & (np.abs(x) < 2.0**40)
    if not near.any():
        return
    alpha2 = 2 * Fraction(params.alpha)
    for idx in zip(*np.nonzero(near)):
        exact = Fraction(float(A[idx])) * params.beta / alpha2
        mag = abs(exact)
        r = math.floor(mag) + (1 if mag - math.floor(mag) >= Fraction(1, 2) else 0)
        q[idx] = r if exact >= 0 else -r


def dequant_gemm(Aq: QuantizedMatrix, Bq: QuantizedMatrix) -> np.ndarray:
    """Approximate float ``A @ B.T`` from the integer GEMM of the quantized
    operands, undoing both scales."""
    if Aq.params.beta != Bq.params.beta:
        raise ValueError(f"beta mismatch: {Aq.params.beta} vs {Bq.params.beta}")
    C = exact_gemm(Aq.q, Bq.q)
    return C * (Aq.params.step * Bq.params.step)


def heavy_hitter_ratio(A) -> float:
    """Max magnitude over the 95th-percentile magnitude."""
    a95 = percentile_abs(A, 95)
    if a95 == 0:
        raise ZeroDivisionError("95th percentile magnitude is zero")
    return percentile_abs(A, 100) / a95


def percentile_vs_std(A, removed=(0, 10, 100, 1000), p: float = 95.0) -> list[dict]:
    """Standard deviation and ``p``-th percentile after dropping the ``k``
    largest-magnitude entries, for each ``k`` in ``removed``."""
    vals = np.asarray(A, dtype=np.float64).ravel()
    order = np.argsort(np.abs(vals), kind="stable")
    rows = []
    for k in removed:
        if k >= vals.size:
            continue
        kept = vals[order[: vals.size - k]]
        rows.append({"removed": int(k), "std": float(np.std(kept)), "percentile": percentile_abs(kept, p)})
    return rows
