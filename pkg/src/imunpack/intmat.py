"""Integer matrices, bit bounds, digit decomposition and the oracle GEMM.

Integer matrices are plain 2-D ``numpy.int64`` arrays; :func:`as_intmatrix`
is the single gate that validates and converts anything else.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import kernels
from .errors import AccumulatorOverflowError, ShapeError

INT64_MAX = (1 << 63) - 1
INT64_MIN = -(1 << 63)


@dataclass(frozen=True)
class BitBound:
    """Target bit-width ``b`` and its bound ``s = 2**(b-1)``.

    The In-Bound (IB) set is ``{-s+1, ..., s-1}``; anything with
    ``|v| >= s`` is Out-of-Bound (OB).
    """

    b: int

    def __post_init__(self):
        if int(self.b) != self.b or self.b < 2:
            raise ValueError(f"bit-width must be an integer >= 2, got {self.b!r}")

    @property
    def s(self) -> int:
        return 1 << (self.b - 1)

    @property
    def shift(self) -> int:
        """log2(s): multiplying by s**e is a left shift by ``e * shift``."""
        return self.b - 1

    def is_in_bound(self, v: int) -> bool:
        return -self.s < v < self.s


def bound(b: int | BitBound) -> BitBound:
    return b if isinstance(b, BitBound) else BitBound(int(b))


@dataclass(frozen=True)
class DigitVector:
    """Signed base-``s`` digits, least significant first."""

    digits: tuple[int, ...]
    base: int

    def value(self) -> int:
        total = 0
        for d in reversed(self.digits):
            total = total * self.base + d
        return total

    def __len__(self):
        return len(self.digits)

    def __iter__(self):
        return iter(self.digits)


def trunc_divmod(v: int, s: int) -> tuple[int, int]:
    """Round-toward-zero division; the remainder carries the sign of ``v``."""
    q = abs(v) // s
    if v < 0:
        q = -q
    return q, v - q * s


def digit_decompose(v: int, b: int | BitBound) -> DigitVector:
    """Split ``v`` into IB digits with ``sum(s**i * d_i) == v``.

    Digits come from repeated truncated division, so every digit lies in
    ``(-s, s)`` and shares the sign of ``v``. Zero yields ``[0]``.

    >>> digit_decompose(137, 4).digits
    (1, 1, 2)
    """
    bb = bound(b)
    v = int(v)
    if v == 0:
        return DigitVector((0,), bb.s)
    digits = []
    while v != 0:
        v, r = trunc_divmod(v, bb.s)
        digits.append(r)
    return DigitVector(tuple(digits), bb.s)


def as_intmatrix(x, name: str = "matrix") -> np.ndarray:
    """Return ``x`` as a C-contiguous 2-D int64 array, validating entries.

    Floats are accepted only if they hold exact integers. ``-2**63`` is
    rejected because its magnitude is not representable.
    """
    arr = np.asarray(x)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 0)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or not np.all(arr == np.round(arr)):
            raise ValueError(f"{name} has non-integer entries")
        if arr.size and np.max(np.abs(arr)) > INT64_MAX:
            raise OverflowError(f"{name} has entries outside the int64 range")
    elif arr.dtype.kind == "O":
        if any(not (-INT64_MAX <= int(v) <= INT64_MAX) for v in arr.flat):
            raise OverflowError(f"{name} has entries outside the int64 range")
    elif arr.dtype.kind not in "iub":
        raise TypeError(f"{name} must hold integers, got dtype {arr.dtype}")
    out = np.ascontiguousarray(arr, dtype=np.int64)
    if out.size and out.min() == INT64_MIN:
        raise OverflowError(f"{name} contains -2**63, whose magnitude is not an int64")
    return out


def max_abs(M: np.ndarray) -> int:
    return int(np.max(np.abs(M))) if M.size else 0


def check_gemm_overflow(A: np.ndarray, B: np.ndarray) -> None:
    """Refuse GEMMs whose worst-case dot product could leave int64."""
    worst = A.shape[1] * max_abs(A) * max_abs(B)
    if worst > INT64_MAX:
        raise AccumulatorOverflowError(
            f"inner dim {A.shape[1]} x max|A| {max_abs(A)} x max|B| {max_abs(B)} "
            f"= {worst} exceeds the int64 accumulator"
        )


def exact_gemm(A, B) -> np.ndarray:
    """Exact ``C = A @ B.T`` with an int64 accumulator.

    This is the oracle every unpacked GEMM is compared against. The
    preflight check makes wraparound impossible, so the result does not
    depend on accumulation order.
    """
    A = as_intmatrix(A, "A")
    B = as_intmatrix(B, "B")
    if A.shape[1] != B.shape[1]:
        raise ShapeError(f"inner dimensions differ: A is {A.shape}, B is {B.shape}")
    check_gemm_overflow(A, B)
    return kernels.gemm_nt(A, B)


def ob_count(A, b: int | BitBound, axis: Literal["rows", "cols"] = "rows") -> np.ndarray:
    """Number of OB entries (``|v| >= s``) in each row or column."""
    A = as_intmatrix(A)
    if axis not in ("rows", "cols"):
        raise ValueError(f"axis must be 'rows' or 'cols', got {axis!r}")
    ob = np.abs(A) >= bound(b).s
    return ob.sum(axis=1 if axis == "rows" else 0).astype(np.int64)


def has_ob(A: np.ndarray, b: int | BitBound) -> bool:
    return A.size > 0 and max_abs(A) >= bound(b).s
