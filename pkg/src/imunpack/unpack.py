"""Integer matrix unpacking.

A matrix with Out-of-Bound (OB) entries is rewritten as a larger matrix of
In-Bound (IB) digits plus two pieces of bookkeeping:

* a :class:`RowGather` ``P`` that re-accumulates unpacked rows
  (``A == P @ A_u``), and
* a :class:`ScaleDiag` ``S`` of powers of ``s`` that scales unpacked
  columns (``A @ B.T == A_u @ S @ B_e.T``).

Composing both sides gives ``A @ B.T == P_A @ A_ue @ S @ B_eu.T @ P_B.T``
where every GEMM in the middle only sees IB entries.
"""
from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product

import numpy as np

from . import kernels
from .errors import AccumulatorOverflowError, OutOfBoundError, ShapeError
from .intmat import INT64_MAX, BitBound, as_intmatrix, bound, check_gemm_overflow, max_abs


class Strategy(enum.Enum):
    ROW = "row"
    COLUMN = "col"
    BOTH = "both"

    @classmethod
    def parse(cls, value: "str | Strategy") -> "Strategy":
        if isinstance(value, cls):
            return value
        aliases = {"column": "col", "r": "row", "c": "col", "b": "both"}
        v = str(value).lower()
        return cls(aliases.get(v, v))


# Enumeration order for Mix tie-breaking: A-side major, Row < Column < Both.
STRATEGY_PAIRS: tuple[tuple[Strategy, Strategy], ...] = tuple(product(Strategy, Strategy))


@dataclass(frozen=True)
class RowGather:
    """Sparse left factor with one nonzero ``s**exps[c]`` per column ``c``,
    sitting in row ``targets[c]``."""

    source_rows: int
    targets: np.ndarray
    exps: np.ndarray
    base: int

    @classmethod
    def identity(cls, n: int, base: int) -> "RowGather":
        return cls(n, np.arange(n, dtype=np.int64), np.zeros(n, dtype=np.int64), base)

    @property
    def ncols(self) -> int:
        return len(self.targets)

    @property
    def shift(self) -> int:
        return self.base.bit_length() - 1

    def is_identity(self) -> bool:
        return self.ncols == self.source_rows and not self.exps.any()

    def to_dense(self) -> np.ndarray:
        """Materialised ``source_rows x ncols`` matrix (testing and debugging)."""
        P = np.zeros((self.source_rows, self.ncols), dtype=object)
        for c, (t, e) in enumerate(zip(self.targets, self.exps)):
            P[t, c] = self.base ** int(e)
        return P

    def compose(self, inner_targets: np.ndarray, inner_exps: np.ndarray) -> "RowGather":
        """Gather whose columns are this gather's columns re-indexed by an
        inner unpack step (``targets`` index into this gather's columns)."""
        return RowGather(
            self.source_rows,
            self.targets[inner_targets],
            self.exps[inner_targets] + inner_exps,
            self.base,
        )


@dataclass(frozen=True)
class ScaleDiag:
    """Diagonal ``diag(s**exps)``."""

    exps: np.ndarray
    base: int

    @classmethod
    def identity(cls, d: int, base: int) -> "ScaleDiag":
        return cls(np.zeros(d, dtype=np.int64), base)

    def __len__(self):
        return len(self.exps)

    @property
    def shift(self) -> int:
        return self.base.bit_length() - 1

    def groups(self) -> list[tuple[int, np.ndarray]]:
        """``(exponent, column indices)`` for each distinct diagonal value."""
        return [(int(e), np.flatnonzero(self.exps == e)) for e in np.unique(self.exps)]

    def values(self) -> list[int]:
        return [self.base ** int(e) for e in self.exps]


def _check_base(S: ScaleDiag, bb: BitBound) -> None:
    if len(S) and S.base != bb.s:
        raise ValueError(f"scale diagonal has base {S.base}, bound expects {bb.s}")


def _check_ib(M: np.ndarray, bb: BitBound, name: str) -> None:
    if M.size and max_abs(M) >= bb.s:
        raise OutOfBoundError(f"{name} has entries with |v| >= {bb.s} (b={bb.b})")


def unpack_row(A, b) -> tuple[np.ndarray, RowGather]:
    """Unpack OB rows of ``A`` into extra rows; returns ``(A_u, P)`` with
    ``apply_row_gather(P, A_u) == A``.

    >>> A_u, P = unpack_row([[65]], 3)
    >>> A_u.ravel().tolist(), P.exps.tolist()
    ([1, 0, 0, 1], [0, 1, 2, 3])
    """
    A = as_intmatrix(A, "A")
    bb = bound(b)
    A_u, src, exps = kernels.split_rows(A, bb.shift)
    return A_u, RowGather(A.shape[0], src, exps, bb.s)


def unpack_column(A, B, S: ScaleDiag | None, b) -> tuple[np.ndarray, np.ndarray, ScaleDiag]:
    """Unpack OB columns of ``A``, duplicating the matching columns of ``B``.

    Returns ``(A_u, B_e, S_u)`` with ``A_u @ S_u @ B_e.T == A @ S @ B.T``.
    Column unpacking of ``A`` is row unpacking of ``A.T``; each new column
    inherits its source column's scale times ``s``.
    """
    A = as_intmatrix(A, "A")
    B = as_intmatrix(B, "B")
    bb = bound(b)
    S = S if S is not None else ScaleDiag.identity(A.shape[1], bb.s)
    if not (A.shape[1] == B.shape[1] == len(S)):
        raise ShapeError(f"A has {A.shape[1]} cols, B has {B.shape[1]}, S has {len(S)}")
    _check_base(S, bb)
    At_u, src, exps = kernels.split_rows(np.ascontiguousarray(A.T), bb.shift)
    return (
        np.ascontiguousarray(At_u.T),
        np.ascontiguousarray(B[:, src]),
        ScaleDiag(S.exps[src] + exps, bb.s),
    )


def unpack_both(A, B, S: ScaleDiag | None, b) -> tuple[np.ndarray, np.ndarray, ScaleDiag, RowGather]:
    """Greedy mix of row and column unpacking.

    Repeatedly unpacks whichever single row or column has the most OB
    entries; rows win ties against columns, lower indices win among rows
    (or columns). Returns ``(A_u, B_e, S_u, P)``.
    """
    A = as_intmatrix(A, "A")
    B = as_intmatrix(B, "B")
    bb = bound(b)
    S = S if S is not None else ScaleDiag.identity(A.shape[1], bb.s)
    if not (A.shape[1] == B.shape[1] == len(S)):
        raise ShapeError(f"A has {A.shape[1]} cols, B has {B.shape[1]}, S has {len(S)}")
    _check_base(S, bb)
    A_u, row_src, row_exps, col_src, col_exps = kernels.unpack_both(A, S.exps, bb.shift)
    return (
        A_u,
        np.ascontiguousarray(B[:, col_src]),
        ScaleDiag(col_exps, bb.s),
        RowGather(A.shape[0], row_src, row_exps, bb.s),
    )


def unpack(A, B, S: ScaleDiag | None, b, strategy) -> tuple[np.ndarray, np.ndarray, ScaleDiag, RowGather]:
    """Unified interface over the three strategies; always returns
    ``(A_u, B_e, S_u, P_A)`` with ``P_A @ A_u @ S_u @ B_e.T == A @ S @ B.T``."""
    strategy = Strategy.parse(strategy)
    A = as_intmatrix(A, "A")
    B = as_intmatrix(B, "B")
    bb = bound(b)
    S = S if S is not None else ScaleDiag.identity(A.shape[1], bb.s)
    if strategy is Strategy.ROW:
        if not (A.shape[1] == B.shape[1] == len(S)):
            raise ShapeError(f"A has {A.shape[1]} cols, B has {B.shape[1]}, S has {len(S)}")
        _check_base(S, bb)
        A_u, P = unpack_row(A, bb)
        return A_u, B, S, P
    if strategy is Strategy.COLUMN:
        A_u, B_e, S_u = unpack_column(A, B, S, bb)
        return A_u, B_e, S_u, RowGather.identity(A.shape[0], bb.s)
    return unpack_both(A, B, S, bb)


def _weighted_sum_fits(weights: np.ndarray, exps: np.ndarray, shift: int) -> bool:
    """Whether ``sum(weights * 2**(exps * shift))`` stays within int64.

    A float estimate settles the common case; only sums near the limit are
    recomputed exactly with Python integers.
    """
    if not weights.size:
        return True
    est = float(np.sum(weights.astype(np.float64) * np.exp2((exps * shift).astype(np.float64))))
    if est < 2.0**61:
        return True
    exact = sum(int(w) << (int(e) * shift) for w, e in zip(weights.tolist(), exps.tolist()))
    return exact <= INT64_MAX


def scaled_matmul(A, B, S: ScaleDiag, b) -> np.ndarray:
    """``A @ S @ B.T`` as one IB GEMM per distinct scale, combined by shifts.

    Both operands must be entirely IB: this is where the low bit-width
    GEMMs actually run.
    """
    A = as_intmatrix(A, "A")
    B = as_intmatrix(B, "B")
    bb = bound(b)
    if not (A.shape[1] == B.shape[1] == len(S)):
        raise ShapeError(f"A has {A.shape[1]} cols, B has {B.shape[1]}, S has {len(S)}")
    _check_base(S, bb)
    _check_ib(A, bb, "A")
    _check_ib(B, bb, "B")
    if A.size and B.size:
        # products stay in Python ints; a column max product may exceed int64
        col = [int(a) * int(c) for a, c in zip(np.abs(A).max(axis=0).tolist(), np.abs(B).max(axis=0).tolist())]
        fits = max(col) <= INT64_MAX and _weighted_sum_fits(np.array(col, dtype=np.int64), S.exps, S.shift)
    else:
        fits = True
    if not fits:
        raise AccumulatorOverflowError("scaled GEMM could exceed the int64 accumulator")
    C = np.zeros((A.shape[0], B.shape[0]), dtype=np.int64)
    for e, idx in S.groups():
        Ag = np.ascontiguousarray(A[:, idx])
        Bg = np.ascontiguousarray(B[:, idx])
        C += kernels.gemm_nt(Ag, Bg) << (e * S.shift)
    return C


def apply_row_gather(P: RowGather, M) -> np.ndarray:
    """``P @ M``: output row ``t`` accumulates ``s**e * M[c]`` over the
    gather columns ``c`` targeting ``t``."""
    M = as_intmatrix(M, "M")
    if P.ncols != M.shape[0]:
        raise ShapeError(f"gather has {P.ncols} columns but M has {M.shape[0]} rows")
    if P.ncols and (P.targets.min() < 0 or P.targets.max() >= P.source_rows):
        raise IndexError("gather target row out of range")
    if P.is_identity():
        return M.copy()
    if M.size and not _weighted_sum_fits(np.abs(M).max(axis=1), P.exps, P.shift):
        raise AccumulatorOverflowError("row gather could exceed the int64 accumulator")
    out = np.zeros((P.source_rows, M.shape[1]), dtype=np.int64)
    np.add.at(out, P.targets, M << (P.exps * P.shift)[:, None])
    return out


def apply_col_gather(M, P: RowGather) -> np.ndarray:
    """``M @ P.T``: the right-hand counterpart of :func:`apply_row_gather`."""
    M = as_intmatrix(M, "M")
    return np.ascontiguousarray(apply_row_gather(P, np.ascontiguousarray(M.T)).T)


@dataclass(frozen=True)
class UnpackedGemm:
    """Everything needed to rebuild ``A @ B.T`` from IB-only GEMMs."""

    pi_a: RowGather
    a: np.ndarray
    s: ScaleDiag
    b: np.ndarray
    pi_b: RowGather
    bound: BitBound
    inner_dim: int
    strategy_a: Strategy = Strategy.ROW
    strategy_b: Strategy = Strategy.ROW

    @property
    def original_shape(self) -> tuple[int, int, int]:
        """``(n, d, h)`` of the GEMM before unpacking."""
        return self.pi_a.source_rows, self.inner_dim, self.pi_b.source_rows

    @property
    def unpacked_shape(self) -> tuple[int, int, int]:
        return self.a.shape[0], self.a.shape[1], self.b.shape[0]

    @property
    def ratio(self) -> float:
        n1, d1, h1 = self.unpacked_shape
        return unpack_ratio(n1, d1, h1, *self.original_shape)

    def recombine(self) -> np.ndarray:
        C_u = scaled_matmul(self.a, self.b, self.s, self.bound)
        return apply_col_gather(apply_row_gather(self.pi_a, C_u), self.pi_b)


def unpack_pair(A, B, b, strategy_a="row", strategy_b="row") -> UnpackedGemm:
    """Unpack ``A`` with ``strategy_a``, then ``B`` with ``strategy_b``.

    The second step treats ``B_e`` as the left operand and carries the
    scale diagonal forward, so column unpacking of ``B`` duplicates
    columns of ``A_u`` (which stay IB).
    """
    A = as_intmatrix(A, "A")
    B = as_intmatrix(B, "B")
    bb = bound(b)
    if A.shape[1] != B.shape[1]:
        raise ShapeError(f"inner dimensions differ: A is {A.shape}, B is {B.shape}")
    check_gemm_overflow(A, B)
    sa, sb = Strategy.parse(strategy_a), Strategy.parse(strategy_b)
    A_u, B_e, S_u, P_A = unpack(A, B, None, bb, sa)
    B_eu, A_ue, S_uu, P_B = unpack(B_e, A_u, S_u, bb, sb)
    return UnpackedGemm(P_A, A_ue, S_uu, B_eu, P_B, bb, A.shape[1], sa, sb)


def unpack_gemm(A, B, b, strategy_a="row", strategy_b="row") -> np.ndarray:
    """Exact ``A @ B.T`` computed only through IB GEMMs."""
    return unpack_pair(A, B, b, strategy_a, strategy_b).recombine()


def unpack_ratio(n1: int, d1: int, h1: int, n: int, d: int, h: int) -> float:
    """Growth in GEMM work, ``(n' d' h') / (n d h)``."""
    if min(n, d, h) <= 0 or min(n1, d1, h1) <= 0:
        raise ValueError("unpack ratio needs positive dimensions")
    return (n1 * d1 * h1) / (n * d * h)


def default_workers() -> int:
    env = os.environ.get("IMUNPACK_THREADS")
    if env:
        return max(1, int(env))
    return min(len(STRATEGY_PAIRS), os.cpu_count() or 1)


def choose_mix(
    A, B, b, strategies_a=None, strategies_b=None, workers: int | None = None
) -> tuple[Strategy, Strategy, float, UnpackedGemm]:
    """Pick the strategy pair with the smallest unpack ratio.

    Candidates are enumerated A-side major in Row < Column < Both order and
    the first minimum wins, so results do not depend on scheduling. Either
    side can be pinned by passing a one-element ``strategies_*``.
    """
    A = as_intmatrix(A, "A")
    B = as_intmatrix(B, "B")
    bb = bound(b)
    sas = [Strategy.parse(x) for x in (strategies_a or Strategy)]
    sbs = [Strategy.parse(x) for x in (strategies_b or Strategy)]
    pairs = [p for p in STRATEGY_PAIRS if p[0] in sas and p[1] in sbs]
    workers = default_workers() if workers is None else workers

    def run(pair):
        return unpack_pair(A, B, bb, *pair)

    if workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, pairs))
    else:
        results = [run(p) for p in pairs]
    best = min(range(len(pairs)), key=lambda k: (results[k].ratio, k))
    sa, sb = pairs[best]
    return sa, sb, results[best].ratio, results[best]
