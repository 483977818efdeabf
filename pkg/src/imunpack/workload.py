"""Synthetic matrices with controlled heavy-hitter layouts, plus the nine
GEMMs of a transformer block (forward and backward)."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .quantize import percentile_abs


class Pattern(enum.Enum):
    ROW_BAND = "row"
    COLUMN_BAND = "col"
    DIAGONAL = "diag"
    SCATTERED = "scatter"

    @classmethod
    def parse(cls, value: "str | Pattern") -> "Pattern":
        if isinstance(value, cls):
            return value
        aliases = {
            "rowband": "row", "row_band": "row", "column": "col", "colband": "col",
            "columnband": "col", "column_band": "col", "diagonal": "diag",
            "scattered": "scatter",
        }
        v = str(value).lower()
        return cls(aliases.get(v, v))


@dataclass(frozen=True)
class OutlierSpec:
    pattern: Pattern
    fraction: float = 0.05
    magnitude_ratio: float = 1000.0
    body_range: int = 7
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pattern", Pattern.parse(self.pattern))
        if not 0 < self.fraction <= 0.5:
            raise ValueError(f"fraction must lie in (0, 0.5], got {self.fraction}")
        if self.magnitude_ratio < 1:
            raise ValueError(f"magnitude_ratio must be >= 1, got {self.magnitude_ratio}")
        if self.body_range < 1:
            raise ValueError(f"body_range must be >= 1, got {self.body_range}")

    def outlier_count(self, rows: int, cols: int) -> int:
        return math.floor(Fraction(repr(float(self.fraction))) * rows * cols)

    def magnitude_range(self) -> tuple[int, int]:
        """Inclusive outlier magnitude range. Always above ``body_range``."""
        hi = max(int(self.body_range * self.magnitude_ratio), self.body_range + 1)
        return min(2 * self.body_range, hi), hi


def _positions(rng, rows, cols, count, pattern):
    if pattern is Pattern.SCATTERED:
        flat = rng.choice(rows * cols, size=count, replace=False)
        return flat // cols, flat % cols
    if pattern is Pattern.DIAGONAL:
        m = min(rows, cols)
        if count > m:
            raise ValueError(f"{count} outliers requested but only {m} diagonal cells")
        idx = np.sort(rng.choice(m, size=count, replace=False))
        return idx, idx
    if pattern is Pattern.COLUMN_BAND:
        r, c = _positions(rng, cols, rows, count, Pattern.ROW_BAND)
        return c, r
    # row band: the fewest rows that can hold every outlier
    k = math.ceil(count / cols)
    if k > rows:
        raise ValueError(f"{count} outliers do not fit in {rows} rows")
    band = np.sort(rng.choice(rows, size=k, replace=False))
    cells = rng.choice(k * cols, size=count, replace=False)
    return band[cells // cols], cells % cols


def gen_matrix(rows: int, cols: int, spec: OutlierSpec) -> np.ndarray:
    """Integer matrix: uniform body in ``[-body_range, body_range]`` plus
    ``floor(fraction * rows * cols)`` outliers laid out per ``spec.pattern``.

    Outlier magnitudes are log-uniform over ``spec.magnitude_range()`` with
    random signs; the first one is pinned to the top of the range so the
    max/percentile ratio is controlled by ``magnitude_ratio``.
    """
    if rows <= 0 or cols <= 0:
        raise ValueError(f"dims must be positive, got {rows}x{cols}")
    rng = np.random.default_rng(spec.seed)
    body = spec.body_range
    out = rng.integers(-body, body, size=(rows, cols), endpoint=True, dtype=np.int64)
    count = spec.outlier_count(rows, cols)
    if count == 0:
        return out
    r, c = _positions(rng, rows, cols, count, spec.pattern)
    lo, hi = spec.magnitude_range()
    mags = np.exp(rng.uniform(math.log(lo), math.log(hi), size=count))
    mags = np.clip(np.rint(mags), lo, hi).astype(np.int64)
    mags[0] = hi
    signs = rng.choice(np.array([-1, 1], dtype=np.int64), size=count)
    out[r, c] = signs * mags
    return out


def stats_report(A, bits=range(2, 9)) -> dict:
    """Heavy-hitter statistics: percentiles, their ratio, standard
    deviation and OB counts for each bit-width."""
    arr = np.asarray(A)
    if arr.size == 0:
        raise ValueError("stats of an empty matrix")
    a95 = percentile_abs(arr, 95)
    a100 = percentile_abs(arr, 100)
    mags = np.abs(arr)
    return {
        "rows": int(arr.shape[0]),
        "cols": int(arr.shape[1]) if arr.ndim > 1 else 1,
        "alpha_95": a95,
        "alpha_100": a100,
        "ratio": a100 / a95 if a95 > 0 else None,
        "std": float(np.std(arr.astype(np.float64))),
        "ob_counts": {str(b): int(np.count_nonzero(mags >= (1 << (b - 1)))) for b in bits},
    }


GEMM_NAMES = ("Y", "P", "O", "dX", "dW", "dQ", "dK", "dM", "dV")


@dataclass(frozen=True)
class GemmShape:
    """One ``A @ B.T`` with ``A`` of shape ``n x d`` and ``B`` of ``h x d``."""

    name: str
    n: int
    d: int
    h: int

    def __post_init__(self):
        if self.name not in GEMM_NAMES:
            raise ValueError(f"unknown GEMM {self.name!r}; expected one of {GEMM_NAMES}")
        if min(self.n, self.d, self.h) <= 0:
            raise ValueError("GEMM dims must be positive")


def transformer_gemms(seq_len: int, d_model: int, d_out: int) -> list[GemmShape]:
    """Shapes of the linear-layer and attention GEMMs, forward and backward.

    ``X`` is ``seq_len x d_model``, ``W`` is ``d_out x d_model`` and the
    attention operands ``Q, K, V`` are ``seq_len x d_model``.
    """
    L, D, H = seq_len, d_model, d_out
    return [
        GemmShape("Y", L, D, H),
        GemmShape("P", L, D, L),
        GemmShape("O", L, L, D),
        GemmShape("dX", L, H, D),
        GemmShape("dW", H, L, D),
        GemmShape("dQ", L, L, D),
        GemmShape("dK", L, L, D),
        GemmShape("dM", L, D, L),
        GemmShape("dV", L, L, D),
    ]


# Layout of heavy hitters in each base tensor: activations concentrate in a
# few channels, attention probabilities on the diagonal, the rest scatter.
_BASE_PATTERNS = {
    "X": Pattern.COLUMN_BAND, "W": Pattern.SCATTERED, "Q": Pattern.COLUMN_BAND,
    "K": Pattern.COLUMN_BAND, "M": Pattern.DIAGONAL, "V": Pattern.SCATTERED,
    "dY": Pattern.SCATTERED, "dP": Pattern.DIAGONAL, "dO": Pattern.SCATTERED,
}


def transformer_fixtures(
    seq_len: int = 16,
    d_model: int = 16,
    d_out: int = 24,
    fraction: float = 0.05,
    magnitude_ratio: float = 1000.0,
    body_range: int = 7,
    seed: int = 0,
) -> list[tuple[GemmShape, np.ndarray, np.ndarray]]:
    """Synthetic operands for every GEMM of :func:`transformer_gemms`,
    already oriented as ``(A, B)`` for ``A @ B.T``."""
    L, D, H = seq_len, d_model, d_out
    dims = {"X": (L, D), "W": (H, D), "Q": (L, D), "K": (L, D), "M": (L, L),
            "V": (L, D), "dY": (L, H), "dP": (L, L), "dO": (L, D)}
    seeds = np.random.SeedSequence(seed).generate_state(len(dims), dtype=np.uint64)
    base = {}
    for (name, (r, c)), sd in zip(dims.items(), seeds):
        pattern = _BASE_PATTERNS[name]
        frac = fraction
        if pattern is Pattern.DIAGONAL:
            frac = min(fraction, min(r, c) / (r * c))
        spec = OutlierSpec(pattern, frac, magnitude_ratio, body_range, int(sd))
        base[name] = gen_matrix(r, c, spec)
    X, W, Q, K, M, V = (base[k] for k in "XWQKMV")
    dY, dP, dO = base["dY"], base["dP"], base["dO"]
    operands = {
        "Y": (X, W), "P": (Q, K), "O": (M, V.T), "dX": (dY, W.T), "dW": (dY.T, X.T),
        "dQ": (dP, K.T), "dK": (dP.T, Q.T), "dM": (dO, V), "dV": (M.T, dO.T),
    }
    out = []
    for shape in transformer_gemms(L, D, H):
        A, B = operands[shape.name]
        out.append((shape, np.ascontiguousarray(A), np.ascontiguousarray(B)))
    return out
