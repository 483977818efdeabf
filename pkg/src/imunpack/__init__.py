"""Exact integer GEMM built only from low bit-width integer GEMMs.

Integer matrices with a few large entries are *unpacked* into larger
matrices whose entries all fit a chosen bit-width; recombining the
low-bit products gives the original product exactly.
"""
__version__ = "0.1.0"

from .errors import AccumulatorOverflowError, MatrixFormatError, OutOfBoundError, ShapeError
from .huffman import CodeTable, huffman_stats
from .intmat import BitBound, DigitVector, as_intmatrix, digit_decompose, exact_gemm, ob_count
from .kernels import BACKEND
from .matrixio import load_matrix, save_matrix
from .quantize import (
    QuantizedMatrix,
    QuantParams,
    dequant_gemm,
    heavy_hitter_ratio,
    percentile_abs,
    percentile_vs_std,
    rtn_quantize,
)
from .unpack import (
    RowGather,
    ScaleDiag,
    Strategy,
    UnpackedGemm,
    apply_col_gather,
    apply_row_gather,
    choose_mix,
    scaled_matmul,
    unpack,
    unpack_both,
    unpack_column,
    unpack_gemm,
    unpack_pair,
    unpack_ratio,
    unpack_row,
)
from .workload import GemmShape, OutlierSpec, Pattern, gen_matrix, stats_report, transformer_gemms

__all__ = [
    "AccumulatorOverflowError", "BACKEND", "BitBound", "CodeTable", "DigitVector", "GemmShape",
    "MatrixFormatError", "OutOfBoundError", "OutlierSpec", "Pattern", "QuantParams",
    "QuantizedMatrix", "RowGather", "ScaleDiag", "ShapeError", "Strategy", "UnpackedGemm",
    "apply_col_gather", "apply_row_gather", "as_intmatrix", "choose_mix", "dequant_gemm",
    "digit_decompose", "exact_gemm", "gen_matrix", "heavy_hitter_ratio", "huffman_stats",
    "load_matrix", "ob_count", "percentile_abs", "percentile_vs_std", "rtn_quantize",
    "save_matrix", "scaled_matmul", "stats_report", "transformer_gemms", "unpack",
    "unpack_both", "unpack_column", "unpack_gemm", "unpack_pair", "unpack_ratio", "unpack_row",
]
