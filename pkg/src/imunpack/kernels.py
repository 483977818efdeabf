"""Kernel selection: compiled Cython core if importable, numpy otherwise.

Set ``IMUNPACK_PURE=1`` to force the numpy fallback. Both backends expose
``gemm_nt``, ``split_rows`` and ``unpack_both`` with identical results.
"""
import os
from types import ModuleType

import numpy as np

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def get_backend(name: str) -> ModuleType:
    if name == "python":
        return _fallback
    if name == "cython":
        if _compiled is None:
            raise ImportError("the compiled imunpack._kernels extension is not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def available_backends() -> list[str]:
    return ["python"] + (["cython"] if _compiled is not None else [])


BACKEND = "python" if (_compiled is None or os.environ.get("IMUNPACK_PURE")) else "cython"
_impl = get_backend(BACKEND)


def gemm_nt(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return _impl.gemm_nt(np.ascontiguousarray(A), np.ascontiguousarray(B))


def split_rows(A: np.ndarray, shift: int):
    return _impl.split_rows(np.ascontiguousarray(A), int(shift))


def unpack_both(A: np.ndarray, col_exps: np.ndarray, shift: int):
    return _impl.unpack_both(
        np.ascontiguousarray(A), np.ascontiguousarray(col_exps, dtype=np.int64), int(shift)
    )
