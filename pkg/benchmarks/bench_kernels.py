"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N] [--json]
"""
import argparse
import json
import timeit

import numpy as np

from imunpack import OutlierSpec, gen_matrix, kernels, unpack_pair


def _fixtures(rng):
    A16 = rng.integers(-4096, 4097, size=(16, 16))
    A64 = gen_matrix(64, 64, OutlierSpec("scatter", 0.05, 1000, 7, seed=1))
    B64 = gen_matrix(64, 64, OutlierSpec("col", 0.05, 1000, 7, seed=2))
    G = rng.integers(-7, 8, size=(128, 128))
    return {
        "gemm_nt 128x128x128": lambda: kernels.gemm_nt(G, G),
        "split_rows 64x64 b=4": lambda: kernels.split_rows(A64, 3),
        "split_rows 16x16 b=2": lambda: kernels.split_rows(A16, 1),
        "unpack_both 64x64 b=4": lambda: kernels.unpack_both(A64, np.zeros(64, dtype=np.int64), 3),
        "unpack_pair both/both 64 b=4": lambda: unpack_pair(A64, B64, 4, "both", "both").recombine(),
        "unpack_pair row/col 16 b=3": lambda: unpack_pair(A16, A16, 3, "row", "col").recombine(),
    }


def run(repeat):
    rows = []
    backends = kernels.available_backends()
    saved = kernels._impl
    try:
        for name in _fixtures(np.random.default_rng(0)):
            row = {"case": name}
            for backend in backends:
                kernels._impl = kernels.get_backend(backend)
                fn = _fixtures(np.random.default_rng(0))[name]
                number, _ = timeit.Timer(fn).autorange()
                best = min(timeit.repeat(fn, number=number, repeat=repeat)) / number
                row[backend] = best
            rows.append(row)
    finally:
        kernels._impl = saved
    return backends, rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()
    backends, rows = run(args.repeat)
    if args.json:
        print(json.dumps({"backends": backends, "results": rows}, indent=2))
        return
    head = f"{'case':32}" + "".join(f"{b:>14}" for b in backends)
    if len(backends) == 2:
        head += f"{'speedup':>10}"
    print(head)
    for row in rows:
        line = f"{row['case']:32}" + "".join(f"{row[b] * 1e6:>11.1f} us" for b in backends)
        if len(backends) == 2:
            line += f"{row['python'] / row['cython']:>9.1f}x"
        print(line)
    if "cython" not in backends:
        print("compiled extension not built; only the pure-Python backend was timed")


if __name__ == "__main__":
    main()
