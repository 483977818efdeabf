"""Command-line interface: ``imunpack <command> ...``.

Every command exits 0 on success. Failures exit nonzero and print a JSON
object ``{"error": <type>, "message": <text>}`` on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .huffman import fixed_width_bits, huffman_stats
from .intmat import as_intmatrix, exact_gemm, ob_count
from .matrixio import load_matrix, save_matrix
from .quantize import percentile_vs_std, rtn_quantize
from .unpack import STRATEGY_PAIRS, Strategy, choose_mix, unpack_pair
from .workload import OutlierSpec, Pattern, gen_matrix, stats_report, transformer_fixtures

ANALYSIS_SCHEMA = "imunpack.analysis/1"
STRATEGY_CHOICES = ["row", "col", "both", "mix"]


class CLIError(Exception):
    pass


class EquivalenceError(CLIError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("UsageError", f"{self.prog}: {message}", code=2)


def _fail(kind: str, message: str, code: int = 1):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    sys.exit(code)


def _emit(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=False) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _int_operand(path, name):
    M = load_matrix(path)
    if M.dtype.kind == "f":
        raise CLIError(f"{name} ({path}) holds floats; run 'quantize' first")
    return as_intmatrix(M, name)


def _parse_bits(text: str) -> list[int]:
    try:
        bits = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise CLIError(f"--bits must be a comma-separated list of integers, got {text!r}") from None
    if not bits or min(bits) < 2:
        raise CLIError("every bit-width must be >= 2")
    return bits


def _shape(n, d, h):
    return {"n": int(n), "d": int(d), "h": int(h)}


def cmd_quantize(args):
    A = load_matrix(args.input)
    Aq = rtn_quantize(A, p=args.p, beta=args.beta, clip=args.clip)
    save_matrix(Aq.q, args.out, dtype=args.dtype)
    pr = Aq.params
    _emit({
        "p": pr.p, "beta": pr.beta, "alpha": pr.alpha, "scale": pr.scale,
        "degenerate": pr.degenerate, "clipped": args.clip,
        "rows": int(Aq.q.shape[0]), "cols": int(Aq.q.shape[1]), "out": str(args.out),
    }, args.params)


def cmd_matmul(args):
    A = _int_operand(args.a, "A")
    B = _int_operand(args.b, "B")
    bits = _parse_bits(args.bits)
    if len(bits) != 1:
        raise CLIError("matmul takes a single --bits value")
    b = bits[0]
    sa, sb = args.strategy_a, args.strategy_b
    t0 = time.perf_counter()
    if "mix" in (sa, sb):
        pin_a = None if sa == "mix" else [sa]
        pin_b = None if sb == "mix" else [sb]
        _, _, _, packed = choose_mix(A, B, b, pin_a, pin_b)
    else:
        packed = unpack_pair(A, B, b, sa, sb)
    C = packed.recombine()
    elapsed = time.perf_counter() - t0
    oracle = None
    if args.check_oracle:
        ref = exact_gemm(A, B)
        if not np.array_equal(C, ref):
            bad = int(np.count_nonzero(C != ref))
            raise EquivalenceError(f"unpacked GEMM differs from the oracle in {bad} entries")
        oracle = "pass"
    if args.out:
        save_matrix(C, args.out, dtype="i64")
    _emit({
        "bits": b,
        "strategy_a": packed.strategy_a.value,
        "strategy_b": packed.strategy_b.value,
        "ratio": packed.ratio,
        "shape": _shape(*packed.original_shape),
        "unpacked_shape": _shape(*packed.unpacked_shape),
        "oracle": oracle,
        "wall_time_s": elapsed,
    })


def analyze_pair(name, A, B, bits, beta=None) -> list[dict]:
    """Report records for every strategy pair plus Mix, for each bit-width."""
    A = as_intmatrix(A, "A")
    B = as_intmatrix(B, "B")
    ref = exact_gemm(A, B)
    records = []
    for b in bits:
        ob = {"a": int(ob_count(A, b).sum()), "b": int(ob_count(B, b).sum())}
        results = []
        for sa, sb in STRATEGY_PAIRS:
            t0 = time.perf_counter()
            packed = unpack_pair(A, B, b, sa, sb)
            ok = bool(np.array_equal(packed.recombine(), ref))
            results.append((packed, ok, time.perf_counter() - t0))
        best = min(range(len(results)), key=lambda k: (results[k][0].ratio, k))
        for k, (packed, ok, dt) in enumerate(results):
            records.append(_record(name, beta, b, packed, ob, ok, dt, mix=False))
        packed, ok, dt = results[best]
        records.append(_record(name, beta, b, packed, ob, ok, dt, mix=True))
    return records


def _record(name, beta, b, packed, ob, ok, dt, mix):
    return {
        "gemm": name,
        "beta": beta,
        "bits": b,
        "strategy_a": packed.strategy_a.value,
        "strategy_b": packed.strategy_b.value,
        "mix": mix,
        "ratio": packed.ratio,
        "shape": _shape(*packed.original_shape),
        "unpacked_shape": _shape(*packed.unpacked_shape),
        "ob": ob,
        "equivalent": ok,
        "wall_time_s": dt,
    }


def analysis_report(records) -> dict:
    return {"schema": ANALYSIS_SCHEMA, "backend": kernels.BACKEND, "records": records}


def cmd_analyze(args):
    bits = _parse_bits(args.bits)
    if args.suite:
        if args.a or args.b:
            raise CLIError("--suite cannot be combined with --a/--b")
        body = args.body
        if args.beta is not None:
            body = max(1, int(round(0.5 * args.beta + 1e-9)))
        fixtures = transformer_fixtures(
            args.seq_len, args.d_model, args.d_out, args.fraction, args.ratio, body, args.seed
        )
        records = []
        for shape, A, B in fixtures:
            records += analyze_pair(shape.name, A, B, bits, args.beta)
    else:
        if not (args.a and args.b):
            raise CLIError("analyze needs --a and --b, or --suite transformer")
        A = _int_operand(args.a, "A")
        B = _int_operand(args.b, "B")
        records = analyze_pair(args.name, A, B, bits, args.beta)
    report = analysis_report(records)
    _emit(report, args.report)
    if not all(r["equivalent"] for r in records):
        raise EquivalenceError("at least one unpacked GEMM differs from the oracle")


def cmd_gen(args):
    spec = OutlierSpec(Pattern.parse(args.pattern), args.fraction, args.ratio, args.body, args.seed)
    M = gen_matrix(args.rows, args.cols, spec)
    save_matrix(M, args.out, dtype=args.dtype)
    rec = stats_report(M)
    rec.update({"pattern": spec.pattern.value, "fraction": spec.fraction, "seed": spec.seed,
                "outliers": spec.outlier_count(args.rows, args.cols), "out": str(args.out)})
    _emit(rec)


def cmd_stats(args):
    M = load_matrix(args.input)
    rec = stats_report(M)
    rec["percentile_vs_std"] = percentile_vs_std(M)
    _emit(rec, args.report)


def cmd_compress(args):
    q = _int_operand(args.input, "input")
    table, avg = huffman_stats(q)
    roundtrip = table.decode(table.encode(q)) == [int(v) for v in q.ravel()]
    _emit({
        "entries": int(q.size),
        "symbols": len(table.codes),
        "average_bits": avg,
        "fixed_bits": fixed_width_bits(q),
        "roundtrip": roundtrip,
        "code_lengths": {str(k): v for k, v in sorted(table.lengths().items())},
    }, args.report)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="imunpack", description="Exact integer GEMM through low bit-width GEMMs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    q = sub.add_parser("quantize", help="round-to-nearest quantize a float matrix")
    q.add_argument("--in", dest="input", required=True)
    q.add_argument("--p", type=float, default=95.0)
    q.add_argument("--beta", type=int, default=31)
    q.add_argument("--out", required=True)
    q.add_argument("--dtype", choices=["i32", "i64"], default="i64")
    q.add_argument("--clip", action="store_true", help="cap |q| at round(beta/2)")
    q.add_argument("--params", help="write quantization parameters JSON here instead of stdout")
    q.set_defaults(func=cmd_quantize)

    m = sub.add_parser("matmul", help="exact A @ B.T through unpacked low-bit GEMMs")
    m.add_argument("--a", required=True)
    m.add_argument("--b", required=True)
    m.add_argument("--bits", default="8")
    m.add_argument("--strategy-a", choices=STRATEGY_CHOICES, default="row")
    m.add_argument("--strategy-b", choices=STRATEGY_CHOICES, default="row")
    m.add_argument("--check-oracle", action="store_true")
    m.add_argument("--out")
    m.set_defaults(func=cmd_matmul)

    a = sub.add_parser("analyze", help="unpack ratios for every strategy pair and Mix")
    a.add_argument("--a")
    a.add_argument("--b")
    a.add_argument("--suite", choices=["transformer"])
    a.add_argument("--name", default="custom")
    a.add_argument("--bits", default="3,4,5")
    a.add_argument("--beta", type=int)
    a.add_argument("--report")
    a.add_argument("--seq-len", type=int, default=16)
    a.add_argument("--d-model", type=int, default=16)
    a.add_argument("--d-out", type=int, default=24)
    a.add_argument("--fraction", type=float, default=0.05)
    a.add_argument("--ratio", type=float, default=1000.0)
    a.add_argument("--body", type=int, default=7)
    a.add_argument("--seed", type=int, default=0)
    a.set_defaults(func=cmd_analyze)

    g = sub.add_parser("gen", help="generate a synthetic matrix with heavy hitters")
    g.add_argument("--rows", type=int, required=True)
    g.add_argument("--cols", type=int, required=True)
    g.add_argument("--pattern", choices=[x.value for x in Pattern], default="scatter")
    g.add_argument("--fraction", type=float, default=0.05)
    g.add_argument("--ratio", type=float, default=1000.0)
    g.add_argument("--body", type=int, default=7)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--dtype", choices=["i32", "i64"], default="i64")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("stats", help="heavy-hitter statistics of a matrix")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--report")
    s.set_defaults(func=cmd_stats)

    c = sub.add_parser("compress", help="Huffman storage cost of a quantized matrix")
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--report")
    c.set_defaults(func=cmd_compress)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (CLIError, ValueError, OverflowError, ZeroDivisionError, OSError, IndexError) as exc:
        _fail(type(exc).__name__, str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
