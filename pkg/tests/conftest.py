import math

import numpy as np
import pytest

from imunpack import kernels


@pytest.fixture(params=kernels.available_backends())
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    monkeypatch.setattr(kernels, "_impl", kernels.get_backend(request.param))
    return request.param


def log_uniform_ints(rng, shape, max_mag=1 << 12):
    """Signed integers with magnitudes log-uniform in [0, max_mag]."""
    mags = np.floor(np.exp(rng.uniform(0, math.log(max_mag + 1), size=shape))) - 1
    signs = rng.choice(np.array([-1, 1]), size=shape)
    return (signs * mags).astype(np.int64)


def naive_gemm(A, B):
    """Triple loop over Python ints; never overflows."""
    A = [[int(v) for v in row] for row in np.asarray(A)]
    B = [[int(v) for v in row] for row in np.asarray(B)]
    return [[sum(a * b for a, b in zip(ra, rb)) for rb in B] for ra in A]


def dense_recombine(packed):
    """Rebuild A @ B.T from an UnpackedGemm with dense object matrices.

    Independent of scaled_matmul and the gather helpers.
    """
    Pa = packed.pi_a.to_dense()
    Pb = packed.pi_b.to_dense()
    S = np.diag(np.array(packed.s.values(), dtype=object)) if len(packed.s) else np.zeros((0, 0), dtype=object)
    a = packed.a.astype(object)
    b = packed.b.astype(object)
    return Pa.dot(a).dot(S).dot(b.T).dot(Pb.T)


_VERDICT_KEY = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(_VERDICT_KEY, [])

    def record(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
        lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICT_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
