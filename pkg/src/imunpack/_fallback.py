"""Pure numpy kernels; used when the compiled extension is unavailable.

Same signatures and bit-identical results as ``_kernels.pyx``. Division is
truncated toward zero with a sign-carrying remainder throughout.
"""
import numpy as np

_GROW = 2


def gemm_nt(A, B):
    """``A @ B.T`` for int64 operands (caller guarantees no overflow)."""
    return np.ascontiguousarray(A @ B.T, dtype=np.int64)


def _tdivmod(v, shift):
    q = np.abs(v) >> shift
    q = np.where(v < 0, -q, q)
    return q, v - (q << shift)


def split_rows(A, shift):
    """Unpack every OB row of ``A`` until all entries are IB.

    Rows are processed generation by generation, which reproduces the
    append order of a single index scan that also revisits appended rows.

    Returns ``(A_u, src, exps)``: row ``k`` of ``A_u`` contributes
    ``s**exps[k]`` times itself to original row ``src[k]``.
    """
    s = 1 << shift
    n = A.shape[0]
    block = np.array(A, dtype=np.int64, copy=True)
    src = np.arange(n, dtype=np.int64)
    exps = np.zeros(n, dtype=np.int64)
    blocks, srcs, expss = [block], [src], [exps]
    while block.shape[0]:
        mask = (np.abs(block) >= s).any(axis=1)
        if not mask.any():
            break
        q, r = _tdivmod(block[mask], shift)
        block[mask] = r
        block, src, exps = q, src[mask], exps[mask] + 1
        blocks.append(block)
        srcs.append(src)
        expss.append(exps)
    return (
        np.ascontiguousarray(np.concatenate(blocks, axis=0)) if len(blocks) > 1 else blocks[0],
        np.concatenate(srcs),
        np.concatenate(expss),
    )


def unpack_both(A, col_exps, shift):
    """Greedy row/column unpacking driven by OB counts.

    Each step unpacks the single row or column holding the most OB entries
    (lowest index among equals; a row wins a row/column tie).

    Returns ``(A_u, row_src, row_exps, col_src, col_exps)``.
    """
    s = 1 << shift
    n, d = A.shape
    cap_r, cap_c = max(n, 1) * _GROW, max(d, 1) * _GROW
    buf = np.zeros((cap_r, cap_c), dtype=np.int64)
    buf[:n, :d] = A
    ob = np.abs(buf[:n, :d]) >= s
    row_cnt = np.zeros(cap_r, dtype=np.int64)
    col_cnt = np.zeros(cap_c, dtype=np.int64)
    row_cnt[:n] = ob.sum(axis=1)
    col_cnt[:d] = ob.sum(axis=0)
    row_src = np.zeros(cap_r, dtype=np.int64)
    row_exp = np.zeros(cap_r, dtype=np.int64)
    col_src = np.zeros(cap_c, dtype=np.int64)
    col_exp = np.zeros(cap_c, dtype=np.int64)
    row_src[:n] = np.arange(n)
    col_src[:d] = np.arange(d)
    col_exp[:d] = col_exps
    nr, nc = n, d
    while nr and nc:
        i = int(np.argmax(row_cnt[:nr]))
        j = int(np.argmax(col_cnt[:nc]))
        c0, c1 = row_cnt[i], col_cnt[j]
        if c0 == 0 and c1 == 0:
            break
        if c0 >= c1:
            if nr == cap_r:
                cap_r *= _GROW
                buf = _grow(buf, (cap_r, cap_c))
                row_cnt, row_src, row_exp = (_grow(x, (cap_r,)) for x in (row_cnt, row_src, row_exp))
            v = buf[i, :nc]
            q, r = _tdivmod(v, shift)
            col_cnt[:nc] += (np.abs(q) >= s).astype(np.int64) - (np.abs(v) >= s)
            buf[i, :nc] = r
            buf[nr, :nc] = q
            row_cnt[i] = 0
            row_cnt[nr] = np.count_nonzero(np.abs(q) >= s)
            row_src[nr] = row_src[i]
            row_exp[nr] = row_exp[i] + 1
            nr += 1
        else:
            if nc == cap_c:
                cap_c *= _GROW
                buf = _grow(buf, (cap_r, cap_c))
                col_cnt, col_src, col_exp = (_grow(x, (cap_c,)) for x in (col_cnt, col_src, col_exp))
            v = buf[:nr, j]
            q, r = _tdivmod(v, shift)
            row_cnt[:nr] += (np.abs(q) >= s).astype(np.int64) - (np.abs(v) >= s)
            buf[:nr, j] = r
            buf[:nr, nc] = q
            col_cnt[j] = 0
            col_cnt[nc] = np.count_nonzero(np.abs(q) >= s)
            col_src[nc] = col_src[j]
            col_exp[nc] = col_exp[j] + 1
            nc += 1
    return (
        np.ascontiguousarray(buf[:nr, :nc]),
        row_src[:nr].copy(),
        row_exp[:nr].copy(),
        col_src[:nc].copy(),
        col_exp[:nc].copy(),
    )


def _grow(x, shape):
    out = np.zeros(shape, dtype=x.dtype)
    out[tuple(slice(0, k) for k in x.shape)] = x
    return out
