# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. ``cdivision`` gives C's truncating ``/`` and ``%``,
which is exactly the digit convention used everywhere else."""
import numpy as np

from libc.stdint cimport int64_t


cdef inline int64_t _abs(int64_t v) noexcept nogil:
    return -v if v < 0 else v


def gemm_nt(const int64_t[:, ::1] A, const int64_t[:, ::1] B):
    """``A @ B.T`` with an int64 accumulator (caller guarantees no overflow)."""
    cdef Py_ssize_t n = A.shape[0], d = A.shape[1], h = B.shape[0]
    cdef Py_ssize_t i, j, k
    cdef int64_t acc
    out = np.zeros((n, h), dtype=np.int64)
    cdef int64_t[:, ::1] C = out
    with nogil:
        for i in range(n):
            for j in range(h):
                acc = 0
                for k in range(d):
                    acc = acc + A[i, k] * B[j, k]
                C[i, j] = acc
    return out


def split_rows(const int64_t[:, ::1] A, int shift):
    """Row unpacking in one pass.

    The number of extra rows a row needs depends only on its largest
    magnitude, so output positions are computed up front and each row is
    decomposed digit by digit straight into place.
    """
    cdef Py_ssize_t n = A.shape[0], d = A.shape[1]
    cdef int64_t s = (<int64_t>1) << shift
    cdef Py_ssize_t i, k, g, pos, total, max_gen = 0
    cdef int64_t m, v, q
    gens_arr = np.zeros(n, dtype=np.int64)
    cdef int64_t[::1] gens = gens_arr
    for i in range(n):
        m = 0
        for k in range(d):
            if _abs(A[i, k]) > m:
                m = _abs(A[i, k])
        g = 0
        while m >= s:
            m = m >> shift
            g += 1
        gens[i] = g
        if g > max_gen:
            max_gen = g
    # count[g] = rows needing at least g extra rows; offsets are generation-major
    count_arr = np.zeros(max_gen + 2, dtype=np.int64)
    cdef int64_t[::1] count = count_arr
    for i in range(n):
        for g in range(1, gens[i] + 1):
            count[g] += 1
    offset_arr = np.zeros(max_gen + 2, dtype=np.int64)
    cdef int64_t[::1] offset = offset_arr
    total = n
    for g in range(1, max_gen + 1):
        offset[g] = total
        total += count[g]
    out = np.zeros((total, d), dtype=np.int64)
    src_arr = np.zeros(total, dtype=np.int64)
    exp_arr = np.zeros(total, dtype=np.int64)
    cdef int64_t[:, ::1] U = out
    cdef int64_t[::1] src = src_arr
    cdef int64_t[::1] ex = exp_arr
    fill_arr = np.zeros(max_gen + 2, dtype=np.int64)
    cdef int64_t[::1] fill = fill_arr
    cdef Py_ssize_t prev
    with nogil:
        for i in range(n):
            src[i] = i
            for k in range(d):
                U[i, k] = A[i, k]
            prev = i
            for g in range(1, gens[i] + 1):
                pos = offset[g] + fill[g]
                fill[g] += 1
                src[pos] = i
                ex[pos] = g
                for k in range(d):
                    v = U[prev, k]
                    q = v / s
                    U[prev, k] = v - q * s
                    U[pos, k] = q
                prev = pos
    return out, src_arr, exp_arr


cdef class _Grid:
    """Growable row-major int64 grid with per-row/per-column bookkeeping."""
    cdef public object buf, row_cnt, col_cnt, row_src, row_exp, col_src, col_exp
    cdef public Py_ssize_t cap_r, cap_c

    def __init__(self, Py_ssize_t cap_r, Py_ssize_t cap_c):
        self.cap_r = cap_r
        self.cap_c = cap_c
        self.buf = np.zeros((cap_r, cap_c), dtype=np.int64)
        self.row_cnt = np.zeros(cap_r, dtype=np.int64)
        self.row_src = np.zeros(cap_r, dtype=np.int64)
        self.row_exp = np.zeros(cap_r, dtype=np.int64)
        self.col_cnt = np.zeros(cap_c, dtype=np.int64)
        self.col_src = np.zeros(cap_c, dtype=np.int64)
        self.col_exp = np.zeros(cap_c, dtype=np.int64)

    def grow_rows(self):
        self.cap_r *= 2
        self.buf = _grow2(self.buf, self.cap_r, self.cap_c)
        self.row_cnt = _grow1(self.row_cnt, self.cap_r)
        self.row_src = _grow1(self.row_src, self.cap_r)
        self.row_exp = _grow1(self.row_exp, self.cap_r)

    def grow_cols(self):
        self.cap_c *= 2
        self.buf = _grow2(self.buf, self.cap_r, self.cap_c)
        self.col_cnt = _grow1(self.col_cnt, self.cap_c)
        self.col_src = _grow1(self.col_src, self.cap_c)
        self.col_exp = _grow1(self.col_exp, self.cap_c)


def _grow1(x, Py_ssize_t n):
    out = np.zeros(n, dtype=np.int64)
    out[: x.shape[0]] = x
    return out


def _grow2(x, Py_ssize_t r, Py_ssize_t c):
    out = np.zeros((r, c), dtype=np.int64)
    out[: x.shape[0], : x.shape[1]] = x
    return out


cdef Py_ssize_t _argmax(int64_t[::1] a, Py_ssize_t n, int64_t* best) noexcept nogil:
    cdef Py_ssize_t i, arg = 0
    best[0] = a[0]
    for i in range(1, n):
        if a[i] > best[0]:
            best[0] = a[i]
            arg = i
    return arg


def unpack_both(const int64_t[:, ::1] A, const int64_t[::1] col_exps, int shift):
    """Greedy row/column unpacking driven by OB counts.

    Returns ``(A_u, row_src, row_exps, col_src, col_exps)``.
    """
    cdef Py_ssize_t n = A.shape[0], d = A.shape[1]
    cdef int64_t s = (<int64_t>1) << shift
    cdef Py_ssize_t i, j, k, nr = n, nc = d, cnt
    cdef int64_t c0, c1, v, q, r
    grid = _Grid(max(n, 1) * 2, max(d, 1) * 2)
    cdef int64_t[:, ::1] buf = grid.buf
    cdef int64_t[::1] row_cnt = grid.row_cnt
    cdef int64_t[::1] col_cnt = grid.col_cnt
    cdef int64_t[::1] row_src = grid.row_src
    cdef int64_t[::1] row_exp = grid.row_exp
    cdef int64_t[::1] col_src = grid.col_src
    cdef int64_t[::1] col_exp = grid.col_exp
    for i in range(n):
        row_src[i] = i
        for k in range(d):
            buf[i, k] = A[i, k]
            if _abs(A[i, k]) >= s:
                row_cnt[i] += 1
                col_cnt[k] += 1
    for k in range(d):
        col_src[k] = k
        col_exp[k] = col_exps[k]
    while nr > 0 and nc > 0:
        i = _argmax(row_cnt, nr, &c0)
        j = _argmax(col_cnt, nc, &c1)
        if c0 == 0 and c1 == 0:
            break
        if c0 >= c1:
            if nr == grid.cap_r:
                grid.grow_rows()
                buf = grid.buf
                row_cnt = grid.row_cnt
                row_src = grid.row_src
                row_exp = grid.row_exp
            cnt = 0
            for k in range(nc):
                v = buf[i, k]
                q = v / s
                r = v - q * s
                buf[i, k] = r
                buf[nr, k] = q
                if _abs(v) >= s:
                    col_cnt[k] -= 1
                if _abs(q) >= s:
                    col_cnt[k] += 1
                    cnt += 1
            row_cnt[i] = 0
            row_cnt[nr] = cnt
            row_src[nr] = row_src[i]
            row_exp[nr] = row_exp[i] + 1
            nr += 1
        else:
            if nc == grid.cap_c:
                grid.grow_cols()
                buf = grid.buf
                col_cnt = grid.col_cnt
                col_src = grid.col_src
                col_exp = grid.col_exp
            cnt = 0
            for k in range(nr):
                v = buf[k, j]
                q = v / s
                r = v - q * s
                buf[k, j] = r
                buf[k, nc] = q
                if _abs(v) >= s:
                    row_cnt[k] -= 1
                if _abs(q) >= s:
                    row_cnt[k] += 1
                    cnt += 1
            col_cnt[j] = 0
            col_cnt[nc] = cnt
            col_src[nc] = col_src[j]
            col_exp[nc] = col_exp[j] + 1
            nc += 1
    return (
        np.ascontiguousarray(grid.buf[:nr, :nc]),
        grid.row_src[:nr].copy(),
        grid.row_exp[:nr].copy(),
        grid.col_src[:nc].copy(),
        grid.col_exp[:nc].copy(),
    )
