# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_fallback`` for the reference semantics."""

import numpy as np

from libc.stdint cimport int64_t, uint64_t
from libc.stdlib cimport malloc, free

cdef extern from *:
    ctypedef unsigned long long u128 "unsigned __int128"


cdef inline uint64_t mulmod(uint64_t a, uint64_t b, uint64_t q) noexcept nogil:
    return <uint64_t>((<u128>a * <u128>b) % <u128>q)


cdef inline uint64_t addmod(uint64_t a, uint64_t b, uint64_t q) noexcept nogil:
    cdef uint64_t s = a + b
    if s >= q or s < a:
        s -= q
    return s


cdef inline uint64_t submod(uint64_t a, uint64_t b, uint64_t q) noexcept nogil:
    return a - b if a >= b else a + (q - b)


def apply_gate(state, matrix, targets, int n):
    """In-place gate application on a complex128 statevector; returns it."""
    cdef double complex[::1] psi = state
    cdef double complex[:, ::1] g = np.ascontiguousarray(matrix, dtype=np.complex128)
    if len(targets) == 1:
        _apply1(psi, g, targets[0], n)
    else:
        _apply2(psi, g, targets[0], targets[1], n)
    return state


cdef void _apply1(double complex[::1] psi, double complex[:, ::1] g, int t, int n) noexcept nogil:
    cdef Py_ssize_t size = (<Py_ssize_t>1) << n
    cdef Py_ssize_t m = (<Py_ssize_t>1) << t
    cdef Py_ssize_t i
    cdef double complex a0, a1
    cdef double complex g00 = g[0, 0], g01 = g[0, 1], g10 = g[1, 0], g11 = g[1, 1]
    for i in range(size):
        if i & m:
            continue
        a0 = psi[i]
        a1 = psi[i | m]
        psi[i] = g00 * a0 + g01 * a1
        psi[i | m] = g10 * a0 + g11 * a1


cdef void _apply2(double complex[::1] psi, double complex[:, ::1] g, int t0, int t1, int n) noexcept nogil:
    cdef Py_ssize_t size = (<Py_ssize_t>1) << n
    cdef Py_ssize_t m0 = (<Py_ssize_t>1) << t0
    cdef Py_ssize_t m1 = (<Py_ssize_t>1) << t1
    cdef Py_ssize_t both = m0 | m1
    cdef Py_ssize_t i, r, c
    cdef Py_ssize_t idx[4]
    cdef double complex old[4]
    cdef double complex acc
    for i in range(size):
        if i & both:
            continue
        idx[0] = i
        idx[1] = i | m1
        idx[2] = i | m0
        idx[3] = i | both
        for c in range(4):
            old[c] = psi[idx[c]]
        for r in range(4):
            acc = 0
            for c in range(4):
                acc = acc + g[r, c] * old[c]
            psi[idx[r]] = acc


cdef struct PathCtx:
    int m
    long long ym
    double complex *elems   # concatenated row-major gate matrices
    int *offsets
    int *ntg
    int *tg                 # two target slots per gate
    long long *masks


cdef inline int _local(long long y, int j, PathCtx *ctx) noexcept nogil:
    if ctx.ntg[j] == 1:
        return (y >> ctx.tg[2 * j]) & 1
    return (((y >> ctx.tg[2 * j]) & 1) << 1) | ((y >> ctx.tg[2 * j + 1]) & 1)


cdef inline long long _scatter(long long y, int j, int r, PathCtx *ctx) noexcept nogil:
    y &= ~ctx.masks[j]
    if ctx.ntg[j] == 1:
        return y | (<long long>(r & 1) << ctx.tg[2 * j])
    return y | (<long long>((r >> 1) & 1) << ctx.tg[2 * j]) | (<long long>(r & 1) << ctx.tg[2 * j + 1])


cdef double complex _visit(int j, long long y, PathCtx *ctx) noexcept nogil:
    cdef int dim = 1 << ctx.ntg[j]
    cdef int c = _local(y, j, ctx)
    cdef double complex *g = ctx.elems + ctx.offsets[j]
    cdef double complex total = 0
    cdef double complex e
    cdef int r
    if j == ctx.m - 1:
        if (y & ~ctx.masks[j]) != (ctx.ym & ~ctx.masks[j]):
            return 0
        return g[_local(ctx.ym, j, ctx) * dim + c]
    for r in range(dim):
        e = g[r * dim + c]
        if e != 0:
            total = total + e * _visit(j + 1, _scatter(y, j, r, ctx), ctx)
    return total


def pathsum_amplitude(mats, targets, int n, long long y0, long long ym):
    cdef int m = len(mats)
    if m == 0:
        return complex(y0 == ym)
    flat = np.ascontiguousarray(
        np.concatenate([np.asarray(g, dtype=np.complex128).ravel() for g in mats])
    )
    cdef double complex[::1] flat_v = flat
    cdef PathCtx ctx
    cdef int j, off = 0
    ctx.m = m
    ctx.ym = ym
    ctx.elems = &flat_v[0]
    ctx.offsets = <int *>malloc(m * sizeof(int))
    ctx.ntg = <int *>malloc(m * sizeof(int))
    ctx.tg = <int *>malloc(2 * m * sizeof(int))
    ctx.masks = <long long *>malloc(m * sizeof(long long))
    try:
        for j in range(m):
            tgj = targets[j]
            ctx.offsets[j] = off
            ctx.ntg[j] = len(tgj)
            ctx.tg[2 * j] = tgj[0]
            ctx.tg[2 * j + 1] = tgj[1] if len(tgj) == 2 else 0
            ctx.masks[j] = 0
            for t in tgj:
                ctx.masks[j] |= (<long long>1) << t
            off += (1 << len(tgj)) ** 2
        with nogil:
            result = _visit(0, y0, &ctx)
    finally:
        free(ctx.offsets)
        free(ctx.ntg)
        free(ctx.tg)
        free(ctx.masks)
    return complex(result)


def permanent_mod(matrix, q):
    """Ryser's formula over F_q, q < 2**64, Gray-code order."""
    cdef uint64_t mod = int(q)
    a_obj = np.asarray(matrix, dtype=object)
    cdef int n = a_obj.shape[0]
    if n == 0:
        return 1 % int(q)
    a_np = np.array([[int(v) % int(q) for v in row] for row in a_obj], dtype=np.uint64)
    cdef uint64_t[:, ::1] a = a_np
    cdef uint64_t[::1] rs = np.zeros(n, dtype=np.uint64)
    cdef uint64_t total = 0, prod
    cdef long long i, g, prev = 0, diff
    cdef int col, k, size = 0
    cdef bint added
    with nogil:
        for i in range(1, (<long long>1) << n):
            g = i ^ (i >> 1)
            diff = g ^ prev
            col = 0
            while (diff >> col) != 1:
                col += 1
            added = (g & diff) != 0
            prev = g
            if added:
                size += 1
                for k in range(n):
                    rs[k] = addmod(rs[k], a[k, col], mod)
            else:
                size -= 1
                for k in range(n):
                    rs[k] = submod(rs[k], a[k, col], mod)
            prod = 1 % mod
            for k in range(n):
                prod = mulmod(prod, rs[k], mod)
                if prod == 0:
                    break
            if size % 2:
                total = submod(total, prod, mod)
            else:
                total = addmod(total, prod, mod)
    if n % 2:
        total = submod(0, total, mod)
    return int(total)


def permanent_complex(matrix):
    cdef double complex[:, ::1] a = np.ascontiguousarray(matrix, dtype=np.complex128)
    cdef int n = a.shape[0]
    if n == 0:
        return 1 + 0j
    cdef double complex[::1] rs = np.zeros(n, dtype=np.complex128)
    cdef double complex total = 0, prod
    cdef long long i, g, prev = 0, diff
    cdef int col, k, size = 0
    with nogil:
        for i in range(1, (<long long>1) << n):
            g = i ^ (i >> 1)
            diff = g ^ prev
            col = 0
            while (diff >> col) != 1:
                col += 1
            prev = g
            if g & diff:
                size += 1
                for k in range(n):
                    rs[k] = rs[k] + a[k, col]
            else:
                size -= 1
                for k in range(n):
                    rs[k] = rs[k] - a[k, col]
            prod = 1
            for k in range(n):
                prod = prod * rs[k]
            if size % 2:
                total = total - prod
            else:
                total = total + prod
    if n % 2:
        total = -total
    return complex(total)


def rref_mod(matrix, q):
    """Reduced row echelon form over F_q, q < 2**64."""
    cdef uint64_t mod = int(q)
    a_np = np.array([[int(v) % int(q) for v in row] for row in matrix], dtype=np.uint64)
    if a_np.ndim != 2:
        a_np = a_np.reshape(len(matrix), -1)
    cdef uint64_t[:, ::1] a = a_np
    cdef Py_ssize_t rows = a.shape[0], cols = a.shape[1]
    cdef Py_ssize_t r = 0, c, i, j, p
    cdef uint64_t inv, f, tmp
    pivots = []
    for c in range(cols):
        if r == rows:
            break
        p = -1
        for i in range(r, rows):
            if a[i, c] != 0:
                p = i
                break
        if p < 0:
            continue
        if p != r:
            for j in range(cols):
                tmp = a[r, j]
                a[r, j] = a[p, j]
                a[p, j] = tmp
        inv = pow(int(a[r, c]), -1, int(q))
        with nogil:
            for j in range(cols):
                a[r, j] = mulmod(a[r, j], inv, mod)
            for i in range(rows):
                if i == r:
                    continue
                f = a[i, c]
                if f == 0:
                    continue
                for j in range(cols):
                    a[i, j] = submod(a[i, j], mulmod(f, a[r, j], mod), mod)
        pivots.append(c)
        r += 1
    return a_np.astype(object), pivots
