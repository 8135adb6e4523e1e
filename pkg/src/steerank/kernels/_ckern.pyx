# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementations of the hot numeric kernels.

Mirrors the calling convention of ``_npkern``: float64 C-contiguous
arrays in, fresh arrays out. Only the kernels where a C loop actually
beats numpy live here: masking, gathers/scatters, per-row picks, bias
adds, column reductions, and fused backward arithmetic, where numpy
pays per-op dispatch and temporary costs. Dense matmuls go straight
to BLAS and the heavy transcendental forwards (tanh, exp, log) to
numpy's vectorized loops; a naive C translation of those is several
times slower, so delegating is the honest choice.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp as c_exp

cnp.import_array()

NAME = "cython"


# Dense algebra: BLAS through numpy. The wrapper keeps the backend
# surface uniform so callers never know which side serves a kernel.

def mm_nn(a, b):
    return a @ b


def mm_nt(a, b):
    return a @ b.T


def mm_tn(a, b):
    return a.T @ b


def bmm_nn(a, b):
    return np.matmul(a, b)


def bmm_nt(a, b):
    return np.matmul(a, np.swapaxes(b, 1, 2))


def bmm_tn(a, b):
    return np.matmul(np.swapaxes(a, 1, 2), b)


cdef inline object _flat(object x):
    return np.ravel(x, order="C")


def add(a, b):
    fa = _flat(a); fb = _flat(b)
    out_arr = np.empty(a.shape, dtype=np.float64)
    cdef double[::1] x = fa, y = fb, out = _flat(out_arr)
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        out[i] = x[i] + y[i]
    return out_arr


def sub(a, b):
    fa = _flat(a); fb = _flat(b)
    out_arr = np.empty(a.shape, dtype=np.float64)
    cdef double[::1] x = fa, y = fb, out = _flat(out_arr)
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        out[i] = x[i] - y[i]
    return out_arr


def mul(a, b):
    fa = _flat(a); fb = _flat(b)
    out_arr = np.empty(a.shape, dtype=np.float64)
    cdef double[::1] x = fa, y = fb, out = _flat(out_arr)
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        out[i] = x[i] * y[i]
    return out_arr


def neg(a):
    fa = _flat(a)
    out_arr = np.empty(a.shape, dtype=np.float64)
    cdef double[::1] x = fa, out = _flat(out_arr)
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        out[i] = -x[i]
    return out_arr


def scale(a, double c):
    fa = _flat(a)
    out_arr = np.empty(a.shape, dtype=np.float64)
    cdef double[::1] x = fa, out = _flat(out_arr)
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        out[i] = x[i] * c
    return out_arr


def add_scalar(a, double c):
    fa = _flat(a)
    out_arr = np.empty(a.shape, dtype=np.float64)
    cdef double[::1] x = fa, out = _flat(out_arr)
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        out[i] = x[i] + c
    return out_arr


def add_bias(double[:, ::1] x, double[::1] b):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    out_arr = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            out[i, j] = x[i, j] + b[j]
    return out_arr


def col_sum(double[:, ::1] x):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            out[j] += x[i, j]
    return out_arr


def sum_all(a):
    fa = _flat(a)
    cdef double[::1] x = fa
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        acc += x[i]
    return acc


def tanh_fwd(a):
    return np.tanh(a)


def tanh_bwd(y, g):
    fy = _flat(y); fg = _flat(g)
    out_arr = np.empty(y.shape, dtype=np.float64)
    cdef double[::1] yy = fy, gg = fg, out = _flat(out_arr)
    cdef Py_ssize_t i
    for i in range(yy.shape[0]):
        out[i] = gg[i] * (1.0 - yy[i] * yy[i])
    return out_arr


def sigmoid_fwd(a):
    fa = _flat(a)
    out_arr = np.empty(a.shape, dtype=np.float64)
    cdef double[::1] x = fa, out = _flat(out_arr)
    cdef Py_ssize_t i
    cdef double v, e
    for i in range(x.shape[0]):
        v = x[i]
        if v >= 0.0:
            out[i] = 1.0 / (1.0 + c_exp(-v))
        else:
            e = c_exp(v)
            out[i] = e / (1.0 + e)
    return out_arr


def sigmoid_bwd(y, g):
    fy = _flat(y); fg = _flat(g)
    out_arr = np.empty(y.shape, dtype=np.float64)
    cdef double[::1] yy = fy, gg = fg, out = _flat(out_arr)
    cdef Py_ssize_t i
    for i in range(yy.shape[0]):
        out[i] = gg[i] * yy[i] * (1.0 - yy[i])
    return out_arr


def exp_fwd(a):
    return np.exp(a)


def log_fwd(a):
    return np.log(a)


def log_bwd(x, g):
    fx = _flat(x); fg = _flat(g)
    out_arr = np.empty(x.shape, dtype=np.float64)
    cdef double[::1] xx = fx, gg = fg, out = _flat(out_arr)
    cdef Py_ssize_t i
    for i in range(xx.shape[0]):
        out[i] = gg[i] / xx[i]
    return out_arr


def clip_fwd(a, double lo, double hi):
    fa = _flat(a)
    out_arr = np.empty(a.shape, dtype=np.float64)
    cdef double[::1] x = fa, out = _flat(out_arr)
    cdef Py_ssize_t i
    cdef double v
    for i in range(x.shape[0]):
        v = x[i]
        out[i] = lo if v < lo else (hi if v > hi else v)
    return out_arr


def clip_bwd(x, g, double lo, double hi):
    fx = _flat(x); fg = _flat(g)
    out_arr = np.empty(x.shape, dtype=np.float64)
    cdef double[::1] xx = fx, gg = fg, out = _flat(out_arr)
    cdef Py_ssize_t i
    cdef double v
    for i in range(xx.shape[0]):
        v = xx[i]
        out[i] = gg[i] if (v >= lo and v <= hi) else 0.0
    return out_arr


def masked_softmax_fwd(double[:, ::1] s, cnp.uint8_t[:, ::1] allowed):
    cdef Py_ssize_t m = s.shape[0], n = s.shape[1]
    out_arr = np.zeros((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double mx, tot, e
    cdef bint any_allowed
    for i in range(m):
        any_allowed = False
        mx = 0.0
        for j in range(n):
            if allowed[i, j]:
                if not any_allowed or s[i, j] > mx:
                    mx = s[i, j]
                any_allowed = True
        tot = 0.0
        for j in range(n):
            if allowed[i, j]:
                e = c_exp(s[i, j] - mx)
                out[i, j] = e
                tot += e
        for j in range(n):
            if allowed[i, j]:
                out[i, j] /= tot
    return out_arr


def masked_softmax_bwd(double[:, ::1] p, double[:, ::1] g, cnp.uint8_t[:, ::1] allowed):
    cdef Py_ssize_t m = p.shape[0], n = p.shape[1]
    out_arr = np.zeros((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double dot
    for i in range(m):
        dot = 0.0
        for j in range(n):
            dot += p[i, j] * g[i, j]
        for j in range(n):
            if allowed[i, j]:
                out[i, j] = p[i, j] * (g[i, j] - dot)
    return out_arr


def gather_rows(double[:, ::1] x, cnp.int64_t[::1] idx):
    cdef Py_ssize_t q = idx.shape[0], d = x.shape[1]
    out_arr = np.empty((q, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, r
    for i in range(q):
        r = idx[i]
        for j in range(d):
            out[i, j] = x[r, j]
    return out_arr


def scatter_add_rows(double[:, ::1] g, cnp.int64_t[::1] idx, Py_ssize_t nrows):
    cdef Py_ssize_t q = g.shape[0], d = g.shape[1]
    out_arr = np.zeros((nrows, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, r
    for i in range(q):
        r = idx[i]
        for j in range(d):
            out[r, j] += g[i, j]
    return out_arr


def gather_cols(double[:, ::1] x, cnp.int64_t[::1] idx):
    cdef Py_ssize_t m = x.shape[0], q = idx.shape[0]
    out_arr = np.empty((m, q), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(q):
            out[i, j] = x[i, idx[j]]
    return out_arr


def scatter_add_cols(double[:, ::1] g, cnp.int64_t[::1] idx, Py_ssize_t ncols):
    cdef Py_ssize_t m = g.shape[0], q = g.shape[1]
    out_arr = np.zeros((m, ncols), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(q):
            out[i, idx[j]] += g[i, j]
    return out_arr


def take_per_row(double[:, ::1] x, cnp.int64_t[::1] idx):
    cdef Py_ssize_t m = x.shape[0]
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    for i in range(m):
        out[i] = x[i, idx[i]]
    return out_arr


def put_per_row(double[::1] g, cnp.int64_t[::1] idx, Py_ssize_t ncols):
    cdef Py_ssize_t m = g.shape[0]
    out_arr = np.zeros((m, ncols), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i
    for i in range(m):
        out[i, idx[i]] = g[i]
    return out_arr
