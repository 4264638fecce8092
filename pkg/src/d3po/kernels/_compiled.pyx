# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel implementations (hot-loop twins of ``_fallback``).

Matrix products here accumulate in plain ascending-k order per output
element, so a row's result never depends on how many other rows share the
batch -- the property the trajectory-replay contract leans on.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, tanh

cnp.import_array()

NAME = "compiled"


def matmul(const double[:, ::1] a, const double[:, ::1] b):
    cdef Py_ssize_t m = a.shape[0], k = a.shape[1], n = b.shape[1]
    out = np.zeros((m, n), dtype=np.float64)
    cdef double[:, ::1] c = out
    cdef Py_ssize_t i, j, l
    cdef double aa
    for i in range(m):
        for l in range(k):
            aa = a[i, l]
            for j in range(n):
                c[i, j] += aa * b[l, j]
    return out


def matmul_nt(const double[:, ::1] a, const double[:, ::1] b):
    cdef Py_ssize_t m = a.shape[0], k = a.shape[1], n = b.shape[0]
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] c = out
    cdef Py_ssize_t i, j, l
    cdef double acc
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for l in range(k):
                acc += a[i, l] * b[j, l]
            c[i, j] = acc
    return out


def matmul_tn(const double[:, ::1] a, const double[:, ::1] b):
    cdef Py_ssize_t k = a.shape[0], m = a.shape[1], n = b.shape[1]
    out = np.zeros((m, n), dtype=np.float64)
    cdef double[:, ::1] c = out
    cdef Py_ssize_t i, j, l
    cdef double al
    for l in range(k):
        for i in range(m):
            al = a[l, i]
            for j in range(n):
                c[i, j] += al * b[l, j]
    return out


def add_rowvec(const double[:, ::1] x, const double[::1] b):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] y = out
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            y[i, j] = x[i, j] + b[j]
    return out


def colsum(const double[:, ::1] x):
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] y = out
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            y[j] += x[i, j]
    return out


cdef _flat(arr):
    return np.ascontiguousarray(arr).reshape(-1)


def tanh_fwd(x):
    out = np.empty(np.shape(x), dtype=np.float64)
    cdef const double[::1] xf = _flat(x)
    cdef double[::1] yf = out.reshape(-1)
    cdef Py_ssize_t i, n = xf.shape[0]
    for i in range(n):
        yf[i] = tanh(xf[i])
    return out


def tanh_bwd(y, gy):
    out = np.empty(np.shape(y), dtype=np.float64)
    cdef const double[::1] yf = _flat(y)
    cdef const double[::1] gf = _flat(gy)
    cdef double[::1] of = out.reshape(-1)
    cdef Py_ssize_t i, n = yf.shape[0]
    for i in range(n):
        of[i] = (1.0 - yf[i] * yf[i]) * gf[i]
    return out


def sqsum(x):
    cdef const double[::1] xf = _flat(x)
    cdef Py_ssize_t i, n = xf.shape[0]
    cdef double acc = 0.0
    for i in range(n):
        acc += xf[i] * xf[i]
    return acc


def sqsum_diff(x, t):
    cdef const double[::1] xf = _flat(x)
    cdef const double[::1] tf = _flat(t)
    cdef Py_ssize_t i, n = xf.shape[0]
    cdef double acc = 0.0, d
    for i in range(n):
        d = xf[i] - tf[i]
        acc += d * d
    return acc


def sqsum_diff_bwd(x, t, double c):
    out = np.empty(np.shape(x), dtype=np.float64)
    cdef const double[::1] xf = _flat(x)
    cdef const double[::1] tf = _flat(t)
    cdef double[::1] of = out.reshape(-1)
    cdef Py_ssize_t i, n = xf.shape[0]
    for i in range(n):
        of[i] = c * (xf[i] - tf[i])
    return out


def submul_scalar(base, double s, x):
    out = np.empty(np.shape(base), dtype=np.float64)
    cdef const double[::1] bf = _flat(base)
    cdef const double[::1] xf = _flat(x)
    cdef double[::1] of = out.reshape(-1)
    cdef Py_ssize_t i, n = bf.shape[0]
    for i in range(n):
        of[i] = bf[i] - s * xf[i]
    return out


def submul_rows(const double[:, ::1] base, const double[::1] scale, const double[:, ::1] x):
    cdef Py_ssize_t m = base.shape[0], n = base.shape[1]
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] y = out
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(m):
        s = scale[i]
        for j in range(n):
            y[i, j] = base[i, j] - s * x[i, j]
    return out


def lincomb(double a, x, double b, y):
    out = np.empty(np.shape(x), dtype=np.float64)
    cdef const double[::1] xf = _flat(x)
    cdef const double[::1] yf = _flat(y)
    cdef double[::1] of = out.reshape(-1)
    cdef Py_ssize_t i, n = xf.shape[0]
    for i in range(n):
        of[i] = a * xf[i] + b * yf[i]
    return out


def scale(x, double s):
    out = np.empty(np.shape(x), dtype=np.float64)
    cdef const double[::1] xf = _flat(x)
    cdef double[::1] of = out.reshape(-1)
    cdef Py_ssize_t i, n = xf.shape[0]
    for i in range(n):
        of[i] = s * xf[i]
    return out


def scale_inplace(x, double s):
    cdef double[::1] xf = x.reshape(-1)
    cdef Py_ssize_t i, n = xf.shape[0]
    for i in range(n):
        xf[i] *= s


def gather_rows(const double[:, ::1] table, idx):
    cdef const long[::1] ix = np.ascontiguousarray(idx, dtype=np.int64)
    cdef Py_ssize_t m = ix.shape[0], n = table.shape[1]
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] y = out
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            y[i, j] = table[ix[i], j]
    return out


def scatter_add_rows(double[:, ::1] acc, idx, const double[:, ::1] g):
    cdef const long[::1] ix = np.ascontiguousarray(idx, dtype=np.int64)
    cdef Py_ssize_t m = ix.shape[0], n = acc.shape[1]
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            acc[ix[i], j] += g[i, j]


def adam_update(p, g, m, v, double lr, double b1, double b2, double eps,
                double bc1, double bc2, double wd):
    cdef double[::1] pf = p.reshape(-1)
    cdef const double[::1] gf = _flat(g)
    cdef double[::1] mf = m.reshape(-1)
    cdef double[::1] vf = v.reshape(-1)
    cdef Py_ssize_t i, n = pf.shape[0]
    cdef double decay = 1.0 - lr * wd
    for i in range(n):
        if wd != 0.0:
            pf[i] *= decay
        mf[i] = b1 * mf[i] + (1.0 - b1) * gf[i]
        vf[i] = b2 * vf[i] + (1.0 - b2) * gf[i] * gf[i]
        pf[i] -= lr * (mf[i] / bc1) / (sqrt(vf[i] / bc2) + eps)
