"""Pure-numpy kernel implementations.

Every function here has a compiled twin in ``_compiled.pyx`` with identical
semantics; ``d3po.kernels`` picks one set at import time.  All arrays are
C-contiguous float64.  The two backends agree to floating-point roundoff but
not bitwise (BLAS reorders accumulation), so nothing in the repo may rely on
cross-backend bit equality.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def matmul(a, b):
    return a @ b


def matmul_nt(a, b):
    return a @ b.T


def matmul_tn(a, b):
    return a.T @ b


def add_rowvec(x, b):
    return x + b


def colsum(x):
    return x.sum(axis=0)


def tanh_fwd(x):
    return np.tanh(x)


def tanh_bwd(y, gy):
    return (1.0 - y * y) * gy


def sqsum(x):
    return float(np.dot(x.ravel(), x.ravel()))


def sqsum_diff(x, t):
    d = (x - t).ravel()
    return float(np.dot(d, d))


def sqsum_diff_bwd(x, t, c):
    return c * (x - t)


def submul_scalar(base, s, x):
    return base - s * x


def submul_rows(base, scale, x):
    return base - scale[:, None] * x


def lincomb(a, x, b, y):
    return a * x + b * y


def scale(x, s):
    return s * x


def scale_inplace(x, s):
    x *= s


def gather_rows(table, idx):
    return table[idx]


def scatter_add_rows(acc, idx, g):
    np.add.at(acc, idx, g)


def adam_update(p, g, m, v, lr, b1, b2, eps, bc1, bc2, wd):
    """Fused decoupled-weight-decay Adam update, in place on p, m, v.

    bc1/bc2 are the bias corrections 1-b1^t and 1-b2^t for the step being
    applied; weight decay multiplies p by (1 - lr*wd) before the moment step.
    """
    if wd != 0.0:
        p *= 1.0 - lr * wd
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * (g * g)
    p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
