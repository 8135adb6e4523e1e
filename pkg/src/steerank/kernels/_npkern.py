"""Numpy implementations of the hot numeric kernels.

This is the fallback backend used when the compiled extension is
unavailable. Both backends share one calling convention: float64
C-contiguous arrays in, freshly allocated arrays out.
"""

import numpy as np

NAME = "numpy"


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


def add(a, b):
    return a + b


def sub(a, b):
    return a - b


def mul(a, b):
    return a * b


def neg(a):
    return -a


def scale(a, c):
    return a * c


def add_scalar(a, c):
    return a + c


def add_bias(x, b):
    return x + b


def col_sum(x):
    return x.sum(axis=0)


def sum_all(x):
    return float(x.sum())


def tanh_fwd(x):
    return np.tanh(x)


def tanh_bwd(y, g):
    return g * (1.0 - y * y)


def sigmoid_fwd(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_bwd(y, g):
    return g * y * (1.0 - y)


def exp_fwd(x):
    return np.exp(x)


def log_fwd(x):
    return np.log(x)


def log_bwd(x, g):
    return g / x


def clip_fwd(x, lo, hi):
    return np.clip(x, lo, hi)


def clip_bwd(x, g, lo, hi):
    return np.where((x >= lo) & (x <= hi), g, 0.0)


def masked_softmax_fwd(s, allowed):
    """Row softmax restricted to allowed entries; disallowed entries exactly 0."""
    allowed = allowed.astype(bool, copy=False)
    shifted = np.where(allowed, s, -np.inf)
    m = shifted.max(axis=1, keepdims=True)
    e = np.where(allowed, np.exp(shifted - m), 0.0)
    return e / e.sum(axis=1, keepdims=True)


def masked_softmax_bwd(p, g, allowed):
    allowed = allowed.astype(bool, copy=False)
    dot = (p * g).sum(axis=1, keepdims=True)
    return np.where(allowed, p * (g - dot), 0.0)


def gather_rows(x, idx):
    return x[idx]


def scatter_add_rows(g, idx, nrows):
    out = np.zeros((nrows,) + g.shape[1:], dtype=np.float64)
    np.add.at(out, idx, g)
    return out


def gather_cols(x, idx):
    return np.ascontiguousarray(x[:, idx])


def scatter_add_cols(g, idx, ncols):
    out = np.zeros((g.shape[0], ncols), dtype=np.float64)
    np.add.at(out, (slice(None), idx), g)
    return out


def take_per_row(x, idx):
    return x[np.arange(x.shape[0]), idx]


def put_per_row(g, idx, ncols):
    out = np.zeros((g.shape[0], ncols), dtype=np.float64)
    out[np.arange(g.shape[0]), idx] = g
    return out
