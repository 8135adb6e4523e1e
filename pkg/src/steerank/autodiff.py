"""Reverse-mode automatic differentiation on float64 arrays.

A ``Tensor`` wraps a C-contiguous float64 ndarray. While a ``Tape`` is
active, every op whose inputs require gradients records a node; the
reverse pass replays nodes in strict reverse construction order, so
gradient accumulation order is deterministic for a fixed graph.

Ops are free functions (``matmul``, ``add``, ``masked_softmax``, ...)
rather than operator overloads; model code composes them explicitly.
The numeric work is delegated to the kernel backend, which is selected
once at import in :mod:`steerank.kernels`.
"""

import numpy as np

from . import kernels as K

_next_tid = 0


def _c(x):
    return np.ascontiguousarray(x, dtype=np.float64)


class Tensor:
    """Value node. ``requires_grad`` marks leaves that accumulate grads."""

    __slots__ = ("data", "tid", "requires_grad", "op_output")

    def __init__(self, data, requires_grad=False):
        global _next_tid
        self.data = _c(data)
        self.tid = _next_tid
        _next_tid += 1
        self.requires_grad = bool(requires_grad)
        self.op_output = False

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        if self.data.size != 1:
            raise ValueError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, tid={self.tid}, rg={self.requires_grad})"


class _Node:
    __slots__ = ("out_tid", "inputs", "backward")

    def __init__(self, out_tid, inputs, backward):
        self.out_tid = out_tid
        self.inputs = inputs  # tuple of input Tensors that require grad
        self.backward = backward  # g_out -> tuple of grads aligned with inputs


_ACTIVE = []


class Tape:
    """Records ops for one forward pass. Use as a context manager."""

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc):
        popped = _ACTIVE.pop()
        assert popped is self
        return False


def _record(out, inputs, backward):
    if not _ACTIVE:
        return out
    tracked = tuple(t for t in inputs if t.requires_grad)
    if not tracked:
        return out
    out.requires_grad = True
    out.op_output = True
    # backward receives g and the full input tuple; wrapper filters to tracked
    _ACTIVE[-1].nodes.append(_Node(out.tid, inputs, backward))
    return out


def grad(loss, sources, tape):
    """Gradients of scalar ``loss`` w.r.t. each tensor in ``sources``.

    Returns a list of float64 arrays shaped like each source (zeros for
    sources the loss does not depend on). Raises if the loss was not
    produced under ``tape``.
    """
    if loss.data.size != 1:
        raise ValueError("loss must be a scalar tensor")
    produced = loss.tid in {n.out_tid for n in tape.nodes}
    if not produced and not (loss.requires_grad and not loss.op_output):
        # op outputs from some other tape are rejected; bare leaves pass
        raise ValueError("loss is not connected to this tape")
    grads = {loss.tid: np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g = grads.get(node.out_tid)
        if g is None:
            continue
        contribs = node.backward(g)
        for t, gc in zip(node.inputs, contribs):
            if gc is None or not t.requires_grad:
                continue
            cur = grads.get(t.tid)
            grads[t.tid] = gc if cur is None else cur + gc
    return [grads.get(s.tid, np.zeros_like(s.data)) for s in sources]


# ---------------------------------------------------------------- ops

def matmul(a, b, transpose_a=False, transpose_b=False):
    if transpose_a and transpose_b:
        raise ValueError("at most one side may be transposed")
    if transpose_a:
        y = Tensor(K.mm_tn(a.data, b.data))

        def bwd(g):
            return (K.mm_nt(b.data, g), K.mm_nn(a.data, g))
    elif transpose_b:
        y = Tensor(K.mm_nt(a.data, b.data))

        def bwd(g):
            return (K.mm_nn(g, b.data), K.mm_tn(g, a.data))
    else:
        y = Tensor(K.mm_nn(a.data, b.data))

        def bwd(g):
            return (K.mm_nt(g, b.data), K.mm_tn(a.data, g))
    return _record(y, (a, b), bwd)


def bmm(a, b, transpose_a=False, transpose_b=False):
    if transpose_a and transpose_b:
        raise ValueError("at most one side may be transposed")
    if transpose_a:
        y = Tensor(K.bmm_tn(a.data, b.data))

        def bwd(g):
            return (K.bmm_nt(b.data, g), K.bmm_nn(a.data, g))
    elif transpose_b:
        y = Tensor(K.bmm_nt(a.data, b.data))

        def bwd(g):
            return (K.bmm_nn(g, b.data), K.bmm_tn(g, a.data))
    else:
        y = Tensor(K.bmm_nn(a.data, b.data))

        def bwd(g):
            return (K.bmm_nt(g, b.data), K.bmm_tn(a.data, g))
    return _record(y, (a, b), bwd)


def add(a, b):
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")
    y = Tensor(K.add(a.data, b.data))
    return _record(y, (a, b), lambda g: (g, g))


def sub(a, b):
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")
    y = Tensor(K.sub(a.data, b.data))
    return _record(y, (a, b), lambda g: (g, K.neg(g)))


def mul(a, b):
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")
    y = Tensor(K.mul(a.data, b.data))
    ad, bd = a.data, b.data
    return _record(y, (a, b), lambda g: (K.mul(g, bd), K.mul(g, ad)))


def neg(a):
    y = Tensor(K.neg(a.data))
    return _record(y, (a,), lambda g: (K.neg(g),))


def scale(a, c):
    c = float(c)
    y = Tensor(K.scale(a.data, c))
    return _record(y, (a,), lambda g: (K.scale(g, c),))


def add_scalar(a, c):
    y = Tensor(K.add_scalar(a.data, float(c)))
    return _record(y, (a,), lambda g: (g,))


def add_bias(x, b):
    """Row-broadcast bias: (m, n) + (1, n)."""
    y = Tensor(K.add_bias(x.data, b.data.reshape(-1)))
    return _record(y, (x, b), lambda g: (g, K.col_sum(g).reshape(1, -1)))


def tanh(a):
    yd = K.tanh_fwd(a.data)
    y = Tensor(yd)
    return _record(y, (a,), lambda g: (K.tanh_bwd(yd, g),))


def sigmoid(a):
    yd = K.sigmoid_fwd(a.data)
    y = Tensor(yd)
    return _record(y, (a,), lambda g: (K.sigmoid_bwd(yd, g),))


def exp(a):
    yd = K.exp_fwd(a.data)
    y = Tensor(yd)
    return _record(y, (a,), lambda g: (K.mul(g, yd),))


def log(a):
    y = Tensor(K.log_fwd(a.data))
    xd = a.data
    return _record(y, (a,), lambda g: (K.log_bwd(xd, g),))


def clip(a, lo, hi):
    lo, hi = float(lo), float(hi)
    y = Tensor(K.clip_fwd(a.data, lo, hi))
    xd = a.data
    return _record(y, (a,), lambda g: (K.clip_bwd(xd, g, lo, hi),))


def sum_all(a):
    y = Tensor(np.array([[K.sum_all(a.data)]]))
    shp = a.data.shape

    def bwd(g):
        return (np.full(shp, float(g.reshape(-1)[0])),)

    return _record(y, (a,), bwd)


def mean_all(a):
    return scale(sum_all(a), 1.0 / a.data.size)


def col_sum(x):
    y = Tensor(K.col_sum(x.data).reshape(1, -1))
    m = x.data.shape[0]

    def bwd(g):
        return (np.repeat(g.reshape(1, -1), m, axis=0),)

    return _record(y, (x,), bwd)


def block_sum(x, bsize):
    """Sum consecutive row blocks: (b*bsize, d) -> (b, d)."""
    m, d = x.data.shape
    if m % bsize:
        raise ValueError(f"{m} rows not divisible by block size {bsize}")
    y = Tensor(x.data.reshape(m // bsize, bsize, d).sum(axis=1))

    def bwd(g):
        return (np.repeat(g, bsize, axis=0),)

    return _record(y, (x,), bwd)


def repeat_rows(x, times):
    """Repeat each row ``times`` times consecutively: (m, d) -> (m*times, d)."""
    y = Tensor(np.repeat(x.data, times, axis=0))
    m, d = x.data.shape

    def bwd(g):
        return (g.reshape(m, times, d).sum(axis=1),)

    return _record(y, (x,), bwd)


def reshape(x, shape):
    y = Tensor(x.data.reshape(shape))
    shp = x.data.shape

    def bwd(g):
        return (_c(g.reshape(shp)),)

    return _record(y, (x,), bwd)


def concat_cols(parts):
    datas = [p.data for p in parts]
    y = Tensor(np.hstack(datas))
    widths = [d.shape[1] for d in datas]

    def bwd(g):
        outs = []
        j = 0
        for w in widths:
            outs.append(_c(g[:, j:j + w]))
            j += w
        return tuple(outs)

    return _record(y, tuple(parts), bwd)


def slice_cols(x, j0, j1):
    y = Tensor(x.data[:, j0:j1])
    shp = x.data.shape

    def bwd(g):
        out = np.zeros(shp)
        out[:, j0:j1] = g
        return (out,)

    return _record(y, (x,), bwd)


def gather_rows(x, idx):
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    y = Tensor(K.gather_rows(x.data, idx))
    nrows = x.data.shape[0]

    def bwd(g):
        return (K.scatter_add_rows(_c(g), idx, nrows),)

    return _record(y, (x,), bwd)


def gather_cols(x, idx):
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    y = Tensor(K.gather_cols(x.data, idx))
    ncols = x.data.shape[1]

    def bwd(g):
        return (K.scatter_add_cols(_c(g), idx, ncols),)

    return _record(y, (x,), bwd)


def take_per_row(p, idx):
    """p[i, idx[i]] for each row, as an (m, 1) column."""
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    y = Tensor(K.take_per_row(p.data, idx).reshape(-1, 1))
    ncols = p.data.shape[1]

    def bwd(g):
        return (K.put_per_row(_c(g.reshape(-1)), idx, ncols),)

    return _record(y, (p,), bwd)


def masked_softmax(s, allowed):
    """Row softmax over allowed entries; disallowed outputs are exactly 0.

    ``allowed`` is a uint8/bool ndarray, not a Tensor; it is constant
    with respect to differentiation. Every row must allow at least one
    entry.
    """
    allowed = np.ascontiguousarray(allowed, dtype=np.uint8)
    if not allowed.any(axis=1).all():
        raise ValueError("masked_softmax: a row has no allowed entries")
    pd = K.masked_softmax_fwd(s.data, allowed)
    y = Tensor(pd)

    def bwd(g):
        return (K.masked_softmax_bwd(pd, _c(g), allowed),)

    return _record(y, (s,), bwd)


# ------------------------------------------------------- finite diff

def finite_diff(f, arrays, eps=1e-5):
    """Central-difference gradients of scalar ``f(arrays)`` per array."""
    grads = []
    for ai, a in enumerate(arrays):
        g = np.zeros_like(a)
        flat = a.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = f(arrays)
            flat[i] = orig - eps
            fm = f(arrays)
            flat[i] = orig
            gf[i] = (fp - fm) / (2.0 * eps)
        grads.append(g)
    return grads
