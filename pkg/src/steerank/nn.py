"""Layer primitives over the autodiff substrate.

ParamStore holds named tensors in insertion order (iteration order is
the serialization order, so construction must be deterministic). MLP,
GRU and attention builders register parameters under a name prefix;
the matching ``*_params`` helpers pull them back out so forward code
can also run on generated (non-leaf) tensors.
"""

import math

import numpy as np

from . import autodiff as ad


class ParamStore:
    """Ordered name -> Tensor map. Names must be unique."""

    def __init__(self):
        self._t = {}

    def add(self, name, array):
        """Register a trainable leaf tensor."""
        if name in self._t:
            raise ValueError(f"duplicate parameter name: {name}")
        t = ad.Tensor(array, requires_grad=True)
        self._t[name] = t
        return t

    def put(self, name, tensor):
        """Register an existing tensor (e.g. a generated parameter)."""
        if name in self._t:
            raise ValueError(f"duplicate parameter name: {name}")
        self._t[name] = tensor
        return tensor

    def get(self, name):
        return self._t[name]

    def __contains__(self, name):
        return name in self._t

    def __len__(self):
        return len(self._t)

    def names(self):
        return list(self._t.keys())

    def items(self):
        return list(self._t.items())

    def tensors(self):
        return list(self._t.values())

    def arrays(self):
        return {k: t.data for k, t in self._t.items()}

    def load_arrays(self, arrays):
        """Overwrite values in place; shapes must match exactly."""
        for name, arr in arrays.items():
            t = self._t[name]
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ValueError(
                    f"shape mismatch for {name}: {arr.shape} vs {t.data.shape}"
                )
            t.data = arr

    def total_size(self):
        return sum(t.data.size for t in self._t.values())


def uniform_fan_in(rng, shape, fan_in=None):
    """uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init."""
    if fan_in is None:
        fan_in = shape[0]
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


# ------------------------------------------------------------- MLP

def mlp_init(store, prefix, sizes, rng):
    """Register an MLP with layer widths ``sizes``; returns param pairs."""
    layers = []
    for i in range(len(sizes) - 1):
        w = store.add(f"{prefix}/w{i}", uniform_fan_in(rng, (sizes[i], sizes[i + 1])))
        b = store.add(f"{prefix}/b{i}", np.zeros((1, sizes[i + 1])))
        layers.append((w, b))
    return layers


def mlp_params(store, prefix):
    layers = []
    i = 0
    while f"{prefix}/w{i}" in store:
        layers.append((store.get(f"{prefix}/w{i}"), store.get(f"{prefix}/b{i}")))
        i += 1
    if not layers:
        raise KeyError(f"no MLP parameters under prefix {prefix!r}")
    return layers


def mlp_shapes(sizes):
    """(name_suffix, shape) pairs an MLP of these widths registers."""
    out = []
    for i in range(len(sizes) - 1):
        out.append((f"w{i}", (sizes[i], sizes[i + 1])))
        out.append((f"b{i}", (1, sizes[i + 1])))
    return out


def mlp_apply(layers, x, out_activation=None):
    """Affine chain with tanh hidden activations.

    ``out_activation``: None for identity, or "tanh"/"sigmoid".
    """
    h = x
    last = len(layers) - 1
    for i, (w, b) in enumerate(layers):
        h = ad.add_bias(ad.matmul(h, w), b)
        if i < last:
            h = ad.tanh(h)
        elif out_activation == "tanh":
            h = ad.tanh(h)
        elif out_activation == "sigmoid":
            h = ad.sigmoid(h)
    return h


# ------------------------------------------------------------- GRU

_GRU_SUFFIXES = ("wxr", "whr", "br", "wxz", "whz", "bz", "wxn", "whn", "bn")


def gru_init(store, prefix, in_dim, hid_dim, rng):
    shapes = gru_shapes(in_dim, hid_dim)
    for suffix, shape in shapes:
        if suffix.startswith("b"):
            store.add(f"{prefix}/{suffix}", np.zeros(shape))
        else:
            store.add(f"{prefix}/{suffix}", uniform_fan_in(rng, shape))
    return gru_params(store, prefix)


def gru_shapes(in_dim, hid_dim):
    out = []
    for suffix in _GRU_SUFFIXES:
        if suffix.startswith("b"):
            out.append((suffix, (1, hid_dim)))
        elif suffix.startswith("wx"):
            out.append((suffix, (in_dim, hid_dim)))
        else:
            out.append((suffix, (hid_dim, hid_dim)))
    return out


def gru_params(store, prefix):
    return {s: store.get(f"{prefix}/{s}") for s in _GRU_SUFFIXES}


def gru_step(p, h, x):
    """One gated-recurrent update; h and x are (batch, dim) tensors.

    With all parameters zero this returns 0.5*h: both gates sit at
    sigma(0) = 0.5 and the candidate state at tanh(0) = 0.
    """
    r = ad.sigmoid(ad.add_bias(ad.add(ad.matmul(x, p["wxr"]), ad.matmul(h, p["whr"])), p["br"]))
    z = ad.sigmoid(ad.add_bias(ad.add(ad.matmul(x, p["wxz"]), ad.matmul(h, p["whz"])), p["bz"]))
    n = ad.tanh(ad.add_bias(ad.add(ad.matmul(x, p["wxn"]), ad.mul(r, ad.matmul(h, p["whn"]))), p["bn"]))
    # h' = z*h + (1-z)*n, written without a constant-ones tensor
    return ad.add(ad.mul(z, h), ad.sub(n, ad.mul(z, n)))


# ------------------------------------------------- self-attention

def mhsa_pooled(x3, wq, wk, wv, heads):
    """Multi-head scaled-dot-product self-attention, sum-pooled.

    x3: (B, N, d) tensor. Projections wq/wk/wv: (d, p) with p divisible
    by ``heads``. Per head: softmax(Q Kt / sqrt(p/heads)) V. Head
    outputs are concatenated and summed over the N positions, giving
    (B, p). There is no output projection.
    """
    b, n, d = x3.shape
    p = wq.shape[1]
    if p % heads:
        raise ValueError(f"projection width {p} not divisible by {heads} heads")
    hw = p // heads
    x2 = ad.reshape(x3, (b * n, d))
    q = ad.matmul(x2, wq)
    k = ad.matmul(x2, wk)
    v = ad.matmul(x2, wv)
    all_allowed = np.ones((b * n, n), dtype=np.uint8)
    outs = []
    for hh in range(heads):
        j0, j1 = hh * hw, (hh + 1) * hw
        q3 = ad.reshape(ad.slice_cols(q, j0, j1), (b, n, hw))
        k3 = ad.reshape(ad.slice_cols(k, j0, j1), (b, n, hw))
        v3 = ad.reshape(ad.slice_cols(v, j0, j1), (b, n, hw))
        scores = ad.scale(ad.bmm(q3, k3, transpose_b=True), 1.0 / math.sqrt(hw))
        probs = ad.masked_softmax(ad.reshape(scores, (b * n, n)), all_allowed)
        o3 = ad.bmm(ad.reshape(probs, (b, n, n)), v3)
        outs.append(ad.reshape(o3, (b * n, hw)))
    concat = outs[0] if len(outs) == 1 else ad.concat_cols(outs)
    return ad.block_sum(concat, n)


def multi_head_self_attention(e, wq, wk, wv, heads):
    """Single-sequence wrapper: e is (N, d); returns a (1, p) row."""
    n, d = e.shape
    x3 = ad.reshape(e, (1, n, d))
    return mhsa_pooled(x3, wq, wk, wv, heads)


# ------------------------------------------------------ optimizer

def clip_global_norm(grads, cap):
    """Scale the whole gradient set so its global L2 norm is <= cap."""
    if cap <= 0:
        raise ValueError("clip cap must be positive")
    total = 0.0
    for g in grads.values():
        total += float((g * g).sum())
    norm = math.sqrt(total)
    if not math.isfinite(cap) or norm <= cap:
        return dict(grads), norm
    s = cap / norm
    return {k: g * s for k, g in grads.items()}, norm


class Adam:
    """Adam with bias correction; state keyed by parameter name."""

    def __init__(self, store, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {}
        self._v = {}

    def step(self, grads):
        """Apply one update using ``grads`` (name -> array)."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for name, g in grads.items():
            t = self.store.get(name)
            m = self._m.get(name)
            if m is None:
                m = np.zeros_like(t.data)
                self._m[name] = m
                self._v[name] = np.zeros_like(t.data)
            v = self._v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            t.data = t.data - self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
