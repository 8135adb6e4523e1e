"""Five-channel list evaluator: per-position click probabilities.

The channels look at the ordered list from complementary angles:
a permutation-invariant sum (e_sp), per-item projections concatenated
in order (e_fc), sum-pooled multi-head self-attention (e_mh), the
final hidden state of a recurrent pass (e_rnn), and all pairwise inner
products (e_pc). Their concatenation feeds one head emitting N logits.
The architecture is fixed to one list length N; items are featurized
exactly as for the actor.
"""

import numpy as np

from . import autodiff as ad
from . import nn

NS = "evaluator"


def eval_dims(config, n):
    emb = config.get("eval_emb", 16)
    fc_out = config.get("fc_out", 8)
    attn = config.get("attn_width", 16)
    rnn = config.get("eval_rnn", 16)
    concat = emb + n * fc_out + attn + rnn + n * (n - 1) // 2
    return emb, fc_out, attn, rnn, concat


def init_evaluator(store, config, n, d_in, rng):
    emb, fc_out, attn, rnn, concat = eval_dims(config, n)
    nn.mlp_init(store, f"{NS}/embed", [d_in, config.get("eval_hidden", 32), emb], rng)
    nn.mlp_init(store, f"{NS}/fc", [emb, config.get("fc_hidden", 16), fc_out], rng)
    store.add(f"{NS}/attn/wq", nn.uniform_fan_in(rng, (emb, attn)))
    store.add(f"{NS}/attn/wk", nn.uniform_fan_in(rng, (emb, attn)))
    store.add(f"{NS}/attn/wv", nn.uniform_fan_in(rng, (emb, attn)))
    nn.gru_init(store, f"{NS}/rnn", emb, rnn, rng)
    nn.mlp_init(store, f"{NS}/head", [concat, config.get("mlp5_hidden", 64), n], rng)


def channel_outputs(store, x3, heads):
    """The five channel tensors for a (B, N, d_in) input batch."""
    b, n, d_in = x3.shape
    if n < 1:
        raise ValueError("empty list")
    x2 = ad.Tensor(np.ascontiguousarray(x3.reshape(b * n, d_in)))
    e = nn.mlp_apply(nn.mlp_params(store, f"{NS}/embed"), x2)
    emb = e.shape[1]

    e_sp = ad.block_sum(e, n)
    fc = nn.mlp_apply(nn.mlp_params(store, f"{NS}/fc"), e)
    e_fc = ad.reshape(fc, (b, n * fc.shape[1]))
    e3 = ad.reshape(e, (b, n, emb))
    e_mh = nn.mhsa_pooled(e3, store.get(f"{NS}/attn/wq"),
                          store.get(f"{NS}/attn/wk"),
                          store.get(f"{NS}/attn/wv"), heads)
    gru = nn.gru_params(store, f"{NS}/rnn")
    h = ad.Tensor(np.zeros((b, gru["whr"].shape[0])))
    base = np.arange(b, dtype=np.int64) * n
    for i in range(n):
        h = nn.gru_step(gru, h, ad.gather_rows(e, base + i))
    e_rnn = h

    e_pc = None
    if n > 1:
        gram = ad.reshape(ad.bmm(e3, e3, transpose_b=True), (b, n * n))
        upper = np.array([i * n + j for i in range(n) for j in range(i + 1, n)],
                         dtype=np.int64)
        e_pc = ad.gather_cols(gram, upper)
    return e_sp, e_fc, e_mh, e_rnn, e_pc


def evaluate_batch(store, x3, heads):
    """Per-position click probabilities, (B, N) tensor in (0,1)."""
    e_sp, e_fc, e_mh, e_rnn, e_pc = channel_outputs(store, x3, heads)
    parts = [e_sp, e_fc, e_mh, e_rnn]
    if e_pc is not None:
        parts.append(e_pc)
    logits = nn.mlp_apply(nn.mlp_params(store, f"{NS}/head"), ad.concat_cols(parts))
    return ad.sigmoid(logits)


def evaluate_rows(store, rows, heads):
    """Single-list wrapper: rows is (N, d_in); returns (N,) floats."""
    probs = evaluate_batch(store, np.asarray(rows)[None, :, :], heads)
    return probs.data[0].copy()


def bce_loss(probs, labels):
    """Mean binary cross-entropy; probabilities are clamped to
    [1e-7, 1-1e-7] before the logs so no label can produce a NaN."""
    y = ad.Tensor(labels)
    ny = ad.Tensor(1.0 - labels)
    p = ad.clip(probs, 1e-7, 1.0 - 1e-7)
    q = ad.sub(ad.Tensor(np.ones_like(labels)), p)
    ll = ad.add(ad.mul(y, ad.log(p)), ad.mul(ny, ad.log(q)))
    return ad.neg(ad.mean_all(ll))


def train_step(store, adam, x3, labels, heads):
    """One supervised step; returns the scalar loss."""
    with ad.Tape() as tape:
        probs = evaluate_batch(store, x3, heads)
        loss = bce_loss(probs, labels)
    val = loss.item()
    if not np.isfinite(val):
        raise RuntimeError(f"evaluator loss is not finite: {val}")
    names = store.names()
    grads = ad.grad(loss, [store.get(nm) for nm in names], tape)
    adam.step(dict(zip(names, grads)))
    return val


def predict_probs(store, x3, heads):
    """Inference-only probabilities as a plain (B, N) array."""
    return evaluate_batch(store, x3, heads).data.copy()
