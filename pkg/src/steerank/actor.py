"""List-generation policy: set encoder + pointer-style decoder.

The encoder embeds each (item, user) row and pools them into a context
vector; pooling sums rows in item-id order so the context is exactly
permutation invariant, not just up to float reassociation. The decoder
walks N steps: score every remaining candidate from [current hidden;
item embedding; local-context features], mask out selected/pinned-away
items, then sample proportionally or take the argmax.

Everything decodes in lockstep batches of B pages ((B*M)-row tensors);
the single-list operations are B=1 wrappers around the same engine.
"""

import dataclasses

import numpy as np

from . import autodiff as ad
from . import nn

WBAR = "actor/theta_wbar"
THETA_W = "actor/theta_w"
HEAD_PREFIX = f"{THETA_W}/head"

LOCAL_CONTEXT_WIDTH = 8


class InfeasibleConstraints(ValueError):
    pass


@dataclasses.dataclass
class RankedList:
    indices: list          # candidate indices in placement order
    probs: list            # per-step selection probability
    log_prob: float


def actor_dims(config):
    """(d_emb, d_hid, head_in) from the model config block."""
    d_emb = config.get("d_emb", 16)
    d_hid = config.get("d_hid", 16)
    return d_emb, d_hid, d_hid + d_emb + LOCAL_CONTEXT_WIDTH


def head_sizes(config):
    _, _, head_in = actor_dims(config)
    return [head_in, config.get("head_hidden", 32), 1]


def head_shapes(config):
    """Ordered (name, shape) list of the weight-conditioned head."""
    return [(f"{HEAD_PREFIX}/{suffix}", shape)
            for suffix, shape in nn.mlp_shapes(head_sizes(config))]


def init_base(store, config, d_in, rng):
    """Register the ordinarily-trained (w-insensitive) actor parameters."""
    d_emb, d_hid, _ = actor_dims(config)
    nn.mlp_init(store, f"{WBAR}/enc1", [d_in, config.get("enc1_hidden", 32), d_emb], rng)
    nn.mlp_init(store, f"{WBAR}/enc2", [d_emb, config.get("enc2_hidden", 32), d_hid], rng)
    nn.gru_init(store, f"{WBAR}/rnn", d_emb, d_hid, rng)
    store.add(f"{WBAR}/start", nn.uniform_fan_in(rng, (1, d_emb), fan_in=d_emb))


def init_default_head(store, config, rng):
    """Plain trainable head, for actors used without a hypernetwork."""
    nn.mlp_init(store, HEAD_PREFIX, head_sizes(config), rng)


def candidate_meta(candidates):
    return {
        "ids": np.array([c.id for c in candidates], dtype=np.int64),
        "sellers": np.array([c.seller for c in candidates], dtype=np.int64),
        "cats": np.array([c.category for c in candidates], dtype=np.int64),
        "prio": np.array([float(c.prio) for c in candidates]),
        "cold": np.array([1.0 if c.cold else 0.0 for c in candidates]),
        "new": np.array([1.0 if c.new else 0.0 for c in candidates]),
    }


def stack_meta(metas):
    return {k: np.stack([m[k] for m in metas]) for k in metas[0]}


def encode(store, feats, ids):
    """Context vector and item embeddings for one candidate set.

    feats: (M, d_in) featurized rows; ids: length-M item ids fixing the
    canonical summation order.
    """
    e_items = nn.mlp_apply(nn.mlp_params(store, f"{WBAR}/enc1"), ad.Tensor(feats))
    order = np.argsort(np.asarray(ids), kind="stable").astype(np.int64)
    pooled = ad.block_sum(ad.gather_rows(e_items, order), len(ids))
    e_c = nn.mlp_apply(nn.mlp_params(store, f"{WBAR}/enc2"), pooled)
    return e_c, e_items


def local_context_features(prefix, item, step, n_total, window=3):
    """Hand-computed e_si for one (prefix, item) pair; mirrored by the
    vectorized engine. ``step`` is the 1-based position being filled."""
    sellers = [p.seller for p in prefix]
    cats = [p.category for p in prefix]
    win_s = sellers[-window:] if window else []
    win_c = cats[-window:] if window else []
    return np.array([
        float(sum(1 for s in sellers if s == item.seller)),
        float(sum(1 for s in win_s if s == item.seller)),
        float(sum(1 for c in win_c if c == item.category)),
        1.0 if prefix and cats[-1] == item.category else 0.0,
        step / n_total,
        float(item.prio),
        1.0 if item.cold else 0.0,
        1.0 if item.new else 0.0,
    ])


def _batch_local_context(meta, prefix_sellers, prefix_cats, n_chosen, step,
                         n_total, window):
    b, m = meta["sellers"].shape
    sell = meta["sellers"]
    cats = meta["cats"]
    full = (prefix_sellers[:, :n_chosen, None] == sell[:, None, :]).sum(axis=1)
    lo = 0 if window is None else max(0, n_chosen - window)
    win_s = (prefix_sellers[:, lo:n_chosen, None] == sell[:, None, :]).sum(axis=1)
    win_c = (prefix_cats[:, lo:n_chosen, None] == cats[:, None, :]).sum(axis=1)
    if n_chosen > 0:
        prev_eq = (prefix_cats[:, n_chosen - 1:n_chosen] == cats).astype(np.float64)
    else:
        prev_eq = np.zeros((b, m))
    frac = np.full((b, m), step / n_total)
    feats = np.stack([
        full.astype(np.float64), win_s.astype(np.float64),
        win_c.astype(np.float64), prev_eq, frac,
        meta["prio"], meta["cold"], meta["new"],
    ], axis=2)
    return np.ascontiguousarray(feats.reshape(b * m, LOCAL_CONTEXT_WIDTH))


def validate_constraints(constraints, m, n):
    """Normalize {position -> candidate index} pins; raises
    InfeasibleConstraints on anything contradictory."""
    pins = {}
    seen_items = set()
    for pos, idx in (constraints or {}).items():
        pos = int(pos)
        idx = int(idx)
        if not 1 <= pos <= n:
            raise InfeasibleConstraints(f"insertion position {pos} outside 1..{n}")
        if pos in pins:
            raise InfeasibleConstraints(f"duplicate insertion position {pos}")
        if not 0 <= idx < m:
            raise InfeasibleConstraints(f"insertion item index {idx} outside candidate set")
        if idx in seen_items:
            raise InfeasibleConstraints(f"item index {idx} pinned to two positions")
        pins[pos] = idx
        seen_items.add(idx)
    return pins


def generate_batch(store, feats3, meta, n_total, mode, rngs=None,
                   constraints=None, forced=None, window=3,
                   score_bound=6.0):
    """Decode B pages in lockstep.

    feats3: (B, M, d_in) featurized candidates; meta: stacked arrays
    from candidate_meta; mode: "sample" | "greedy" | "forced";
    rngs: per-page Generators (sample mode); forced: (B, N) indices
    whose step probabilities are wanted (forced mode); score_bound
    soft-clips each row's centered scores to (-bound, bound), keeping
    the softmax off the saturated regime during policy-gradient
    training (None for raw linear scores).

    Returns (indices (B, N) int array, step_probs (B, N) float array,
    sum_log_prob Tensor (B, 1)).
    """
    b, m, d_in = feats3.shape
    if not 1 <= n_total <= m:
        raise ValueError(f"need 1 <= N <= M, got N={n_total} M={m}")
    pin_lists = [validate_constraints(c, m, n_total)
                 for c in (constraints or [None] * b)]
    # pin_step[b, j] = 0-based step item j is reserved for, else -1
    pin_step = np.full((b, m), -1, dtype=np.int64)
    step_pin = np.full((b, n_total), -1, dtype=np.int64)
    for pb, pins in enumerate(pin_lists):
        for pos, idx in pins.items():
            pin_step[pb, idx] = pos - 1
            step_pin[pb, pos - 1] = idx

    x2 = ad.Tensor(np.ascontiguousarray(feats3.reshape(b * m, d_in)))
    e_items = nn.mlp_apply(nn.mlp_params(store, f"{WBAR}/enc1"), x2)
    order = np.argsort(meta["ids"], axis=1, kind="stable").astype(np.int64)
    flat_order = (np.arange(b)[:, None] * m + order).reshape(-1)
    pooled = ad.block_sum(ad.gather_rows(e_items, flat_order), m)
    h = nn.mlp_apply(nn.mlp_params(store, f"{WBAR}/enc2"), pooled)

    head = nn.mlp_params(store, HEAD_PREFIX)
    gru = nn.gru_params(store, f"{WBAR}/rnn")
    start = store.get(f"{WBAR}/start")
    x_in = ad.repeat_rows(start, b)

    selected = np.zeros((b, m), dtype=bool)
    prefix_sellers = np.full((b, n_total), -1, dtype=np.int64)
    prefix_cats = np.full((b, n_total), -1, dtype=np.int64)
    indices = np.zeros((b, n_total), dtype=np.int64)
    step_probs = np.zeros((b, n_total))
    logp_sum = None
    row_base = np.arange(b, dtype=np.int64) * m

    for step in range(n_total):
        h = nn.gru_step(gru, h, x_in)
        e_si = _batch_local_context(meta, prefix_sellers, prefix_cats, step,
                                    step + 1, n_total, window)
        rows = ad.concat_cols([ad.repeat_rows(h, m), e_items, ad.Tensor(e_si)])
        scores = ad.reshape(nn.mlp_apply(head, rows), (b, m))
        if score_bound is not None:
            # soft-clip the per-row score spread: center (softmax ignores
            # the common mode, so the cap should bite on differences only)
            # then squash through a tanh that is near-identity inside
            # (-bound, bound). Keeps policy-gradient updates from pushing
            # logits into the regime where the softmax goes deterministic
            # and exploration dies.
            sb = float(score_bound)
            row_mean = ad.matmul(ad.matmul(scores, ad.Tensor(np.full((m, 1), 1.0 / m))),
                                 ad.Tensor(np.ones((1, m))))
            centered = ad.sub(scores, row_mean)
            scores = ad.scale(ad.tanh(ad.scale(centered, 1.0 / sb)), sb)

        allowed = ~selected
        later_pin = (pin_step >= 0) & (pin_step != step)
        allowed &= ~later_pin
        pinned_rows = step_pin[:, step] >= 0
        if pinned_rows.any():
            for pb in np.nonzero(pinned_rows)[0]:
                j = step_pin[pb, step]
                if selected[pb, j]:
                    raise InfeasibleConstraints(
                        f"pinned item index {j} already placed before its position")
                allowed[pb, :] = False
                allowed[pb, j] = True
        if not allowed.any(axis=1).all():
            raise InfeasibleConstraints(f"no feasible action at step {step + 1}")

        a = ad.masked_softmax(scores, allowed.astype(np.uint8))
        if mode == "greedy":
            chosen = np.argmax(a.data, axis=1)
        elif mode == "forced":
            chosen = np.asarray(forced)[:, step].astype(np.int64)
            if not allowed[np.arange(b), chosen].all():
                raise ValueError("forced choice is masked")
        elif mode == "sample":
            chosen = np.empty(b, dtype=np.int64)
            for pb in range(b):
                c = np.cumsum(a.data[pb])
                u = rngs[pb].random()
                j = int(np.searchsorted(c, u, side="right"))
                if j >= m or a.data[pb, j] <= 0.0:
                    j = int(np.nonzero(a.data[pb] > 0.0)[0][-1])
                chosen[pb] = j
        else:
            raise ValueError(f"unknown mode {mode!r}")

        p_step = ad.take_per_row(a, chosen)
        lp = ad.log(p_step)
        logp_sum = lp if logp_sum is None else ad.add(logp_sum, lp)
        step_probs[:, step] = p_step.data.reshape(-1)
        indices[:, step] = chosen
        selected[np.arange(b), chosen] = True
        prefix_sellers[:, step] = meta["sellers"][np.arange(b), chosen]
        prefix_cats[:, step] = meta["cats"][np.arange(b), chosen]
        x_in = ad.gather_rows(e_items, row_base + chosen)

    return indices, step_probs, logp_sum


def generate_list(store, feats, meta, n_total, mode, seed=None,
                  constraints=None, window=3, score_bound=6.0):
    """Single-page wrapper; seed drives sample mode only."""
    rngs = None
    if mode == "sample":
        rngs = [np.random.default_rng(np.random.SeedSequence([int(seed or 0)]))]
    idx, probs, logp = generate_batch(
        store, feats[None, :, :], {k: v[None, :] for k, v in meta.items()},
        n_total, mode, rngs=rngs,
        constraints=[constraints] if constraints else None, window=window,
        score_bound=score_bound)
    return RankedList(
        indices=[int(i) for i in idx[0]],
        probs=[float(p) for p in probs[0]],
        log_prob=float(logp.data[0, 0]),
    )


def list_probability(store, feats, meta, indices, window=3, score_bound=6.0):
    """Probability of a given list = product of chained step probs."""
    arr = np.asarray(indices, dtype=np.int64)[None, :]
    _, probs, _ = generate_batch(
        store, feats[None, :, :], {k: v[None, :] for k, v in meta.items()},
        arr.shape[1], "forced", forced=arr, window=window,
        score_bound=score_bound)
    return float(np.prod(probs[0]))
