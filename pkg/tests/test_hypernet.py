import numpy as np
import pytest

from steerank import actor, autodiff as ad, hypernet, nn

from conftest import random_items

CFG = {"d_emb": 5, "d_hid": 6, "head_hidden": 7,
       "enc1_hidden": 8, "enc2_hidden": 8}
D_IN = 9
N_U = 2


def build(seed=0):
    store = nn.ParamStore()
    rng = np.random.default_rng(seed)
    actor.init_base(store, CFG, D_IN, rng)
    shapes = actor.head_shapes(CFG)
    hypernet.init_hypernet(store, N_U, shapes, rng,
                           hidden=CFG.get("hyper_hidden", 16))
    return store, shapes


def test_same_weight_vector_is_deterministic():
    store, shapes = build()
    a = hypernet.generate(store, [0.3, 0.7], shapes)
    b = hypernet.generate(store, [0.3, 0.7], shapes)
    for name, _ in shapes:
        assert np.array_equal(a[name].data, b[name].data)


def test_generated_shapes_match_declaration():
    store, shapes = build()
    out = hypernet.generate(store, [0.5, 0.5], shapes)
    assert set(out) == {name for name, _ in shapes}
    for name, shape in shapes:
        assert out[name].shape == shape


def test_distinct_weights_distinct_heads_after_perturbation():
    store, shapes = build()
    # untrained phi is nearly w-constant by design; push w1 off zero
    store.get(f"{hypernet.PHI}/w1").data += 0.05
    a = hypernet.generate(store, [1.0, 0.0], shapes)
    b = hypernet.generate(store, [0.0, 1.0], shapes)
    assert any(not np.array_equal(a[nm].data, b[nm].data) for nm, _ in shapes)


def test_near_constant_at_init():
    store, shapes = build()
    a = hypernet.generate(store, [0.0, 0.0], shapes)
    b = hypernet.generate(store, [1.0, 1.0], shapes)
    for name, _ in shapes:
        assert np.allclose(a[name].data, b[name].data, atol=5e-3)


def test_dimension_mismatch_rejected():
    store, shapes = build()
    with pytest.raises(ValueError, match="dimension"):
        hypernet.generate(store, [0.5, 0.5, 0.5], shapes)


def test_non_finite_weights_rejected():
    store, shapes = build()
    with pytest.raises(ValueError, match="finite"):
        hypernet.generate(store, [np.nan, 0.5], shapes)


def test_shape_coverage_mismatch_rejected():
    store, shapes = build()
    with pytest.raises(ValueError, match="cover"):
        hypernet.generate(store, [0.5, 0.5], shapes[:-1])


# ----------------------------------------------------------- assemble

def test_assemble_shares_base_tensors_by_reference():
    store, shapes = build()
    theta = hypernet.generate(store, [0.2, 0.8], shapes)
    merged = hypernet.assemble(theta, store, shapes)
    for name in store.names():
        assert merged.get(name) is store.get(name)
    for name, _ in shapes:
        assert merged.get(name) is theta[name]


def test_assemble_missing_layer_rejected():
    store, shapes = build()
    theta = hypernet.generate(store, [0.2, 0.8], shapes)
    del theta[f"{actor.HEAD_PREFIX}/w1"]
    with pytest.raises(ValueError, match="missing"):
        hypernet.assemble(theta, store, shapes)


def test_assemble_name_overlap_rejected():
    store, shapes = build()
    rng = np.random.default_rng(1)
    actor.init_default_head(store, CFG, rng)  # claims the head names
    theta = hypernet.generate(store, [0.2, 0.8], shapes)
    with pytest.raises(ValueError, match="both"):
        hypernet.assemble(theta, store, shapes)


def test_assemble_extra_tensor_rejected():
    store, shapes = build()
    theta = hypernet.generate(store, [0.2, 0.8], shapes)
    theta["actor/theta_w/head/w9"] = theta[f"{actor.HEAD_PREFIX}/w0"]
    with pytest.raises(ValueError, match="unexpected"):
        hypernet.assemble(theta, store, shapes)


def test_assemble_round_trip_partition():
    store, shapes = build()
    theta = hypernet.generate(store, [0.4, 0.1], shapes)
    merged = hypernet.assemble(theta, store, shapes)
    head_names = {name for name, _ in shapes}
    back_head = {nm: t for nm, t in merged.items() if nm in head_names}
    back_base = [nm for nm, _ in merged.items() if nm not in head_names]
    assert back_head == theta
    assert back_base == store.names()


# -------------------------------------------------- end-to-end decode

def decode_with(store, shapes, w, items, feats, n, mode="greedy", rngs=None):
    theta = hypernet.generate(store, w, shapes)
    merged = hypernet.assemble(theta, store, shapes)
    meta = actor.stack_meta([actor.candidate_meta(items)])
    return actor.generate_batch(merged, feats[None], meta, n, mode, rngs=rngs)


def test_pretraining_validity_across_weight_grid(rng):
    """Fresh phi must yield finite heads and proper step distributions
    on a 5-point grid per preference axis."""
    store, shapes = build(seed=3)
    items = random_items(rng, 6)
    feats = np.ascontiguousarray(rng.normal(size=(6, D_IN)))
    for w0 in np.linspace(0.0, 1.0, 5):
        for w1 in np.linspace(0.0, 1.0, 5):
            theta = hypernet.generate(store, [w0, w1], shapes)
            assert all(np.all(np.isfinite(theta[nm].data)) for nm, _ in shapes)
            idx, probs, logp = decode_with(store, shapes, [w0, w1],
                                           items, feats, 4)
            assert len(set(idx[0])) == 4
            assert np.all((probs[0] > 0) & (probs[0] <= 1.0))
            assert np.isfinite(logp.data).all()


def test_gradient_reaches_phi_through_decode(rng):
    store, shapes = build(seed=5)
    items = random_items(rng, 5)
    feats = np.ascontiguousarray(rng.normal(size=(5, D_IN)))
    rngs = [np.random.default_rng(7)]
    with ad.Tape() as tape:
        _, _, logp = decode_with(store, shapes, [0.6, 0.4], items, feats, 3,
                                 mode="sample", rngs=rngs)
        loss = ad.scale(ad.sum_all(logp), -1.0)
    phi = [f"{hypernet.PHI}/w0", f"{hypernet.PHI}/b0",
           f"{hypernet.PHI}/w1", f"{hypernet.PHI}/b1"]
    grads = ad.grad(loss, [store.get(nm) for nm in phi], tape)
    assert all(np.any(g != 0) for g in grads)


def test_finite_difference_through_generate_and_decode(rng):
    """Central finite differences on a handful of phi coordinates must
    match tape gradients through generate -> assemble -> forced decode."""
    store, shapes = build(seed=6)
    # move phi off its near-zero output init so gradients through w0
    # are not drowned by finite-difference roundoff
    store.get(f"{hypernet.PHI}/w1").data += 0.02 * np.random.default_rng(
        1).normal(size=store.get(f"{hypernet.PHI}/w1").shape)
    items = random_items(rng, 5)
    feats = np.ascontiguousarray(rng.normal(size=(5, D_IN)))
    forced = np.array([[2, 0, 4]])
    meta = actor.stack_meta([actor.candidate_meta(items)])

    def loss_value():
        theta = hypernet.generate(store, [0.3, 0.9], shapes)
        merged = hypernet.assemble(theta, store, shapes)
        _, _, logp = actor.generate_batch(merged, feats[None], meta, 3,
                                          "forced", forced=forced)
        return ad.scale(ad.sum_all(logp), -1.0)

    with ad.Tape() as tape:
        loss = loss_value()
    names = [f"{hypernet.PHI}/w0", f"{hypernet.PHI}/w1", f"{hypernet.PHI}/b1"]
    grads = dict(zip(names, ad.grad(loss, [store.get(n) for n in names], tape)))

    eps = 5e-6  # cube-root-of-ulp scale, optimal for a loss of order 1
    frng = np.random.default_rng(0)
    for name in names:
        t = store.get(name)
        flat_idx = frng.choice(t.data.size, size=4, replace=False)
        for fi in flat_idx:
            ij = np.unravel_index(fi, t.data.shape)
            keep = t.data[ij]
            t.data[ij] = keep + eps
            up = loss_value().item()
            t.data[ij] = keep - eps
            dn = loss_value().item()
            t.data[ij] = keep
            fd = (up - dn) / (2 * eps)
            got = grads[name][ij]
            denom = max(abs(fd), abs(got), 1e-6)
            assert abs(fd - got) / denom < 1e-4, (name, ij, fd, got)
