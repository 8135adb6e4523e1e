import math

import numpy as np
import pytest

from steerank import datagen

from conftest import make_item


def small_config(**over):
    cfg = dict(datagen.DATAGEN_DEFAULTS)
    cfg.update({"catalog_size": 120, "n_sellers": 6, "n_categories": 4,
                "d_item": 5, "d_user": 5, "M": 6, "N": 3})
    cfg.update(over)
    return cfg


# ----------------------------------------------------- catalog

def test_catalog_deterministic():
    cfg = small_config()
    a = datagen.generate_catalog(cfg, 11)
    b = datagen.generate_catalog(cfg, 11)
    assert len(a.items) == len(b.items) == 120
    for x, y in zip(a.items, b.items):
        assert x.to_json() == y.to_json()
    assert np.array_equal(a.centroids, b.centroids)


def test_catalog_seed_changes_content():
    cfg = small_config()
    a = datagen.generate_catalog(cfg, 11)
    b = datagen.generate_catalog(cfg, 12)
    assert any(x.to_json() != y.to_json() for x, y in zip(a.items, b.items))


def test_catalog_cold_fraction_zero():
    cat = datagen.generate_catalog(small_config(cold_fraction=0.0), 3)
    assert not any(it.cold for it in cat.items)


def test_catalog_cold_fraction_concentrates():
    cfg = small_config(catalog_size=10_000, cold_fraction=0.2)
    cat = datagen.generate_catalog(cfg, 5)
    n_cold = sum(1 for it in cat.items if it.cold)
    assert 1900 <= n_cold <= 2100


def test_catalog_rejects_bad_config():
    with pytest.raises(ValueError):
        datagen.generate_catalog(small_config(catalog_size=0), 1)
    with pytest.raises(ValueError):
        datagen.generate_catalog(small_config(cold_fraction=1.5), 1)
    with pytest.raises(ValueError):
        datagen.generate_catalog(small_config(ctype_probs=[0.5, 0.5, 0.5]), 1)


def test_catalog_fields_well_formed():
    cfg = small_config()
    cat = datagen.generate_catalog(cfg, 7)
    for it in cat.items:
        assert 0 <= it.seller < cfg["n_sellers"]
        assert 0 <= it.category < cfg["n_categories"]
        assert it.ctype in datagen.CONTENT_TYPES
        assert 0.0 <= it.ctr <= 1.0
        assert it.prio == (1 if it.new else 0)
        assert np.all(np.isfinite(it.features))


# ------------------------------------------------- click model

def flat_model(base=0.3, bias=None, rho=0.0, window=3, d=2):
    return datagen.ClickModel(
        bias=np.array(bias if bias is not None else [1.0] * 5),
        weights=np.zeros((d, d)), rho=rho, base=base, window=window)


def zuser(d=2):
    return datagen.UserProfile(id=0, features=np.zeros(d))


def test_click_zero_affinity_base_case():
    # sigma(0) = 0.5: p = 0.3 * 1 * 0.5 * 1... the base case wants the
    # whole product, so use base 0.6 to land on 0.3
    m = flat_model(base=0.6)
    it = make_item(id=1, features=np.zeros(2))
    assert math.isclose(datagen.simulate_click(m, zuser(), [], it, 1), 0.3)


def test_click_position_bias_scales():
    m = flat_model(base=0.6, bias=[1.0, 1.0, 1.0, 1.0, 0.5])
    it = make_item(id=1, features=np.zeros(2))
    assert math.isclose(datagen.simulate_click(m, zuser(), [], it, 5), 0.15)


def test_click_empty_prefix_no_redundancy():
    m = flat_model(base=0.6, rho=0.9)
    it = make_item(id=1, seller=4, features=np.zeros(2))
    assert math.isclose(datagen.simulate_click(m, zuser(), [], it, 1), 0.3)


def test_click_redundancy_counts_window_sellers():
    m = flat_model(base=0.6, rho=0.1, window=3)
    it = make_item(id=9, seller=4, features=np.zeros(2))
    same = [make_item(id=i, seller=4, features=np.zeros(2)) for i in range(4)]
    # only the last 3 prefix items are inspected: dup = 3
    p = datagen.simulate_click(m, zuser(), same, it, 1)
    assert math.isclose(p, 0.3 * (1 - 0.3))
    other = [make_item(id=i, seller=1, features=np.zeros(2)) for i in range(3)]
    assert math.isclose(datagen.simulate_click(m, zuser(), other, it, 1), 0.3)


def test_click_clamped_to_unit_interval():
    m = flat_model(base=0.6, rho=1.0, window=5)
    it = make_item(id=9, seller=4, features=np.zeros(2))
    same = [make_item(id=i, seller=4, features=np.zeros(2)) for i in range(5)]
    assert datagen.simulate_click(m, zuser(), same, it, 1) == 0.0


def test_click_position_one_based():
    m = flat_model()
    it = make_item(id=1, features=np.zeros(2))
    with pytest.raises(ValueError):
        datagen.simulate_click(m, zuser(), [], it, 0)


def test_build_click_model_bias_length_checked():
    with pytest.raises(ValueError):
        datagen.build_click_model(small_config(position_bias=[1.0, 0.5]), 1)


def test_build_click_model_identity_affinity():
    cfg = small_config(affinity_scale=5.0)
    m = datagen.build_click_model(cfg, 1)
    u = np.ones(5)
    x = np.ones(5)
    assert math.isclose(m.affinity(u, x), 5.0)


# ------------------------------------------------------- logs

def test_generate_logs_empty():
    cfg = small_config()
    cat = datagen.generate_catalog(cfg, 1)
    model = datagen.build_click_model(cfg, 1)
    assert datagen.generate_logs(cat, model, cfg, 0, 1) == []


def test_generate_logs_shapes_and_validity():
    cfg = small_config()
    cat = datagen.generate_catalog(cfg, 1)
    model = datagen.build_click_model(cfg, 1)
    samples = datagen.generate_logs(cat, model, cfg, 25, 3, stream=1)
    assert len(samples) == 25
    for s in samples:
        assert len(s.candidates) == 6
        assert len(s.exposure) == 3
        cand_ids = {c.id for c in s.candidates}
        assert len(cand_ids) == 6
        assert set(s.exposure) <= cand_ids
        assert len(set(s.exposure)) == 3
        assert all(flag in (0, 1) for row in s.engagement for flag in row)
        assert all(row[0] == 1 for row in s.engagement)


def test_generate_logs_zero_bias_kills_clicks():
    cfg = small_config(position_bias=[0.0, 0.0, 0.0])
    cat = datagen.generate_catalog(cfg, 1)
    model = datagen.build_click_model(cfg, 1)
    samples = datagen.generate_logs(cat, model, cfg, 30, 3)
    assert all(row[1] == 0 for s in samples for row in s.engagement)


def test_generate_logs_deterministic_and_stream_separated():
    cfg = small_config()
    cat = datagen.generate_catalog(cfg, 1)
    model = datagen.build_click_model(cfg, 1)
    a = datagen.generate_logs(cat, model, cfg, 10, 3, stream=1)
    b = datagen.generate_logs(cat, model, cfg, 10, 3, stream=1)
    c = datagen.generate_logs(cat, model, cfg, 10, 3, stream=2)
    assert [s.to_json() for s in a] == [s.to_json() for s in b]
    assert [s.to_json() for s in a] != [s.to_json() for s in c]
    # user ids never collide across streams
    assert {s.user.id for s in a}.isdisjoint({s.user.id for s in c})


def test_generate_logs_prefix_independent_of_count():
    # shard-style seeding: the first k samples do not depend on n_samples
    cfg = small_config()
    cat = datagen.generate_catalog(cfg, 1)
    model = datagen.build_click_model(cfg, 1)
    few = datagen.generate_logs(cat, model, cfg, 4, 3, stream=1)
    many = datagen.generate_logs(cat, model, cfg, 9, 3, stream=1)
    assert [s.to_json() for s in few] == [s.to_json() for s in many[:4]]


def test_generate_logs_rejects_bad_sizes():
    cfg = small_config(M=200)
    cat = datagen.generate_catalog(small_config(), 1)
    model = datagen.build_click_model(cfg, 1)
    with pytest.raises(ValueError):
        datagen.generate_logs(cat, model, cfg, 1, 1)
    with pytest.raises(ValueError):
        datagen.generate_logs(cat, model, small_config(N=7), 1, 1)


def test_click_rate_matches_model_probabilities():
    # empirical clicks at each position vs the model-implied mean over
    # the same exposures: independent Bernoulli draws, so the gap
    # shrinks as 1/sqrt(n)
    cfg = small_config(catalog_size=300)
    cat = datagen.generate_catalog(cfg, 2)
    model = datagen.build_click_model(cfg, 2)
    samples = datagen.generate_logs(cat, model, cfg, 12_000, 7)
    clicks = np.zeros(3)
    probs = np.zeros(3)
    for s in samples:
        by_id = s.items_by_id()
        prefix = []
        for pos, iid in enumerate(s.exposure, start=1):
            it = by_id[iid]
            probs[pos - 1] += datagen.simulate_click(model, s.user, prefix,
                                                     it, pos)
            clicks[pos - 1] += s.engagement[pos - 1][1]
            prefix.append(it)
    clicks /= len(samples)
    probs /= len(samples)
    assert np.all(np.abs(clicks - probs) < 0.015)


# --------------------------------------------- feature pipeline

def test_rank_feature_hand_case():
    cands = [make_item(id=0, ctr=0.3), make_item(id=1, ctr=0.1),
             make_item(id=2, ctr=0.2)]
    aug = datagen.augment_features(cands)
    d = len(cands[0].features)
    assert np.allclose(aug[:, d], [0.0, 1.0, 0.5])


def test_rank_feature_single_item():
    aug = datagen.augment_features([make_item(id=0, ctr=0.4)])
    d = 4
    assert aug[0, d] == 0.0
    assert aug[0, d + 1] == 0.0     # zero spread -> zero z-score


def test_rank_feature_ties_break_by_id():
    cands = [make_item(id=5, ctr=0.2), make_item(id=1, ctr=0.2),
             make_item(id=3, ctr=0.2)]
    aug = datagen.augment_features(cands)
    d = 4
    # ascending ids 1,3,5 get ranks 0, 0.5, 1
    assert np.allclose(aug[:, d], [1.0, 0.0, 0.5])


def test_augmented_tail_columns():
    it = make_item(id=0, ctype="image", cold=True, new=False, ctr=0.2)
    other = make_item(id=1, ctype="video", cold=False, new=True, ctr=0.4)
    aug = datagen.augment_features([it, other])
    d = 4
    assert np.array_equal(aug[0, d + 2:], [0, 1, 0, 1, 0])
    assert np.array_equal(aug[1, d + 2:], [0, 0, 1, 0, 1])


def test_augment_zscore():
    cands = [make_item(id=0, ctr=0.1), make_item(id=1, ctr=0.3)]
    aug = datagen.augment_features(cands)
    z = aug[:, 5]
    assert math.isclose(z[0], -1.0) and math.isclose(z[1], 1.0)


def test_augment_permutation_equivariant(rng):
    cands = [make_item(id=i, ctr=float(rng.uniform()),
                       features=rng.normal(size=4)) for i in range(6)]
    aug = datagen.augment_features(cands)
    perm = rng.permutation(6)
    aug_p = datagen.augment_features([cands[int(j)] for j in perm])
    assert np.allclose(aug_p, aug[perm])


def test_augment_rejects_empty():
    with pytest.raises(ValueError):
        datagen.augment_features([])


def test_featurize_width_matches_config():
    cfg = small_config()
    cat = datagen.generate_catalog(cfg, 1)
    user = datagen.UserProfile(id=0, features=np.zeros(5))
    x = datagen.featurize(user, cat.items[:6])
    assert x.shape == (6, datagen.feature_width(cfg))
    assert x.flags["C_CONTIGUOUS"]


# ----------------------------------------------------------- I/O

def test_jsonl_round_trip_and_bytes(tmp_path):
    cfg = small_config()
    cat = datagen.generate_catalog(cfg, 1)
    model = datagen.build_click_model(cfg, 1)
    samples = datagen.generate_logs(cat, model, cfg, 8, 3)
    p1 = tmp_path / "a.jsonl"
    p2 = tmp_path / "b.jsonl"
    datagen.save_jsonl(p1, samples)
    datagen.save_jsonl(p2, samples)
    assert p1.read_bytes() == p2.read_bytes()
    loaded = datagen.load_jsonl(p1)
    assert [s.to_json() for s in loaded] == [s.to_json() for s in samples]
    for s, t in zip(loaded, samples):
        assert np.array_equal(s.user.features, t.user.features)


def test_exposure_items_order():
    cfg = small_config()
    cat = datagen.generate_catalog(cfg, 1)
    model = datagen.build_click_model(cfg, 1)
    s = datagen.generate_logs(cat, model, cfg, 1, 5)[0]
    assert [it.id for it in s.exposure_items()] == s.exposure


# ---------------------------------------------- relevance grades

def test_ground_truth_grades_sign_rule():
    m = datagen.ClickModel(bias=np.ones(3), weights=np.eye(2), rho=0.0,
                           base=0.5)
    user = datagen.UserProfile(id=0, features=np.array([1.0, 0.0]))
    pos_it = make_item(id=1, features=np.array([2.0, 0.0]))
    neg_it = make_item(id=2, features=np.array([-1.0, 0.0]))
    s = datagen.LogSample(user=user, candidates=[pos_it, neg_it],
                          exposure=[1], engagement=[[1, 0]])
    grades = datagen.ground_truth_grades(m, s)
    assert grades == {1: 1, 2: 0}
