"""Synthetic interaction logs with a documented ground-truth click model.

The click model is the part that matters: every downstream claim about
"the evaluator learned engagement" or "accuracy trades off against
diversity" is checked against it. Click probability for an item shown
at a position, given the items already placed above it:

    p = clamp(base * bias(position) * sigmoid(affinity(u, i))
              * (1 - rho * same_seller_count_in_window), 0, 1)

where affinity(u, i) = x_u @ W @ x_i and the window covers the 3
preceding positions. Item features cluster around per-category
centroids and users prefer a 2-category mixture, so category mixing is
genuinely click-relevant and diversity sweeps have something to trade.
"""

import dataclasses
import json
import math

import numpy as np

CONTENT_TYPES = ("text", "image", "video")


@dataclasses.dataclass
class Item:
    id: int
    seller: int
    category: int
    ctype: str
    prio: int
    cold: bool
    new: bool
    ctr: float
    features: np.ndarray

    def to_json(self):
        return {
            "id": self.id,
            "seller": self.seller,
            "category": self.category,
            "ctype": self.ctype,
            "prio": self.prio,
            "cold": self.cold,
            "new": self.new,
            "ctr": self.ctr,
            "features": [float(v) for v in self.features],
        }

    @classmethod
    def from_json(cls, d):
        return cls(
            id=d["id"], seller=d["seller"], category=d["category"],
            ctype=d["ctype"], prio=d["prio"], cold=d["cold"], new=d["new"],
            ctr=d["ctr"], features=np.asarray(d["features"], dtype=np.float64),
        )


@dataclasses.dataclass
class UserProfile:
    id: int
    features: np.ndarray

    def to_json(self):
        return {"id": self.id, "features": [float(v) for v in self.features]}

    @classmethod
    def from_json(cls, d):
        return cls(id=d["id"], features=np.asarray(d["features"], dtype=np.float64))


@dataclasses.dataclass
class LogSample:
    user: UserProfile
    candidates: list
    exposure: list   # ordered item ids
    engagement: list  # [[expose_flag, click_flag], ...] per position

    def to_json(self):
        return {
            "user": self.user.to_json(),
            "candidates": [c.to_json() for c in self.candidates],
            "exposure": list(self.exposure),
            "engagement": [[int(e), int(c)] for e, c in self.engagement],
        }

    @classmethod
    def from_json(cls, d):
        return cls(
            user=UserProfile.from_json(d["user"]),
            candidates=[Item.from_json(c) for c in d["candidates"]],
            exposure=list(d["exposure"]),
            engagement=[[int(e), int(c)] for e, c in d["engagement"]],
        )

    def items_by_id(self):
        return {c.id: c for c in self.candidates}

    def exposure_items(self):
        by_id = self.items_by_id()
        return [by_id[i] for i in self.exposure]


@dataclasses.dataclass
class Catalog:
    items: list
    centroids: np.ndarray  # (n_categories, d_item)


@dataclasses.dataclass
class ClickModel:
    bias: np.ndarray      # position-bias curve, index 0 = position 1
    weights: np.ndarray   # affinity weights, (d_user, d_item)
    rho: float            # redundancy penalty coefficient
    base: float           # base click rate
    window: int = 3       # redundancy lookback, in positions

    def affinity(self, user_x, item_x):
        return float(user_x @ self.weights @ item_x)


DATAGEN_DEFAULTS = {
    "catalog_size": 2000,
    "n_sellers": 30,
    "n_categories": 8,
    "ctype_probs": [0.5, 0.3, 0.2],
    "cold_fraction": 0.15,
    "new_fraction": 0.2,
    "d_item": 8,
    "d_user": 8,
    "feature_noise": 0.5,
    "user_noise": 0.3,
    "n_train": 50000,
    "n_test": 10000,
    "M": 20,
    "N": 10,
    "click_base": 0.8,
    "position_bias": None,
    "affinity_scale": 3.0,
    "redundancy_rho": 0.15,
    "redundancy_window": 3,
    "logging_temperature": 0.5,
    # unequal category-mixture weights give each user a dominant
    # interest, so accuracy-greedy lists under-cover the secondary
    # interest and diversity genuinely trades off against clicks
    "user_mix": [0.7, 0.3],
}


def _cfg(config, key):
    v = config.get(key, DATAGEN_DEFAULTS[key])
    return v


def default_position_bias(n):
    return np.array([1.0 / math.log2(p + 1) for p in range(1, n + 1)])


def generate_catalog(config, seed):
    """Deterministic catalog; cold/new flags are independent Bernoullis."""
    size = _cfg(config, "catalog_size")
    n_cat = _cfg(config, "n_categories")
    if size < 1 or n_cat < 1 or _cfg(config, "n_sellers") < 1:
        raise ValueError("catalog config values must be positive")
    cold_f = _cfg(config, "cold_fraction")
    new_f = _cfg(config, "new_fraction")
    if not (0 <= cold_f <= 1 and 0 <= new_f <= 1):
        raise ValueError("fractions must be in [0,1]")
    ctype_p = np.asarray(_cfg(config, "ctype_probs"), dtype=np.float64)
    if ctype_p.shape != (3,) or abs(ctype_p.sum() - 1.0) > 1e-9:
        raise ValueError("ctype_probs must be 3 probabilities summing to 1")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0]))
    d_item = _cfg(config, "d_item")
    centroids = rng.normal(size=(n_cat, d_item))
    noise = _cfg(config, "feature_noise")
    items = []
    for i in range(size):
        cat = int(rng.integers(n_cat))
        seller = int(rng.integers(_cfg(config, "n_sellers")))
        ctype = CONTENT_TYPES[int(rng.choice(3, p=ctype_p))]
        cold = bool(rng.random() < cold_f)
        new = bool(rng.random() < new_f)
        ctr = float(rng.uniform(0.01, 0.6))
        feats = centroids[cat] + noise * rng.normal(size=d_item)
        items.append(Item(
            id=i, seller=seller, category=cat, ctype=ctype,
            prio=1 if new else 0, cold=cold, new=new, ctr=ctr, features=feats,
        ))
    return Catalog(items=items, centroids=centroids)


def build_click_model(config, seed):
    n = _cfg(config, "N")
    bias_cfg = _cfg(config, "position_bias")
    bias = (np.asarray(bias_cfg, dtype=np.float64) if bias_cfg is not None
            else default_position_bias(n))
    if len(bias) < n:
        raise ValueError("position_bias shorter than N")
    d_u, d_i = _cfg(config, "d_user"), _cfg(config, "d_item")
    scale = _cfg(config, "affinity_scale")
    if d_u == d_i:
        weights = (scale / d_i) * np.eye(d_u)
    else:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 3]))
        weights = scale * rng.normal(size=(d_u, d_i)) / math.sqrt(d_u * d_i)
    return ClickModel(
        bias=bias,
        weights=weights,
        rho=_cfg(config, "redundancy_rho"),
        base=_cfg(config, "click_base"),
        window=_cfg(config, "redundancy_window"),
    )


def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def simulate_click(model, user, list_prefix, item, position):
    """Ground-truth click probability at ``position`` (1-based)."""
    if position < 1:
        raise ValueError("position is 1-based")
    window = list_prefix[-model.window:] if model.window else []
    dup = sum(1 for prev in window if prev.seller == item.seller)
    p = (model.base
         * float(model.bias[position - 1])
         * _sigmoid(model.affinity(user.features, item.features))
         * (1.0 - model.rho * dup))
    return min(max(p, 0.0), 1.0)


def _sample_user(rng, centroids, d_user, user_noise, uid, mix):
    n_cat = centroids.shape[0]
    weights = np.asarray(mix, dtype=np.float64)[:n_cat]
    weights = weights / weights.sum()
    prefs = rng.choice(n_cat, size=len(weights), replace=False)
    base = weights @ centroids[prefs]
    if centroids.shape[1] != d_user:
        raise ValueError("d_user must equal d_item for centroid-mixture users")
    feats = base + user_noise * rng.normal(size=d_user)
    return UserProfile(id=uid, features=feats)


def generate_logs(catalog, model, config, n_samples, seed, stream=0):
    """n_samples LogSamples; sample idx i is seeded by (seed, stream, i)
    so shards generated independently concatenate reproducibly and
    train/test streams never share draws."""
    m = _cfg(config, "M")
    n = _cfg(config, "N")
    if not (1 <= n <= m <= len(catalog.items)):
        raise ValueError(f"need 1 <= N <= M <= catalog size, got N={n} M={m}")
    temp = _cfg(config, "logging_temperature")
    d_user = _cfg(config, "d_user")
    user_noise = _cfg(config, "user_noise")
    mix = _cfg(config, "user_mix")
    out = []
    for idx in range(n_samples):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), idx]))
        user = _sample_user(rng, catalog.centroids, d_user, user_noise,
                            int(stream) * 10_000_000 + idx, mix)
        cand_idx = rng.choice(len(catalog.items), size=m, replace=False)
        cands = [catalog.items[int(j)] for j in cand_idx]
        # logging policy: ctr-greedy perturbed by Gumbel noise
        gumbel = -np.log(-np.log(rng.uniform(size=m)))
        scores = np.array([math.log(c.ctr + 1e-9) for c in cands]) + temp * gumbel
        order = sorted(range(m), key=lambda j: (-scores[j], cands[j].id))
        exposed = [cands[j] for j in order[:n]]
        engagement = []
        prefix = []
        for pos, item in enumerate(exposed, start=1):
            p = simulate_click(model, user, prefix, item, pos)
            click = 1 if rng.random() < p else 0
            engagement.append([1, click])
            prefix.append(item)
        out.append(LogSample(
            user=user,
            candidates=cands,
            exposure=[it.id for it in exposed],
            engagement=engagement,
        ))
    return out


# -------------------------------------------------- feature pipeline

def augment_features(candidates):
    """Per-item derived features over one candidate set.

    Appended columns, in order: CTR rank normalized to [0,1] (best
    CTR = 0; ties broken by item id ascending; 0 when M=1), CTR
    z-score within the set (0 when the spread is zero), content-type
    one-hot (text/image/video), cold flag, new flag. Output is
    (M, d_item + 7).
    """
    m = len(candidates)
    if m < 1:
        raise ValueError("empty candidate set")
    ctrs = np.array([c.ctr for c in candidates])
    order = sorted(range(m), key=lambda j: (-ctrs[j], candidates[j].id))
    rank = np.empty(m)
    for r, j in enumerate(order):
        rank[j] = r / (m - 1) if m > 1 else 0.0
    std = float(ctrs.std())
    z = (ctrs - ctrs.mean()) / std if std > 0 else np.zeros(m)
    rows = []
    for j, c in enumerate(candidates):
        onehot = [1.0 if c.ctype == t else 0.0 for t in CONTENT_TYPES]
        rows.append(np.concatenate([
            c.features,
            [rank[j], z[j]],
            onehot,
            [1.0 if c.cold else 0.0, 1.0 if c.new else 0.0],
        ]))
    return np.ascontiguousarray(np.stack(rows))


def featurize(user, candidates):
    """Model input rows: augmented item features next to user features."""
    aug = augment_features(candidates)
    ux = np.tile(user.features, (len(candidates), 1))
    return np.ascontiguousarray(np.hstack([aug, ux]))


def feature_width(config):
    return _cfg(config, "d_item") + 7 + _cfg(config, "d_user")


# ------------------------------------------------------------- I/O

def save_jsonl(path, samples):
    with open(path, "w", encoding="utf-8") as f:
        for s in samples:
            f.write(json.dumps(s.to_json(), separators=(",", ":")))
            f.write("\n")


def load_jsonl(path):
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(LogSample.from_json(json.loads(line)))
    return out


def ground_truth_grades(model, sample):
    """Binary relevance per candidate: 1 iff user-item affinity >= 0.

    Position- and redundancy-free by construction; used to judge
    arbitrary generated lists on synthetic data.
    """
    return {
        c.id: 1 if model.affinity(sample.user.features, c.features) >= 0 else 0
        for c in sample.candidates
    }
