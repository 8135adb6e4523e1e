"""Training orchestration and controllability evaluation.

The conditional step is the heart: sample one preference vector for
the whole batch, generate that batch's lists with the head the
hypernetwork emits for it, score generated-vs-logged pages under the
same weights, and push the REINFORCE signal back through the decode
chain into the hypernetwork (and, by default, the base actor).

The logged exposure list's reward is the advantage baseline, so the
evaluator must already be trained and frozen before any actor step.
"""

import csv
import dataclasses
import json
import os

import numpy as np

from . import actor, autodiff as ad, datagen, evaluator, hypernet, metrics, nn
from . import snapshot, utilities

BUNDLE_SNAPSHOT = "params.snap"
BUNDLE_MANIFEST = "bundle.json"
CURVE_FILE = "curve.csv"
EVAL_FILE = "eval.csv"


# ----------------------------------------------------------- config

def model_config(config):
    return config.get("model", {})


def data_config(config):
    return config.get("datagen", {})


def dims(config):
    dc = data_config(config)
    m = dc.get("M", datagen.DATAGEN_DEFAULTS["M"])
    n = dc.get("N", datagen.DATAGEN_DEFAULTS["N"])
    return m, n


def build_utility_set(config):
    preset = config.get("train", {}).get("preset", "custom")
    if preset == "lambda":
        return utilities.UtilitySet.lambda_preset()
    if preset != "custom":
        raise ValueError(f"unknown train preset {preset!r}")
    blocks = config.get("utilities", [])
    if not blocks:
        raise ValueError("custom preset needs a non-empty utilities block")
    return utilities.UtilitySet.from_config(blocks)


def resolve_eval_weights(config, util_set):
    """The weight vector `eval` and `train`'s final row evaluate at:
    config eval.weights by name, defaulting to half of each cap."""
    caps = util_set.w_max()
    given = config.get("eval", {}).get("weights")
    if given is None:
        return caps / 2.0
    w = []
    for name, cap in zip(util_set.names(), caps):
        v = float(given.get(name, cap / 2.0))
        if not 0.0 <= v <= cap:
            raise ValueError(f"eval weight {name}={v} outside [0, {cap}]")
        w.append(v)
    return np.array(w)


# ------------------------------------------------------ data prep

@dataclasses.dataclass
class Prep:
    sample: object
    feats: np.ndarray          # (M, d_in)
    meta: dict                 # candidate_meta arrays
    exposure_idx: np.ndarray   # (N,) candidate indices of the logged list
    exposure_rows: np.ndarray  # (N, d_in)
    labels: np.ndarray         # (N,) click flags
    universe: list             # sorted candidate categories
    grades: np.ndarray = None  # (M,) relevance per candidate, when known


def prepare_samples(samples, click_model=None):
    out = []
    for s in samples:
        feats = datagen.featurize(s.user, s.candidates)
        id2idx = {c.id: i for i, c in enumerate(s.candidates)}
        exp_idx = np.array([id2idx[i] for i in s.exposure], dtype=np.int64)
        grades = None
        if click_model is not None:
            by_id = datagen.ground_truth_grades(click_model, s)
            grades = np.array([by_id[c.id] for c in s.candidates], dtype=np.int64)
        out.append(Prep(
            sample=s,
            feats=feats,
            meta=actor.candidate_meta(s.candidates),
            exposure_idx=exp_idx,
            exposure_rows=np.ascontiguousarray(feats[exp_idx]),
            labels=np.array([c for _, c in s.engagement], dtype=np.float64),
            universe=sorted({c.category for c in s.candidates}),
            grades=grades,
        ))
    return out


def page_grades(prep_batch, indices):
    """Per-page relevance lists for chosen candidate indices, or None
    when the batch carries no ground-truth grades."""
    if any(p.grades is None for p in prep_batch):
        return None
    return [[int(p.grades[int(j)]) for j in row]
            for p, row in zip(prep_batch, indices)]


def pages_from_indices(prep_batch, indices):
    return [[p.sample.candidates[int(j)] for j in row]
            for p, row in zip(prep_batch, indices)]


# ------------------------------------------------- evaluator phase

def train_evaluator(prep, store, config, seed):
    """Supervised pre-training on logged exposure lists; returns the
    loss curve as (step, loss) pairs."""
    tc = config.get("train", {})
    steps = tc.get("eval_steps", 2000)
    batch = tc.get("eval_batch", 64)
    heads = model_config(config).get("heads", 2)
    names = [nm for nm in store.names() if nm.startswith(evaluator.NS + "/")]
    sub = _SubStore(store, names)
    adam = nn.Adam(sub, lr=tc.get("lr_evaluator", 1e-3))
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 13]))
    curve = []
    for step in range(steps):
        idx = rng.choice(len(prep), size=min(batch, len(prep)), replace=False)
        x3 = np.stack([prep[i].exposure_rows for i in idx])
        labels = np.stack([prep[i].labels for i in idx])
        loss = _evaluator_step(store, adam, names, x3, labels, heads)
        curve.append((step, loss))
    return curve


class _SubStore:
    """Adam-compatible view over a subset of a ParamStore."""

    def __init__(self, store, names):
        self.store = store
        self._names = set(names)

    def get(self, name):
        if name not in self._names:
            raise KeyError(name)
        return self.store.get(name)


def _evaluator_step(store, adam, names, x3, labels, heads):
    with ad.Tape() as tape:
        probs = evaluator.evaluate_batch(store, x3, heads)
        loss = evaluator.bce_loss(probs, labels)
    val = loss.item()
    if not np.isfinite(val):
        raise RuntimeError(f"evaluator loss is not finite: {val}")
    grads = ad.grad(loss, [store.get(nm) for nm in names], tape)
    adam.step(dict(zip(names, grads)))
    return val


def exposure_prob_cache(prep, store, heads, chunk=512):
    """Frozen-evaluator click probabilities for every logged list."""
    out = np.zeros((len(prep), prep[0].exposure_rows.shape[0]))
    for lo in range(0, len(prep), chunk):
        hi = min(lo + chunk, len(prep))
        x3 = np.stack([p.exposure_rows for p in prep[lo:hi]])
        out[lo:hi] = evaluator.predict_probs(store, x3, heads)
    return out


# ----------------------------------------------------- actor phase

def actor_loss(reward_gen, reward_exp, step_probs):
    """REINFORCE loss for one page: -(advantage) * sum log a. The
    advantage is a constant; no gradient flows through the rewards."""
    for p in step_probs:
        if p <= 0.0:
            raise ValueError("step probability must be positive")
    return -(reward_gen - reward_exp) * float(np.sum(np.log(step_probs)))


@dataclasses.dataclass
class LossReport:
    loss: float
    advantage: float
    reward_gen: float
    reward_exp: float
    w: np.ndarray
    utilities_gen: dict
    utilities_exp: dict


def conditional_train_step(prep_batch, store, shapes, util_set, adams, config,
                           step_entropy, exp_probs=None, trace=None):
    """One Alg-1 conditional step over a batch of pages.

    adams: {"phi": Adam, "wbar": Adam or None}; exp_probs: cached
    evaluator probabilities aligned with prep_batch (engagement only);
    step_entropy: list of ints making this step's draws reproducible.
    """
    tc = config.get("train", {})
    mc = model_config(config)
    heads = mc.get("heads", 2)
    window = mc.get("local_window", 3)
    b = len(prep_batch)
    _, n = dims(config)

    if trace is not None:
        trace.append("sample_w")
    w_rng = np.random.default_rng(np.random.SeedSequence(step_entropy + [0]))
    w = utilities.sample_preference(util_set.w_max(), w_rng)

    feats3 = np.stack([p.feats for p in prep_batch])
    meta = actor.stack_meta([p.meta for p in prep_batch])
    rngs = [np.random.default_rng(np.random.SeedSequence(step_entropy + [1, pb]))
            for pb in range(b)]

    with ad.Tape() as tape:
        if trace is not None:
            trace.append("hypernet")
        theta_w = hypernet.generate(store, w, shapes)
        merged = hypernet.assemble(theta_w, store, shapes)
        if trace is not None:
            trace.append("generate")
        indices, step_probs, logp_sum = actor.generate_batch(
            merged, feats3, meta, n, "sample", rngs=rngs, window=window,
            score_bound=mc.get("score_bound", 6.0))

        if trace is not None:
            trace.append("reward")
        gen_pages = pages_from_indices(prep_batch, indices)
        universes = [p.universe for p in prep_batch]
        gen_probs = None
        if util_set.needs_evaluator():
            rows3 = np.stack([p.feats[row] for p, row in zip(prep_batch, indices)])
            gen_probs = evaluator.predict_probs(store, rows3, heads)
        gen_grades = page_grades(prep_batch, indices)
        utils_gen = util_set.compute(gen_pages, eng_probs=gen_probs,
                                     universes=universes, grades=gen_grades)
        exp_pages = [p.sample.exposure_items() for p in prep_batch]
        exp_rows = [p.exposure_idx for p in prep_batch]
        exp_grades = page_grades(prep_batch, exp_rows)
        utils_exp = util_set.compute(exp_pages, eng_probs=exp_probs,
                                     universes=universes, grades=exp_grades)
        reward_gen = util_set.reward(utils_gen, w)
        reward_exp = util_set.reward(utils_exp, w)
        advantage = reward_gen - reward_exp
        if util_set.page_decomposable():
            # same expected gradient as the batch-level advantage, but
            # credit lands on the page that earned it (lower variance)
            vals_gen = util_set.compute_per_page(
                gen_pages, eng_probs=gen_probs, universes=universes,
                grades=gen_grades)
            vals_exp = util_set.compute_per_page(
                exp_pages, eng_probs=exp_probs, universes=universes,
                grades=exp_grades)
            adv_rows = (vals_gen - vals_exp) @ w
            loss = ad.scale(
                ad.sum_all(ad.mul(logp_sum, ad.Tensor(adv_rows[:, None]))),
                -1.0 / b)
        else:
            loss = ad.scale(ad.sum_all(logp_sum), -advantage / b)

    val = loss.item()
    if not np.isfinite(val):
        raise RuntimeError(f"actor loss is not finite: {val}")

    if trace is not None:
        trace.append("update")
    phi_names = [nm for nm in store.names() if nm.startswith(hypernet.PHI + "/")]
    wbar_names = ([nm for nm in store.names() if nm.startswith(actor.WBAR + "/")]
                  if tc.get("joint_wbar", True) else [])
    names = phi_names + wbar_names
    grads = ad.grad(loss, [store.get(nm) for nm in names], tape)
    gdict = dict(zip(names, grads))
    for nm, g in gdict.items():
        if not np.all(np.isfinite(g)):
            raise RuntimeError(f"non-finite gradient for {nm}")
    cap = tc.get("clip", 5.0)
    gdict, _ = nn.clip_global_norm(gdict, cap if cap is not None else np.inf)
    adams["phi"].step({nm: gdict[nm] for nm in phi_names})
    if wbar_names and adams.get("wbar") is not None:
        adams["wbar"].step({nm: gdict[nm] for nm in wbar_names})

    return LossReport(
        loss=val, advantage=advantage, reward_gen=reward_gen,
        reward_exp=reward_exp, w=w, utilities_gen=utils_gen,
        utilities_exp=utils_exp,
    )


# ----------------------------------------------------------- train

def init_model_store(config, d_in, n):
    """Base actor + hypernetwork + evaluator in one deterministic store."""
    seed = int(config.get("seed", 0))
    mc = model_config(config)
    util_set = build_utility_set(config)
    store = nn.ParamStore()
    actor.init_base(store, mc, d_in,
                    np.random.default_rng(np.random.SeedSequence([seed, 10])))
    shapes = actor.head_shapes(mc)
    hypernet.init_hypernet(store, len(util_set.names()), shapes,
                           np.random.default_rng(np.random.SeedSequence([seed, 12])),
                           hidden=mc.get("hyper_hidden", 64))
    evaluator.init_evaluator(store, mc, n, d_in,
                             np.random.default_rng(np.random.SeedSequence([seed, 11])))
    return store, shapes, util_set


def train(train_samples, config, out_dir=None, test_samples=None, trace=None):
    """Full pipeline: evaluator pre-training, conditional REINFORCE,
    bundle + curve (+ final eval row when test data is given)."""
    if not train_samples:
        raise ValueError("no training samples")
    seed = int(config.get("seed", 0))
    tc = config.get("train", {})
    _, n = dims(config)
    click_model = datagen.build_click_model(data_config(config), seed)
    prep = prepare_samples(train_samples, click_model)
    d_in = prep[0].feats.shape[1]
    store, shapes, util_set = init_model_store(config, d_in, n)

    eval_curve = []
    exp_prob_table = None
    if util_set.needs_evaluator():
        eval_curve = train_evaluator(prep, store, config, seed)
        exp_prob_table = exposure_prob_cache(
            prep, store, model_config(config).get("heads", 2))

    phi_names = [nm for nm in store.names() if nm.startswith(hypernet.PHI + "/")]
    wbar_names = [nm for nm in store.names() if nm.startswith(actor.WBAR + "/")]
    adams = {
        "phi": nn.Adam(_SubStore(store, phi_names), lr=tc.get("lr_hypernet", 1e-3)),
        "wbar": nn.Adam(_SubStore(store, wbar_names), lr=tc.get("lr_actor", 1e-3)),
    }

    steps = tc.get("steps", 20000)
    batch = tc.get("batch_size", 64)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 14]))
    curve = []
    checkpoint_every = tc.get("checkpoint_every", 0)
    for step in range(steps):
        if trace is not None:
            trace.append("sample_data")
        idx = rng.choice(len(prep), size=min(batch, len(prep)), replace=False)
        prep_batch = [prep[i] for i in idx]
        exp_probs = exp_prob_table[idx] if exp_prob_table is not None else None
        report = conditional_train_step(
            prep_batch, store, shapes, util_set, adams, config,
            [seed, 2, step], exp_probs=exp_probs, trace=trace)
        curve.append(report)
        if checkpoint_every and (step + 1) % checkpoint_every == 0 and out_dir:
            save_bundle(os.path.join(out_dir, f"checkpoint_{step + 1}"),
                        store, config, shapes, util_set)

    artifacts = {}
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        artifacts["bundle"] = save_bundle(out_dir, store, config, shapes, util_set)
        artifacts["curve"] = write_curve(
            os.path.join(out_dir, CURVE_FILE), curve, util_set)
        if test_samples is not None:
            w_eval = resolve_eval_weights(config, util_set)
            rows = evaluate_controllability(
                store, shapes, util_set, test_samples, config, [w_eval])
            artifacts["eval"] = write_sweep(
                os.path.join(out_dir, EVAL_FILE), rows, util_set,
                k=config.get("eval", {}).get("k", 5))
    return store, shapes, util_set, curve, eval_curve, artifacts


def write_curve(path, reports, util_set):
    names = util_set.names()
    with open(path, "w", newline="", encoding="utf-8") as f:
        wr = csv.writer(f)
        wr.writerow(["step", "l_actor", "advantage"] + names)
        for i, r in enumerate(reports):
            wr.writerow([i, repr(r.loss), repr(r.advantage)]
                        + [repr(r.utilities_gen[nm]) for nm in names])
    return path


# ------------------------------------------------------ evaluation

def evaluate_controllability(store, shapes, util_set, test_samples, config,
                             weight_rows, chunk=512):
    """Greedy-generate the test set at each weight vector; one row of
    rank metrics + utility values per vector."""
    mc = model_config(config)
    heads = mc.get("heads", 2)
    window = mc.get("local_window", 3)
    k = config.get("eval", {}).get("k", 5)
    _, n = dims(config)
    model = datagen.build_click_model(data_config(config), int(config.get("seed", 0)))
    prep = prepare_samples(test_samples, model)

    rows = []
    for w in weight_rows:
        w = np.asarray(w, dtype=np.float64)
        theta_w = hypernet.generate(store, w, shapes)
        merged = hypernet.assemble(theta_w, store, shapes)
        pages = []
        chosen_grades = []
        prob_lists = [] if util_set.needs_evaluator() else None
        m_map, m_ndcg, m_ilad, m_err = [], [], [], []
        for lo in range(0, len(prep), chunk):
            hi = min(lo + chunk, len(prep))
            pb = prep[lo:hi]
            feats3 = np.stack([p.feats for p in pb])
            meta = actor.stack_meta([p.meta for p in pb])
            indices, _, _ = actor.generate_batch(
                merged, feats3, meta, n, "greedy", window=window,
                score_bound=mc.get("score_bound", 6.0))
            batch_pages = pages_from_indices(pb, indices)
            pages.extend(batch_pages)
            chosen_grades.extend(page_grades(pb, indices))
            if prob_lists is not None:
                rows3 = np.stack([p.feats[row] for p, row in zip(pb, indices)])
                prob_lists.extend(list(evaluator.predict_probs(store, rows3, heads)))
            for p, page, rel in zip(pb, batch_pages, chosen_grades[lo:hi]):
                feats = [it.features for it in page]
                intents = [it.category for it in page]
                m_map.append(metrics.map_at_k(rel, k))
                m_ndcg.append(metrics.ndcg_at_k(rel, k))
                m_ilad.append(metrics.ilad_at_k(feats, k))
                m_err.append(metrics.err_ia_at_k(intents, rel, k, p.universe))
        utils = util_set.compute(pages, eng_probs=prob_lists,
                                 universes=[p.universe for p in prep],
                                 grades=chosen_grades)
        row = {"w": w,
               f"map@{k}": float(np.mean(m_map)),
               f"ndcg@{k}": float(np.mean(m_ndcg)),
               f"ilad@{k}": float(np.mean(m_ilad)),
               f"err_ia@{k}": float(np.mean(m_err))}
        row.update(utils)
        rows.append(row)
    return rows


def sweep_weights(util_set, grid, axis=None, base=None):
    """Weight vectors for a sweep.

    Two utilities and no axis: the coupled (t, 1-t)*caps lambda grid.
    Otherwise: sweep ``axis`` (utility name) 0..cap, others at ``base``
    (defaults to caps/2).
    """
    caps = util_set.w_max()
    names = util_set.names()
    if len(names) == 2 and axis is None:
        ts = np.linspace(0.0, 1.0, grid)
        return [np.array([t * caps[0], (1.0 - t) * caps[1]]) for t in ts]
    if axis is None:
        axis = names[0]
    if axis not in names:
        raise ValueError(f"unknown sweep axis {axis!r}")
    j = names.index(axis)
    base = caps / 2.0 if base is None else np.asarray(base, dtype=np.float64)
    out = []
    for v in np.linspace(0.0, caps[j], grid):
        w = base.copy()
        w[j] = v
        out.append(w)
    return out


def write_sweep(path, rows, util_set, k=5):
    names = util_set.names()
    n_u = len(names)
    with open(path, "w", newline="", encoding="utf-8") as f:
        wr = csv.writer(f)
        wr.writerow([f"w_{i + 1}" for i in range(n_u)]
                    + [f"map@{k}", f"ndcg@{k}", f"ilad@{k}", f"err_ia@{k}"]
                    + names)
        for r in rows:
            wr.writerow([repr(float(v)) for v in r["w"]]
                        + [repr(r[f"map@{k}"]), repr(r[f"ndcg@{k}"]),
                           repr(r[f"ilad@{k}"]), repr(r[f"err_ia@{k}"])]
                        + [repr(r[nm]) for nm in names])
    return path


# ---------------------------------------------------------- bundle

def save_bundle(out_dir, store, config, shapes, util_set):
    os.makedirs(out_dir, exist_ok=True)
    snap_path = os.path.join(out_dir, BUNDLE_SNAPSHOT)
    snapshot.save_store(snap_path, store.arrays())
    digest = snapshot.file_hash(snap_path)
    manifest = {
        "version": 1,
        "config": config,
        "head_shapes": [[name, list(shape)] for name, shape in shapes],
        "utility_names": util_set.names(),
        "w_max": [float(v) for v in util_set.w_max()],
        "snapshot_hash": digest,
    }
    with open(os.path.join(out_dir, BUNDLE_MANIFEST), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
        f.write("\n")
    return out_dir


@dataclasses.dataclass
class Bundle:
    store: nn.ParamStore
    config: dict
    shapes: list
    util_set: utilities.UtilitySet
    hash: str


def load_bundle(path):
    with open(os.path.join(path, BUNDLE_MANIFEST), "r", encoding="utf-8") as f:
        manifest = json.load(f)
    snap_path = os.path.join(path, BUNDLE_SNAPSHOT)
    digest = snapshot.file_hash(snap_path)
    if digest != manifest["snapshot_hash"]:
        raise ValueError("bundle snapshot hash does not match its manifest")
    arrays = snapshot.load_store(snap_path)
    store = nn.ParamStore()
    for name, arr in arrays.items():
        store.add(name, arr)
    config = manifest["config"]
    util_set = build_utility_set(config)
    shapes = [(name, tuple(shape)) for name, shape in manifest["head_shapes"]]
    return Bundle(store=store, config=config, shapes=shapes,
                  util_set=util_set, hash=digest)
