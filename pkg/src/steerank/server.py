"""HTTP serving: one POST endpoint re-ranks a candidate set under
caller-chosen preference weights.

The scoring head is generated per request from the submitted weights,
so no model state is mutated while serving; the bundle lives in an
atomically-swappable slot and can be replaced under traffic.
"""

import time

import numpy as np
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import actor, datagen, evaluator, hypernet, training


class BundleSlot:
    """Single-reference holder; set() swaps the whole bundle at once."""

    def __init__(self):
        self._bundle = None

    def set(self, bundle):
        self._bundle = bundle

    def get(self):
        return self._bundle


SLOT = BundleSlot()


class RequestError(ValueError):
    """400-class problem with the request body."""


def _parse_user(body):
    try:
        return datagen.UserProfile.from_json(body["user"])
    except KeyError as e:
        raise RequestError(f"user is missing field {e.args[0]!r}") from e
    except (TypeError, ValueError) as e:
        raise RequestError(f"malformed user: {e}") from e


def _parse_candidates(body):
    raw = body.get("candidates")
    if not isinstance(raw, list) or not raw:
        raise RequestError("candidates must be a non-empty list")
    items = []
    for i, d in enumerate(raw):
        try:
            items.append(datagen.Item.from_json(d))
        except KeyError as e:
            raise RequestError(
                f"candidate {i} is missing field {e.args[0]!r}") from e
        except (TypeError, ValueError) as e:
            raise RequestError(f"malformed candidate {i}: {e}") from e
    ids = [it.id for it in items]
    if len(set(ids)) != len(ids):
        raise RequestError("candidate ids must be unique")
    return items


def _parse_weights(body, util_set):
    raw = body.get("weights")
    if not isinstance(raw, dict):
        raise RequestError("weights must be an object of utility -> number")
    names = util_set.names()
    caps = util_set.w_max()
    unknown = [k for k in raw if k not in names]
    if unknown:
        raise RequestError(f"unknown utility in weights: {unknown[0]!r}")
    w = []
    for name, cap in zip(names, caps):
        if name not in raw:
            raise RequestError(f"missing weight for utility {name!r}")
        try:
            v = float(raw[name])
        except (TypeError, ValueError):
            raise RequestError(f"weight {name!r} is not a number") from None
        if not np.isfinite(v) or not 0.0 <= v <= cap:
            raise RequestError(f"weight {name}={v} outside [0, {cap}]")
        w.append(v)
    return np.array(w)


def _parse_constraints(body, items):
    raw = body.get("constraints")
    if raw in (None, {}):
        return None
    if not isinstance(raw, dict):
        raise RequestError("constraints must map position -> item id")
    id2idx = {it.id: i for i, it in enumerate(items)}
    out = {}
    for pos, item_id in raw.items():
        try:
            pos_i = int(pos)
        except (TypeError, ValueError):
            raise RequestError(f"constraint position {pos!r} is not an integer") from None
        if not isinstance(item_id, int) or item_id not in id2idx:
            raise RequestError(f"constraint at position {pos} names unknown item {item_id!r}")
        out[pos_i] = id2idx[item_id]
    return out


def create_app(slot=SLOT):
    app = FastAPI(title="steerank", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/meta")
    def meta():
        bundle = slot.get()
        if bundle is None:
            return JSONResponse(status_code=503,
                                content={"error": "no bundle loaded"})
        m, n = training.dims(bundle.config)
        dc = bundle.config["datagen"]
        return {
            "utilities": bundle.util_set.names(),
            "w_max": [float(v) for v in bundle.util_set.w_max()],
            "kinds": [s.kind for s in bundle.util_set.specs],
            "n": n,
            "m": m,
            "d_item": dc["d_item"],
            "d_user": dc["d_user"],
            "bundle": bundle.hash,
        }

    @app.post("/rerank")
    def rerank(body: dict):
        t0 = time.perf_counter()
        bundle = slot.get()
        if bundle is None:
            return JSONResponse(status_code=503,
                                content={"error": "no bundle loaded"})
        try:
            result = _rerank(bundle, body)
        except RequestError as e:
            return JSONResponse(status_code=400, content={"error": str(e)})
        except actor.InfeasibleConstraints as e:
            return JSONResponse(status_code=409, content={"error": str(e)})
        result["latency_ms"] = (time.perf_counter() - t0) * 1000.0
        return result

    return app


def _rerank(bundle, body):
    util_set = bundle.util_set
    user = _parse_user(body)
    items = _parse_candidates(body)
    w = _parse_weights(body, util_set)
    constraints = _parse_constraints(body, items)
    mode = body.get("mode", "greedy")
    if mode not in ("greedy", "sample"):
        raise RequestError(f"mode must be 'greedy' or 'sample', got {mode!r}")
    seed = body.get("seed", 0)
    if not isinstance(seed, int):
        raise RequestError("seed must be an integer")

    _, n = training.dims(bundle.config)
    if len(items) < n:
        raise RequestError(f"need at least {n} candidates, got {len(items)}")
    try:
        feats = datagen.featurize(user, items)
    except ValueError as e:
        raise RequestError(f"cannot featurize request: {e}") from e
    d_in = bundle.store.get("actor/theta_wbar/enc1/w0").shape[0]
    if feats.shape[1] != d_in:
        raise RequestError(
            f"featurized width {feats.shape[1]} does not match the "
            f"bundle's expected {d_in} (check feature dimensions)")

    theta_w = hypernet.generate(bundle.store, w, bundle.shapes)
    merged = hypernet.assemble(theta_w, bundle.store, bundle.shapes)
    meta = actor.candidate_meta(items)
    window = bundle.config["model"].get("local_window", 3)
    ranked = actor.generate_list(merged, feats, meta, n, mode, seed=seed,
                                 constraints=constraints, window=window,
                                 score_bound=bundle.config["model"].get(
                                     "score_bound", 6.0))

    page = [items[i] for i in ranked.indices]
    probs = None
    if util_set.needs_evaluator():
        rows = feats[np.array(ranked.indices, dtype=np.int64)]
        probs = [evaluator.evaluate_rows(
            bundle.store, rows, bundle.config["model"].get("heads", 2))]
    universe = sorted({it.category for it in items})
    utilities_out = util_set.compute([page], eng_probs=probs,
                                     universes=[universe])
    return {
        "items": [it.id for it in page],
        "probs": ranked.probs,
        "utilities": {k: float(v) for k, v in utilities_out.items()},
        "bundle": bundle.hash,
    }
