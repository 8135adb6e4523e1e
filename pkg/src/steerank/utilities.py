"""Business utilities over page batches, preference sampling, R_w.

All utilities are computed on a PageBatch: a list of pages, each an
ordered list of Items of equal length (positions are 1-based). Flow
control penalizes pages where a group's exposure ratio (or mean
position) sits on the wrong side of a threshold; the gated variants
additionally switch off once the whole batch clears the ratio
threshold, so they stop pushing when the batch-level target is met.
"""

import dataclasses
import math

import numpy as np

from . import metrics

KINDS = ("strict", "gated", "positional", "diversity", "ordering", "engagement")
# internal-only kind used by the lambda training preset; never accepted
# from the config schema
STEP_ERR_DIVERSITY = "_step_err_diversity"

# kinds whose batch value is the plain mean of single-page values; the
# gated/positional kinds switch on batch-level ratios and are excluded
PAGE_LEVEL_KINDS = ("strict", "diversity", "ordering", "engagement",
                    STEP_ERR_DIVERSITY)


@dataclasses.dataclass
class UtilitySpec:
    name: str
    kind: str
    group_field: str = None
    group_value: object = None
    t_e: float = None
    t_p: float = None
    window: object = None      # positive int, or None for unbounded
    priority_map: dict = None
    w_max: float = 1.0

    def member(self, item):
        v = getattr(item, self.group_field)
        if self.group_value is None:
            return bool(v)
        return v == self.group_value

    def group_of(self, item):
        return getattr(item, self.group_field)

    def priority_of(self, item):
        label = getattr(item, self.group_field)
        if self.priority_map:
            return self.priority_map[str(label)]
        return float(label)


def parse_utility(block):
    kind = block.get("kind")
    if kind not in KINDS:
        raise ValueError(f"unknown utility kind: {kind!r}")
    spec = UtilitySpec(
        name=block["name"],
        kind=kind,
        group_field=block.get("group_field"),
        group_value=block.get("group_value"),
        t_e=block.get("t_e"),
        t_p=block.get("t_p"),
        window=block.get("window"),
        priority_map=block.get("priority_map"),
        w_max=float(block.get("w_max", 1.0)),
    )
    if kind in ("strict", "gated", "positional"):
        if spec.group_field is None or spec.t_e is None:
            raise ValueError(f"utility {spec.name}: flow control needs group_field and t_e")
        if kind == "positional" and spec.t_p is None:
            raise ValueError(f"utility {spec.name}: positional flow control needs t_p")
    if kind in ("diversity", "ordering") and spec.group_field is None:
        raise ValueError(f"utility {spec.name}: needs group_field")
    if not 0.0 <= spec.w_max <= 1.0:
        raise ValueError(f"utility {spec.name}: w_max must be in [0,1]")
    return spec


def _check_batch(pages):
    if not pages:
        raise ValueError("empty page batch")
    plen = len(pages[0])
    for p in pages:
        if len(p) != plen:
            raise ValueError("pages in a batch must have equal length")
    return plen


def flow_control_strict(pages, member, t_e):
    """-(1/|b|) * count of pages whose group ratio is <= t_e."""
    nb = len(pages)
    _check_batch(pages)
    violations = 0
    for p in pages:
        cnt = sum(1 for it in p if member(it))
        if cnt / len(p) <= t_e:
            violations += 1
    return -(violations / nb)


def flow_control_gated(pages, member, t_e):
    """Strict penalty, active only while the batch-level ratio is <= t_e."""
    _check_batch(pages)
    total = sum(len(p) for p in pages)
    g_total = sum(1 for p in pages for it in p if member(it))
    if g_total / total > t_e:
        return 0.0
    return flow_control_strict(pages, member, t_e)


def flow_control_positional(pages, member, t_e, t_p):
    """Gated ratio penalty plus a gated mean-position penalty.

    The position part fires only while the batch-level mean position
    of group items is >= t_p; a batch (or page) with zero group items
    has no defined mean position and contributes nothing.
    """
    nb = len(pages)
    _check_batch(pages)
    value = flow_control_gated(pages, member, t_e)
    all_pos = [i for p in pages for i, it in enumerate(p, start=1) if member(it)]
    if not all_pos:
        return value
    if sum(all_pos) / len(all_pos) >= t_p:
        late_pages = 0
        for p in pages:
            pos = [i for i, it in enumerate(p, start=1) if member(it)]
            if pos and sum(pos) / len(pos) >= t_p:
                late_pages += 1
        value += -(late_pages / nb)
    return value


def diversity_utility(pages, group_of, window=None):
    """Fraction of items whose group is absent from the preceding
    ``window`` positions on their page (unbounded when None)."""
    _check_batch(pages)
    if window is not None and window < 1:
        raise ValueError("window must be >= 1 or None")
    novel = 0
    total = 0
    for p in pages:
        groups = [group_of(it) for it in p]
        for i in range(len(groups)):
            lo = 0 if window is None else max(0, i - window)
            if groups[i] not in groups[lo:i]:
                novel += 1
            total += 1
    return novel / total


def group_ordering_utility(pages, priority_of):
    """Mean over pages of the fraction of position pairs i<j with
    priority_i >= priority_j. A fully priority-sorted page scores 1."""
    plen = _check_batch(pages)
    if plen < 2:
        raise ValueError("group ordering needs pages of length >= 2")
    acc = 0.0
    for p in pages:
        pri = [priority_of(it) for it in p]
        sat = 0
        for i in range(len(pri)):
            for j in range(i + 1, len(pri)):
                if pri[i] >= pri[j]:
                    sat += 1
        acc += sat / (len(pri) * (len(pri) - 1) / 2)
    return acc / len(pages)


def engagement_utility(prob_lists):
    """Mean predicted click probability across all positions of all pages."""
    vals = [float(v) for probs in prob_lists for v in probs]
    if not vals:
        raise ValueError("no probabilities")
    return sum(vals) / len(vals)


def scalarize(values, weights):
    if len(values) != len(weights):
        raise ValueError(f"dimension mismatch: {len(values)} vs {len(weights)}")
    return float(np.dot(np.asarray(values, dtype=np.float64),
                        np.asarray(weights, dtype=np.float64)))


def sample_preference(w_max, rng):
    """Independent uniform draw on [0, w_max_i] per utility."""
    caps = np.asarray(w_max, dtype=np.float64)
    return caps * rng.uniform(size=caps.shape)


def diversity_step_reward(intents, i, intent_universe, grades=None):
    """Marginal ERR_IA gain of the i-th placement (1-based).

    Telescopes: the sum over i = 1..N equals ERR_IA@N of the full
    list. ``grades`` default to all-1 (structural/intent-coverage
    variant used as a training reward when no labels exist).
    """
    if not 1 <= i <= len(intents):
        raise ValueError(f"step index {i} out of range 1..{len(intents)}")
    if grades is None:
        grades = [1] * len(intents)
    cur = metrics.err_ia_at_k(intents, grades, i, intent_universe)
    prev = metrics.err_ia_at_k(intents, grades, i - 1, intent_universe) if i > 1 else 0.0
    return cur - prev


def step_err_diversity(pages, group_of, universes, grades=None):
    """Mean over pages of ERR_IA over the full page (the telescoped sum
    of per-step marginal gains), with each page's intent universe taken
    from its candidate set.

    ``grades`` is one relevance list per page; without labels every
    grade defaults to 1, degrading to pure intent coverage.
    """
    _check_batch(pages)
    acc = 0.0
    for pi, (p, universe) in enumerate(zip(pages, universes)):
        intents = [group_of(it) for it in p]
        rel = [1] * len(p) if grades is None else grades[pi]
        acc += metrics.err_ia_at_k(intents, rel, len(p), universe)
    return acc / len(pages)


class UtilitySet:
    """Ordered utility collection; the order fixes w's coordinates and
    every report/CSV column order downstream."""

    def __init__(self, specs):
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            raise ValueError("duplicate utility names")
        self.specs = list(specs)

    @classmethod
    def from_config(cls, blocks):
        return cls([parse_utility(b) for b in blocks])

    @classmethod
    def lambda_preset(cls, group_field="category"):
        """Engagement + per-step ERR_IA diversity, caps 1.0 each."""
        return cls([
            UtilitySpec(name="acc", kind="engagement", w_max=1.0),
            UtilitySpec(name="div", kind=STEP_ERR_DIVERSITY,
                        group_field=group_field, w_max=1.0),
        ])

    def names(self):
        return [s.name for s in self.specs]

    def w_max(self):
        return np.array([s.w_max for s in self.specs])

    def needs_evaluator(self):
        return any(s.kind == "engagement" for s in self.specs)

    def compute(self, pages, eng_probs=None, universes=None, grades=None):
        """Utility values for one PageBatch, as name -> float."""
        out = {}
        for s in self.specs:
            if s.kind == "strict":
                v = flow_control_strict(pages, s.member, s.t_e)
            elif s.kind == "gated":
                v = flow_control_gated(pages, s.member, s.t_e)
            elif s.kind == "positional":
                v = flow_control_positional(pages, s.member, s.t_e, s.t_p)
            elif s.kind == "diversity":
                v = diversity_utility(pages, s.group_of, s.window)
            elif s.kind == "ordering":
                v = group_ordering_utility(pages, s.priority_of)
            elif s.kind == "engagement":
                if eng_probs is None:
                    raise ValueError("engagement utility needs evaluator probabilities")
                v = engagement_utility(eng_probs)
            elif s.kind == STEP_ERR_DIVERSITY:
                if universes is None:
                    raise ValueError("step-ERR diversity needs per-page intent universes")
                v = step_err_diversity(pages, s.group_of, universes, grades)
            else:
                raise ValueError(f"unhandled kind {s.kind!r}")
            out[s.name] = v
        return out

    def reward(self, values, w):
        return scalarize([values[n] for n in self.names()], w)

    def page_decomposable(self):
        return all(s.kind in PAGE_LEVEL_KINDS for s in self.specs)

    def compute_per_page(self, pages, eng_probs=None, universes=None,
                         grades=None):
        """Single-page utility values as a (len(pages), n_utilities)
        array whose column means equal ``compute`` on the same batch.
        Only valid when ``page_decomposable()``."""
        if not self.page_decomposable():
            raise ValueError("utility set contains batch-gated kinds")
        _check_batch(pages)
        out = np.empty((len(pages), len(self.specs)))
        for pi, page in enumerate(pages):
            vals = self.compute(
                [page],
                eng_probs=None if eng_probs is None else [eng_probs[pi]],
                universes=None if universes is None else [universes[pi]],
                grades=None if grades is None else [grades[pi]],
            )
            out[pi] = [vals[nm] for nm in self.names()]
        return out
