"""Ranking accuracy/diversity metrics, exhaustive oracle, MMR baseline.

Conventions fixed here (the source papers define some of these only by
citation): NDCG uses gain = grade with discount 1/log2(i+1) and
normalizes by the list's own ideal ordering; ILAD is the mean pairwise
cosine distance over the top-k (zero vectors have similarity 0);
ERR_IA maps binary grades to stopping probability grade/2 and weights
intents uniformly over the intents present in the candidate set.
"""

import itertools
import math

import numpy as np


def map_at_k(rels, k):
    """AP@k with binary relevance, normalized by min(k, total relevant)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    total_rel = sum(1 for r in rels if r)
    if total_rel == 0:
        return 0.0
    hits = 0
    acc = 0.0
    for i, r in enumerate(rels[:k], start=1):
        if r:
            hits += 1
            acc += hits / i
    return acc / min(k, total_rel)


def ndcg_at_k(rels, k):
    if k < 1:
        raise ValueError("k must be >= 1")
    dcg = sum(r / math.log2(i + 1) for i, r in enumerate(rels[:k], start=1))
    ideal = sorted(rels, reverse=True)
    idcg = sum(r / math.log2(i + 1) for i, r in enumerate(ideal[:k], start=1))
    return dcg / idcg if idcg > 0 else 0.0


def cosine_sim(a, b):
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b)) / (na * nb)


def ilad_at_k(vectors, k):
    """Mean pairwise (1 - cosine) over the top-k items."""
    if k < 2:
        raise ValueError("ILAD needs k >= 2")
    top = vectors[:k]
    n = len(top)
    if n < 2:
        raise ValueError("fewer than 2 items")
    acc = 0.0
    cnt = 0
    for i in range(n):
        for j in range(i + 1, n):
            acc += 1.0 - cosine_sim(top[i], top[j])
            cnt += 1
    return acc / cnt


def err_ia_at_k(intents, grades, k, intent_universe):
    """Intent-aware expected reciprocal rank over the top-k.

    ``intents``/``grades`` are aligned with list positions; the intent
    distribution is uniform over ``intent_universe`` (the intents of
    the candidate set, not just the listed items). Binary grades map
    to stopping probability grade/2.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    universe = sorted(set(intent_universe))
    if not universe:
        return 0.0
    pt = 1.0 / len(universe)
    total = 0.0
    for t in universe:
        cont = 1.0
        for pos, (intent, grade) in enumerate(zip(intents[:k], grades[:k]), start=1):
            if intent != t:
                continue
            r = (2 ** grade - 1) / 2.0
            total += pt * (1.0 / pos) * r * cont
            cont *= 1.0 - r
    return total


def oracle_best_list(m, reward_fn, n):
    """Exhaustive argmax over ordered n-arrangements of range(m).

    Ties keep the lexicographically smallest index sequence (the
    iteration order of itertools.permutations). Refuses to enumerate
    more than 1e6 arrangements.
    """
    count = 1
    for i in range(n):
        count *= m - i
    if count > 10 ** 6:
        raise ValueError(f"arrangement count {count} exceeds enumeration budget")
    best = None
    best_r = -math.inf
    for perm in itertools.permutations(range(m), n):
        r = reward_fn(perm)
        if r > best_r:
            best_r = r
            best = perm
    return list(best), best_r


def mmr_rerank(features, relevance, lam, n):
    """Greedy maximal-marginal-relevance selection of n of len(features).

    Score for an unselected item: lam*rel - (1-lam)*max cosine
    similarity to the already selected set (0 when nothing is selected
    yet). Ties pick the lowest index.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must be in [0,1]")
    m = len(features)
    selected = []
    remaining = list(range(m))
    while len(selected) < n and remaining:
        best_j = None
        best_s = -math.inf
        for j in remaining:
            penalty = max((cosine_sim(features[j], features[s]) for s in selected),
                          default=0.0)
            s = lam * relevance[j] - (1.0 - lam) * penalty
            if s > best_s:
                best_s = s
                best_j = j
        selected.append(best_j)
        remaining.remove(best_j)
    return selected


def _ranks(xs):
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    ranks = [0.0] * len(xs)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for t in range(i, j + 1):
            ranks[order[t]] = avg
        i = j + 1
    return ranks


def spearman(xs, ys):
    """Spearman rank correlation with average ranks for ties; 0 when
    either side is constant."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("need two equal-length sequences of length >= 2")
    rx = _ranks(list(xs))
    ry = _ranks(list(ys))
    mx = sum(rx) / len(rx)
    my = sum(ry) / len(ry)
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    dx = math.sqrt(sum((a - mx) ** 2 for a in rx))
    dy = math.sqrt(sum((b - my) ** 2 for b in ry))
    if dx == 0.0 or dy == 0.0:
        return 0.0
    return num / (dx * dy)


def auc(labels, scores):
    """Mann-Whitney AUC; ties between scores count half."""
    pos = [s for y, s in zip(labels, scores) if y]
    neg = [s for y, s in zip(labels, scores) if not y]
    if not pos or not neg:
        raise ValueError("need both classes for AUC")
    ranks = _ranks(list(scores))
    rank_sum = sum(r for y, r in zip(labels, ranks) if y)
    n_pos, n_neg = len(pos), len(neg)
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
