"""Independent reference implementations used as test oracles.

Everything here is deliberately written with plain Python loops, full sorts,
and exhaustive enumeration, independent of the library's vectorized paths.
"""

from __future__ import annotations

import math


def full_sort_top_k(values, k):
    """Top-k indices by descending value, ties by ascending index."""
    order = sorted(range(len(values)), key=lambda i: (-values[i], i))
    return order[:k]


def scalar_softmax(values, tau=1.0):
    m = max(values)
    exps = [math.exp((v - m) / tau) for v in values]
    total = sum(exps)
    return [e / total for e in exps]


def scalar_cosine(u, v):
    return sum(a * b for a, b in zip(u, v))


def scalar_argmax(values):
    best, best_i = None, None
    for i, v in enumerate(values):
        if best is None or v > best:
            best, best_i = v, i
    return best_i


def pairwise_auroc(id_scores, ood_scores):
    """Brute-force Mann-Whitney statistic with 0.5 tie credit."""
    wins = 0
    ties = 0
    for s_id in id_scores:
        for s_ood in ood_scores:
            if s_id > s_ood:
                wins += 1
            elif s_id == s_ood:
                ties += 1
    return (wins + 0.5 * ties) / (len(id_scores) * len(ood_scores))


def scan_threshold(id_scores, fraction):
    """Largest candidate lambda with #{s >= lambda}/N >= fraction, found by
    scanning every observed score as a candidate."""
    n = len(id_scores)
    best = None
    for lam in sorted(set(id_scores), reverse=True):
        kept = sum(1 for s in id_scores if s >= lam)
        if kept / n >= fraction:
            best = lam
            break
    if best is None:
        best = min(id_scores)
    return best


def scan_fpr(id_scores, ood_scores, fraction):
    lam = scan_threshold(id_scores, fraction)
    return sum(1 for s in ood_scores if s >= lam) / len(ood_scores)


def image_alignment_oracle(images, texts, names, k_img, k_class):
    """Exhaustive reimplementation of the image-alignment similar-class vote.

    images/texts: lists of unit vectors (lists of floats). names: label
    strings. Returns {label: [similar labels]} with the library's tie rules
    (occurrence count desc, mean similarity desc, index asc).
    """
    n_classes = len(names)
    sims = [[scalar_cosine(img, txt) for txt in texts] for img in images]
    pseudo = [scalar_argmax(row) for row in sims]
    k_eff = min(k_img, n_classes - 1)

    entries = {}
    for c, name in enumerate(names):
        members = [i for i, p in enumerate(pseudo) if p == c]
        if not members or k_eff < 1:
            entries[name] = []
            continue
        counts = [0] * n_classes
        for i in members:
            ranking = [d for d in full_sort_top_k(sims[i], n_classes) if d != c]
            for d in ranking[:k_eff]:
                counts[d] += 1
        mean_sims = [
            sum(sims[i][d] for i in members) / len(members)
            for d in range(n_classes)
        ]
        occurred = [d for d in range(n_classes) if counts[d] > 0]
        occurred.sort(key=lambda d: (-counts[d], -mean_sims[d], d))
        entries[name] = [names[d] for d in occurred[:k_class]]
    return entries


def scalar_affinities(sim_row, similars_per_class, alpha, mode="simlabel"):
    """Per-class affinity from one similarity row.

    sim_row: similarities indexed by column; similars_per_class: list of
    column-index lists, one per class (first len(similars_per_class)
    columns are the ID classes).
    """
    out = []
    for c, cols in enumerate(similars_per_class):
        if mode == "mcm":
            out.append(sim_row[c])
        elif mode == "simlabel_s":
            if cols:
                out.append(sum(sim_row[d] for d in cols) / len(cols))
            else:
                out.append(-1.0)
        else:
            base = sim_row[c]
            if cols:
                base += alpha * sum(sim_row[d] for d in cols) / len(cols)
            out.append(base)
    return out
