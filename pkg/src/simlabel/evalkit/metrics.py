"""Detection metrics: AUROC, FPR at a TPR target, threshold calibration.

AUROC is the Mann-Whitney rank statistic with exact 0.5 credit for ties:

    (#{(i,o): s_i > s_o} + 0.5 * #{(i,o): s_i = s_o}) / (|ID| * |OOD|)

Two routes compute it: direct pairwise counting (quadratic, used for small
inputs) and a sort/searchsorted route (n log n). Both count wins and ties
as integers before the one final division, so they agree bit-for-bit,
ties included.

Thresholds use the empirical order statistic, no interpolation: lambda is
the ceil(fraction*N)-th largest ID score, the largest value that keeps at
least that fraction of ID scores at or above it. Decisions are inclusive
(score >= lambda counts as ID) everywhere.
"""

from __future__ import annotations

import math

import numpy as np

from ..embedding_store import EmbeddingMatrix
from ..errors import ParamError, ShapeError
from ..similarity import check_normalized, softmax_rows

_PAIRWISE_LIMIT = 10_000  # max |ID|*|OOD| for the quadratic route


def _as_scores(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ParamError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ParamError(f"{name} contains non-finite values")
    return arr


def auroc_pairwise(id_scores, ood_scores) -> float:
    """Quadratic pairwise counting; exact integers until the final division."""
    ids = _as_scores(id_scores, "id_scores")
    oods = _as_scores(ood_scores, "ood_scores")
    wins = int(np.sum(ids[:, None] > oods[None, :]))
    ties = int(np.sum(ids[:, None] == oods[None, :]))
    return (wins + 0.5 * ties) / (ids.size * oods.size)


def auroc_sorted(id_scores, ood_scores) -> float:
    """Sort-based equivalent: per ID score, count strictly-lower and equal
    OOD scores via binary search. Agrees exactly with auroc_pairwise."""
    ids = _as_scores(id_scores, "id_scores")
    oods = _as_scores(ood_scores, "ood_scores")
    oods_sorted = np.sort(oods)
    lo = np.searchsorted(oods_sorted, ids, side="left")
    hi = np.searchsorted(oods_sorted, ids, side="right")
    wins = int(lo.sum())
    ties = int((hi - lo).sum())
    return (wins + 0.5 * ties) / (ids.size * oods.size)


def auroc(id_scores, ood_scores) -> float:
    """Probability (with tie credit) that a random ID sample outscores a
    random OOD sample. Dispatches on problem size; both routes agree exactly."""
    ids = _as_scores(id_scores, "id_scores")
    oods = _as_scores(ood_scores, "ood_scores")
    if ids.size * oods.size <= _PAIRWISE_LIMIT:
        return auroc_pairwise(ids, oods)
    return auroc_sorted(ids, oods)


def calibrate_threshold(id_scores, fraction: float = 0.95) -> float:
    """Largest lambda keeping at least `fraction` of ID scores >= lambda.

    Equals the ceil(fraction*N)-th largest ID score. The rank is computed
    with an integer fix-up so float fuzz in fraction*N cannot shift it.
    """
    ids = _as_scores(id_scores, "id_scores")
    if not 0.0 < fraction <= 1.0:
        raise ParamError(f"fraction must be in (0, 1], got {fraction}")
    n = ids.size
    m = int(math.ceil(fraction * n))
    m = min(max(m, 1), n)
    # smallest m with m/n >= fraction, immune to rounding in fraction*n
    while m > 1 and (m - 1) / n >= fraction:
        m -= 1
    while m < n and m / n < fraction:
        m += 1
    return float(np.sort(ids)[n - m])


def fpr_at_tpr(id_scores, ood_scores, fraction: float = 0.95) -> float:
    """Fraction of OOD scores at or above the ID-calibrated threshold."""
    oods = _as_scores(ood_scores, "ood_scores")
    lam = calibrate_threshold(id_scores, fraction)
    return float(np.mean(oods >= lam))


def accuracy(predictions, ground_truth) -> float:
    """Fraction of exact index matches."""
    preds = np.asarray(predictions, dtype=np.int64).ravel()
    truth = np.asarray(ground_truth, dtype=np.int64).ravel()
    if preds.shape != truth.shape:
        raise ShapeError(
            f"predictions ({preds.size}) and ground truth ({truth.size}) differ"
        )
    if preds.size == 0:
        raise ParamError("accuracy of an empty batch is undefined")
    return float(np.mean(preds == truth))


def similarity_profile(
    images_of_class: EmbeddingMatrix,
    id_text: EmbeddingMatrix,
    tau: float = 1.0,
) -> np.ndarray:
    """Per-label mean softmax score over a set of images, sorted descending.

    Since each image contributes a probability distribution over labels, the
    profile entries sum to 1.
    """
    if images_of_class.n_rows == 0:
        raise ParamError("image set must be non-empty")
    if images_of_class.dim != id_text.dim:
        raise ShapeError(
            f"dim mismatch: {images_of_class.dim} vs {id_text.dim}"
        )
    check_normalized(images_of_class, "images")
    check_normalized(id_text, "texts")
    sims = images_of_class.data.astype(np.float64) @ id_text.data.astype(np.float64).T
    mean_probs = softmax_rows(sims, tau).mean(axis=0)
    return np.sort(mean_probs)[::-1].copy()
