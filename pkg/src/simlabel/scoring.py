"""OOD scores and zero-shot predictions over cosine-similarity rows.

Scores come in three modes:

* ``MCM``        - max softmax over the raw image/label similarities.
* ``SIMLABEL``   - max softmax over affinities that add, per class, the
                   alpha-weighted mean similarity to that class's similar
                   labels. With alpha = 0 this collapses to MCM exactly.
* ``SIMLABEL_S`` - the similar-class mean alone (anchor term dropped);
                   classes with no similar labels get a -1 sentinel affinity,
                   below any cosine mean, so they never win the max.

Only the C in-distribution classes enter the softmax denominator. Similar
labels that are not ID classes (CANDIDATES maps) occupy extended columns
C..C+E-1 of the similarity row, ordered by first appearance in the map,
and contribute solely through the similar-class mean.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedding_store import EmbeddingMatrix, LabelSet
from .errors import IoError, FormatError, LabelError, ParamError, ShapeError
from .simclass import SimilarClassMap
from .similarity import argmax_lowest, check_normalized, softmax, softmax_rows

EMPTY_SIMILAR_SENTINEL = -1.0

_CHUNK_ROWS = 256  # fixed scoring chunk; thread count never changes the split


class ScoreMode(enum.Enum):
    MCM = "MCM"
    SIMLABEL = "SIMLABEL"
    SIMLABEL_S = "SIMLABEL_S"


class Decision(enum.Enum):
    ID = "ID"
    OOD = "OOD"


@dataclass(frozen=True)
class ScoringConfig:
    alpha: float = 1.0
    tau: float = 1.0
    mode: ScoreMode = ScoreMode.SIMLABEL

    def __post_init__(self):
        if self.tau <= 0:
            raise ParamError(f"tau must be > 0, got {self.tau}")
        if self.alpha < 0:
            raise ParamError(f"alpha must be >= 0, got {self.alpha}")


@dataclass(frozen=True)
class ScoreBatch:
    """Per-image OOD scores and predicted class indices, plus provenance."""

    scores: np.ndarray
    predictions: np.ndarray
    mode: ScoreMode
    alpha: float
    tau: float

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        preds = np.asarray(self.predictions, dtype=np.int64)
        if scores.shape != preds.shape or scores.ndim != 1:
            raise ShapeError(
                f"scores {scores.shape} and predictions {preds.shape} must be "
                "equal-length vectors"
            )
        if scores.size and (scores.min() <= 0.0 or scores.max() > 1.0):
            raise ParamError("scores must lie in (0, 1]")
        scores.setflags(write=False)
        preds.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "predictions", preds)

    def __len__(self) -> int:
        return int(self.scores.size)


class _AffinityPlan:
    """Resolved column indices for one (map, label set) pair, reused per row.

    Columns follow the canonical extended layout: ID labels at 0..C-1, then
    the map's external labels in first-appearance order. Callers holding a
    wider text matrix (e.g. a truncated map against its original embedding
    file) can pin the layout explicitly via ``ext_names``.
    """

    def __init__(
        self,
        map_: SimilarClassMap | None,
        ids: LabelSet,
        ext_names: tuple[str, ...] | None = None,
    ):
        self.n_classes = len(ids)
        self.similar_columns: list[np.ndarray] = []
        if map_ is None:
            self.n_extended = (
                self.n_classes if ext_names is None else len(ext_names)
            )
            self.similar_columns = [np.empty(0, dtype=np.int64)] * self.n_classes
            self._size_groups: list[tuple[np.ndarray, np.ndarray]] = []
            return
        for key in map_.entries:
            if key not in ids.names:
                raise LabelError(f"map key {key!r} is not an ID label")
        if ext_names is None:
            column = {name: i for i, name in enumerate(ids.names)}
            for name in map_.external_labels(ids):
                column[name] = len(column)
        else:
            if tuple(ext_names[: len(ids)]) != ids.names:
                raise LabelError("ext_names must start with the ID labels in order")
            column = {name: i for i, name in enumerate(ext_names)}
        self.n_extended = len(column)
        for name in ids.names:
            similars = map_.entries.get(name, [])
            cols = []
            for d in similars:
                if d not in column:
                    raise LabelError(
                        f"similar label {d!r} of class {name!r} has no "
                        "similarity column"
                    )
                cols.append(column[d])
            self.similar_columns.append(np.array(cols, dtype=np.int64))
        self._size_groups = self._group_by_size()

    def _group_by_size(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Classes bucketed by similar-set size, so the per-class means can
        be computed as a handful of rectangular gathers instead of one numpy
        call per class."""
        by_size: dict[int, list[int]] = {}
        for j, cols in enumerate(self.similar_columns):
            if cols.size:
                by_size.setdefault(cols.size, []).append(j)
        return [
            (
                np.array(classes, dtype=np.int64),
                np.stack([self.similar_columns[j] for j in classes]),
            )
            for size, classes in sorted(by_size.items())
        ]

    def _similar_means(self, sim_rows: np.ndarray, out: np.ndarray,
                       scale: float) -> None:
        """out[:, j] += scale * mean of sim_rows over class j's similar set."""
        for classes, cols in self._size_groups:
            out[:, classes] += scale * sim_rows[:, cols].mean(axis=2)

    def check_row_width(self, width: int, mode: ScoreMode) -> None:
        if mode is ScoreMode.MCM:
            # MCM reads only the ID columns; extra extended columns are fine.
            if width < self.n_classes:
                raise ShapeError(
                    f"similarity row has {width} columns for {self.n_classes} "
                    "ID labels"
                )
            return
        if width != self.n_extended:
            raise LabelError(
                f"similarity row has {width} columns but the map needs "
                f"{self.n_extended} (ID + external similar labels)"
            )

    def affinities(self, sim_rows: np.ndarray, cfg: ScoringConfig) -> np.ndarray:
        """Affinity matrix (n_rows x C) for a block of similarity rows."""
        self.check_row_width(sim_rows.shape[1], cfg.mode)
        c = self.n_classes
        if cfg.mode is ScoreMode.MCM:
            return sim_rows[:, :c].copy()
        if cfg.mode is ScoreMode.SIMLABEL_S:
            out = np.full((sim_rows.shape[0], c), EMPTY_SIMILAR_SENTINEL)
            for classes, cols in self._size_groups:
                out[:, classes] = sim_rows[:, cols].mean(axis=2)
            return out
        out = sim_rows[:, :c].copy()
        self._similar_means(sim_rows, out, cfg.alpha)
        return out


def affinity_vector(
    sim_row_ext: np.ndarray,
    map_: SimilarClassMap | None,
    ids: LabelSet,
    cfg: ScoringConfig,
) -> np.ndarray:
    """Length-C affinity vector for one image's extended similarity row."""
    row = np.asarray(sim_row_ext, dtype=np.float64)
    if row.ndim != 1 or row.size == 0:
        raise ShapeError(f"expected a 1-D similarity row, got shape {row.shape}")
    plan = _AffinityPlan(None if cfg.mode is ScoreMode.MCM else map_, ids)
    return plan.affinities(row[None, :], cfg)[0]


def simlabel_score(affinities: np.ndarray, tau: float = 1.0) -> float:
    """Maximum softmax probability over the per-class affinities."""
    return float(np.max(softmax(affinities, tau)))


def mcm_score(sim_row: np.ndarray, tau: float = 1.0) -> float:
    """Max softmax over the raw ID similarities (simlabel_score at alpha=0)."""
    return float(np.max(softmax(sim_row, tau)))


def decide(score: float, lam: float) -> Decision:
    """ID iff score >= lambda (the boundary itself counts as ID)."""
    return Decision.ID if score >= lam else Decision.OOD


def classify(affinities: np.ndarray) -> int:
    """Nearest-prototype prediction: argmax affinity, ties to lowest index."""
    return argmax_lowest(affinities)


def score_batch(
    images: EmbeddingMatrix,
    ext_text: EmbeddingMatrix,
    ids: LabelSet,
    map_: SimilarClassMap | None,
    cfg: ScoringConfig,
    n_threads: int | None = None,
    ext_names: tuple[str, ...] | None = None,
) -> ScoreBatch:
    """Score every image row; deterministic for any thread count.

    Images are processed in fixed 256-row chunks whose shapes do not depend
    on ``n_threads``, so the floating-point path (and therefore the output
    bytes) is identical whether the chunks run on one worker or many.
    """
    if map_ is None and cfg.mode is not ScoreMode.MCM:
        raise ParamError(f"mode {cfg.mode.value} requires a similar-class map")
    if images.dim != ext_text.dim:
        raise ShapeError(f"dim mismatch: images {images.dim} vs texts {ext_text.dim}")
    check_normalized(images, "images")
    check_normalized(ext_text, "text embeddings")

    plan = _AffinityPlan(
        None if cfg.mode is ScoreMode.MCM else map_, ids, ext_names=ext_names
    )
    plan.check_row_width(ext_text.n_rows, cfg.mode)

    img = images.data.astype(np.float64)
    txt = ext_text.data.astype(np.float64).T

    def run_chunk(start: int) -> tuple[np.ndarray, np.ndarray]:
        block = img[start:start + _CHUNK_ROWS] @ txt
        aff = plan.affinities(block, cfg)
        probs = softmax_rows(aff, cfg.tau)
        return probs.max(axis=1), np.argmax(aff, axis=1)

    starts = range(0, images.n_rows, _CHUNK_ROWS)
    if n_threads is not None and n_threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            parts = list(pool.map(run_chunk, starts))
    else:
        parts = [run_chunk(s) for s in starts]

    scores = np.concatenate([p[0] for p in parts])
    preds = np.concatenate([p[1] for p in parts])
    return ScoreBatch(
        scores=scores, predictions=preds, mode=cfg.mode, alpha=cfg.alpha, tau=cfg.tau
    )


def save_score_csv(batch: ScoreBatch, path: str | Path) -> None:
    """CSV with header ``index,score,prediction``; 9 significant digits."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["index", "score", "prediction"])
            for i in range(len(batch)):
                writer.writerow(
                    [i, format(batch.scores[i], ".9g"), int(batch.predictions[i])]
                )
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_score_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read back an ``index,score,prediction`` CSV as (scores, predictions)."""
    scores: list[float] = []
    preds: list[int] = []
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["index", "score", "prediction"]:
                raise FormatError(f"{path}: expected header index,score,prediction")
            for row in reader:
                if len(row) != 3:
                    raise FormatError(f"{path}: malformed row {row!r}")
                scores.append(float(row[1]))
                preds.append(int(row[2]))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return np.array(scores, dtype=np.float64), np.array(preds, dtype=np.int64)
