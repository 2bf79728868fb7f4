"""Per-class similar-label generation.

Three strategies produce a :class:`SimilarClassMap` (label -> ordered similar
labels):

* ``from_hierarchy``       - siblings under the same super-class group.
* ``from_candidates``      - externally supplied candidate lists, filtered to
                             the top-k by text-embedding similarity.
* ``from_image_alignment`` - pseudo-label a pool of ID images, record each
                             image's top-k most similar other labels, and keep
                             the labels that occur most often per class.

A class never appears in its own similar set: the scoring affinity already
counts the anchor class separately, so including it would double-count.
All tie-breaks are fixed (higher mean similarity, then lower index), making
every strategy bit-reproducible.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedding_store import EmbeddingMatrix, LabelSet
from .errors import FormatError, IoError, LabelError, MapError, ParamError, ShapeError
from .similarity import argmax_lowest, check_normalized, similarity_matrix, top_k_rows


class MapSource(enum.Enum):
    HIERARCHY = "HIERARCHY"
    CANDIDATES = "CANDIDATES"
    IMAGE_ALIGNMENT = "IMAGE_ALIGNMENT"


@dataclass(frozen=True)
class SimilarClassMap:
    """Ordered mapping from ID label name to its similar label names."""

    entries: dict[str, list[str]]
    source: MapSource

    def __post_init__(self):
        for key, similars in self.entries.items():
            if key in similars:
                raise MapError(f"entry {key!r} lists itself as a similar class")
            if len(set(similars)) != len(similars):
                raise MapError(f"entry {key!r} contains duplicate similar classes")

    def external_labels(self, ids: LabelSet) -> list[str]:
        """Similar labels that are not ID labels, in first-appearance order."""
        known = set(ids.names)
        out: list[str] = []
        seen: set[str] = set()
        for similars in self.entries.values():
            for name in similars:
                if name not in known and name not in seen:
                    seen.add(name)
                    out.append(name)
        return out


@dataclass(frozen=True)
class Hierarchy:
    """Super-class name -> member ID labels (each label in at most one group)."""

    groups: dict[str, list[str]]

    def __post_init__(self):
        seen: set[str] = set()
        for super_name, members in self.groups.items():
            if not members:
                raise LabelError(f"hierarchy group {super_name!r} is empty")
            for label in members:
                if label in seen:
                    raise LabelError(f"label {label!r} appears in more than one group")
                seen.add(label)


@dataclass(frozen=True)
class CandidatePool:
    """ID label -> externally sourced candidate similar-label strings."""

    per_class: dict[str, list[str]]

    def __post_init__(self):
        for label, cands in self.per_class.items():
            if any(not c for c in cands):
                raise LabelError(f"empty candidate string for class {label!r}")
            if len(set(cands)) != len(cands):
                raise LabelError(f"duplicate candidates for class {label!r}")


def from_hierarchy(h: Hierarchy, ids: LabelSet) -> SimilarClassMap:
    """Each grouped label gets its group siblings (group-file order) as D.

    Labels outside every group get an empty set. Unknown labels in the
    hierarchy raise LabelError.
    """
    known = set(ids.names)
    group_of: dict[str, list[str]] = {}
    for super_name, members in h.groups.items():
        for label in members:
            if label not in known:
                raise LabelError(
                    f"hierarchy group {super_name!r} names unknown label {label!r}"
                )
            group_of[label] = members
    entries = {
        name: [m for m in group_of.get(name, []) if m != name] for name in ids.names
    }
    return SimilarClassMap(entries=entries, source=MapSource.HIERARCHY)


def from_candidates(
    pool: CandidatePool,
    ids: LabelSet,
    id_text: EmbeddingMatrix,
    cand_text: EmbeddingMatrix,
    cand_names: LabelSet,
    k: int,
) -> SimilarClassMap:
    """Keep each class's top-k candidates by cosine to the class embedding.

    Candidates tie-break by their position in the class's candidate list.
    A candidate equal to the class label itself is dropped before selection.
    """
    if k < 1:
        raise ParamError(f"k must be >= 1, got {k}")
    if id_text.n_rows != len(ids):
        raise ShapeError(
            f"id_text has {id_text.n_rows} rows for {len(ids)} ID labels"
        )
    if cand_text.n_rows != len(cand_names):
        raise ShapeError(
            f"cand_text has {cand_text.n_rows} rows for {len(cand_names)} candidates"
        )
    if id_text.dim != cand_text.dim:
        raise ShapeError(f"dim mismatch: {id_text.dim} vs {cand_text.dim}")
    check_normalized(id_text, "id_text")
    check_normalized(cand_text, "cand_text")

    cand_index = {name: i for i, name in enumerate(cand_names.names)}
    entries: dict[str, list[str]] = {}
    for c, label in enumerate(ids.names):
        candidates = [n for n in pool.per_class.get(label, []) if n != label]
        for name in candidates:
            if name not in cand_index:
                raise LabelError(
                    f"candidate {name!r} for class {label!r} has no embedding row"
                )
        if not candidates:
            entries[label] = []
            continue
        e_c = id_text.data[c].astype(np.float64)
        sims = np.array(
            [float(np.dot(e_c, cand_text.data[cand_index[n]].astype(np.float64)))
             for n in candidates]
        )
        order = np.argsort(-sims, kind="stable")[: min(k, len(candidates))]
        entries[label] = [candidates[int(i)] for i in order]
    return SimilarClassMap(entries=entries, source=MapSource.CANDIDATES)


def pseudo_label(sim_row: np.ndarray) -> int:
    """Most similar ID class for one image; ties go to the lowest index."""
    return argmax_lowest(sim_row)


def from_image_alignment(
    id_images: EmbeddingMatrix,
    id_text: EmbeddingMatrix,
    ids: LabelSet,
    k_img: int,
    k_class: int,
) -> SimilarClassMap:
    """Vote similar classes from the image pool's own similarity structure.

    1. Pseudo-label every image, partitioning the pool by predicted class.
    2. Per image, record its top-k_img most similar labels, excluding the
       pseudo-label itself (capped at the C-1 other labels).
    3. Per class, rank recorded labels by occurrence count; ties break by
       higher mean similarity over that class's partition, then lower label
       index. The top k_class ranked labels (only those that occurred) form D.

    Classes whose partition is empty get an empty set.
    """
    if k_img < 1 or k_class < 1:
        raise ParamError(f"k_img and k_class must be >= 1, got {k_img}, {k_class}")
    if id_text.n_rows != len(ids):
        raise ShapeError(
            f"id_text has {id_text.n_rows} rows for {len(ids)} ID labels"
        )
    n_classes = len(ids)
    sims = similarity_matrix(id_images, id_text).values
    pseudo = np.argmax(sims, axis=1)

    k_eff = min(k_img, n_classes - 1)
    entries: dict[str, list[str]] = {name: [] for name in ids.names}
    if k_eff < 1:
        return SimilarClassMap(entries=entries, source=MapSource.IMAGE_ALIGNMENT)

    masked = sims.copy()
    masked[np.arange(masked.shape[0]), pseudo] = -np.inf
    top = top_k_rows(masked, k_eff)

    for c, name in enumerate(ids.names):
        members = np.flatnonzero(pseudo == c)
        if members.size == 0:
            continue
        counts = np.bincount(top[members].ravel(), minlength=n_classes)
        counts[c] = 0
        occurred = np.flatnonzero(counts > 0)
        if occurred.size == 0:
            continue
        mean_sims = sims[members].mean(axis=0)
        ranked = sorted(
            (int(d) for d in occurred),
            key=lambda d: (-int(counts[d]), -mean_sims[d], d),
        )
        entries[name] = [ids.names[d] for d in ranked[:k_class]]
    return SimilarClassMap(entries=entries, source=MapSource.IMAGE_ALIGNMENT)


def save_map(m: SimilarClassMap, path: str | Path) -> None:
    """Serialize canonically (compact JSON, insertion order preserved)."""
    obj = {"source": m.source.value, "entries": m.entries}
    text = json.dumps(obj, separators=(",", ":"), ensure_ascii=False)
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_map(path: str | Path) -> SimilarClassMap:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed JSON: {exc}") from exc
    if not isinstance(obj, dict) or set(obj) != {"source", "entries"}:
        raise FormatError(f"{path}: expected object with 'source' and 'entries'")
    try:
        source = MapSource(obj["source"])
    except ValueError:
        raise FormatError(f"{path}: unknown source {obj['source']!r}") from None
    entries = obj["entries"]
    if not isinstance(entries, dict) or not all(
        isinstance(k, str) and isinstance(v, list) and all(isinstance(s, str) for s in v)
        for k, v in entries.items()
    ):
        raise FormatError(f"{path}: entries must map label -> list of labels")
    return SimilarClassMap(entries={k: list(v) for k, v in entries.items()}, source=source)


def load_hierarchy(path: str | Path) -> Hierarchy:
    """Hierarchy file: JSON object, super-class name -> array of ID labels."""
    obj = _load_json_object(path)
    if not all(
        isinstance(k, str) and isinstance(v, list) and all(isinstance(s, str) for s in v)
        for k, v in obj.items()
    ):
        raise FormatError(f"{path}: hierarchy must map super-class -> list of labels")
    return Hierarchy(groups={k: list(v) for k, v in obj.items()})


def load_candidates(path: str | Path) -> CandidatePool:
    """Candidate file: JSON object, ID label -> array of candidate strings."""
    obj = _load_json_object(path)
    if not all(
        isinstance(k, str) and isinstance(v, list) and all(isinstance(s, str) for s in v)
        for k, v in obj.items()
    ):
        raise FormatError(f"{path}: candidates must map label -> list of strings")
    return CandidatePool(per_class={k: list(v) for k, v in obj.items()})


def _load_json_object(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise FormatError(f"{path}: expected a JSON object")
    return obj
