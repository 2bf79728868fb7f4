"""Dense numeric kernels: cosine similarity, softmax, deterministic top-k.

All functions here are pure and operate on immutable inputs. Reductions use
a fixed evaluation order, so results do not depend on how callers partition
work across threads. Ties in argmax/top-k always break to the lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding_store import EmbeddingMatrix
from .errors import NormError, ParamError, ShapeError

NORM_TOLERANCE = 1e-4


@dataclass(frozen=True)
class SimilarityMatrix:
    """Cosine similarities between n_images image rows and n_labels text rows."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n_images(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_labels(self) -> int:
        return int(self.values.shape[1])

    def row(self, i: int) -> np.ndarray:
        return self.values[i]


def _check_unit(v: np.ndarray, name: str) -> None:
    norm = float(np.linalg.norm(v))
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise NormError(f"{name} has norm {norm:.6f}, expected 1 within {NORM_TOLERANCE}")


def cosine(h: np.ndarray, e: np.ndarray) -> float:
    """Cosine similarity of two unit vectors (their dot product)."""
    h = np.asarray(h, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    if h.shape != e.shape or h.ndim != 1:
        raise ShapeError(f"vector shapes differ: {h.shape} vs {e.shape}")
    _check_unit(h, "first argument")
    _check_unit(e, "second argument")
    return float(np.dot(h, e))


def check_normalized(m: EmbeddingMatrix, name: str = "matrix") -> None:
    """Raise NormError unless every row of `m` is unit-norm within 1e-4."""
    norms = m.row_norms()
    bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOLERANCE)
    if bad.size:
        i = int(bad[0])
        raise NormError(
            f"{name} row {i} has norm {norms[i]:.6f}; normalize embeddings first"
        )


def similarity_matrix(images: EmbeddingMatrix, texts: EmbeddingMatrix) -> SimilarityMatrix:
    """All pairwise cosines: entry (i, c) = cos(image row i, text row c)."""
    if images.dim != texts.dim:
        raise ShapeError(f"dim mismatch: images {images.dim} vs texts {texts.dim}")
    check_normalized(images, "images")
    check_normalized(texts, "texts")
    values = images.data.astype(np.float64) @ texts.data.astype(np.float64).T
    return SimilarityMatrix(values=values)


def softmax(v: np.ndarray, tau: float = 1.0) -> np.ndarray:
    """Temperature softmax with max-subtraction for numerical stability."""
    if tau <= 0:
        raise ParamError(f"temperature must be > 0, got {tau}")
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ShapeError(f"softmax expects a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ParamError("softmax input contains non-finite values")
    z = (v - v.max()) / tau
    e = np.exp(z)
    return e / e.sum()


def softmax_rows(m: np.ndarray, tau: float = 1.0) -> np.ndarray:
    """Row-wise temperature softmax over a 2-D array."""
    if tau <= 0:
        raise ParamError(f"temperature must be > 0, got {tau}")
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] == 0:
        raise ShapeError(f"expected a 2-D array with columns, got shape {m.shape}")
    z = (m - m.max(axis=1, keepdims=True)) / tau
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def top_k_indices(v: np.ndarray, k: int) -> list[int]:
    """Indices of the k largest values, descending; ties break to lower index.

    A stable sort on the negated values realizes the tie rule exactly, so the
    output is deterministic regardless of execution environment.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"expected a 1-D vector, got shape {v.shape}")
    if k < 1 or k > v.size:
        raise ParamError(f"k must be in [1, {v.size}], got {k}")
    order = np.argsort(-v, kind="stable")
    return [int(i) for i in order[:k]]


def top_k_rows(m: np.ndarray, k: int) -> np.ndarray:
    """Row-wise top-k indices with the same deterministic tie rule."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D array, got shape {m.shape}")
    if k < 1 or k > m.shape[1]:
        raise ParamError(f"k must be in [1, {m.shape[1]}], got {k}")
    return np.argsort(-m, axis=1, kind="stable")[:, :k]


def argmax_lowest(v: np.ndarray) -> int:
    """Argmax with ties resolved to the lowest index."""
    v = np.asarray(v)
    if v.ndim != 1 or v.size == 0:
        raise ShapeError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    return int(np.argmax(v))
