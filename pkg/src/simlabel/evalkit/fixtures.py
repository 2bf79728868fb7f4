"""Seeded synthetic embedding fixtures for desk-scale verification.

The generator builds a label space with planted similar-class structure and
two image populations that differ exactly in the property the consistency
score exploits:

* Text embeddings: each class sits on its own coordinate axis, blended with
  its group's mean axis, so within-group cosines are high and between-group
  cosines are ~0.
* ID images: concentrated around their class text embedding *plus* a pull
  toward the group siblings (similar-group leakage).
* OOD images: concentrated near one class's bare axis with the sibling
  component suppressed. They look confidently like that class to a
  max-similarity score, but their similarity to the class's siblings is low.

All randomness flows from the single 64-bit seed through counter-based
Philox streams (one per stage, split via SeedSequence.spawn), so rerunning
with the same spec is bit-identical and no global RNG state is touched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..embedding_store import EmbeddingMatrix, LabelSet
from ..errors import ParamError

# Construction constants. GROUP_BLEND controls within-group text cosine;
# ID_LEAK is the sibling pull on ID images (absent from OOD images, which
# sit on bare class axes); OOD_TIGHTNESS_RATIO scales the OOD concentration
# relative to the ID one so max-similarity alone separates only weakly.
GROUP_BLEND = 0.6
TEXT_JITTER = 0.05
ID_LEAK = 0.5
OOD_TIGHTNESS_RATIO = 0.62


@dataclass(frozen=True)
class FixtureSpec:
    n_classes: int = 4
    dim: int = 64
    images_per_class: int = 50
    n_ood: int = 100
    cluster_tightness: float = 8.0
    similar_group_size: int = 2
    seed: int = 7

    def __post_init__(self):
        for name in ("n_classes", "dim", "images_per_class", "n_ood",
                     "similar_group_size"):
            if getattr(self, name) < 1:
                raise ParamError(f"{name} must be >= 1")
        if self.dim < self.n_classes:
            raise ParamError(
                f"dim ({self.dim}) must be >= n_classes ({self.n_classes}) "
                "for the orthogonal construction"
            )
        if self.cluster_tightness <= 0:
            raise ParamError("cluster_tightness must be > 0")


@dataclass(frozen=True)
class Fixture:
    id_images: EmbeddingMatrix
    id_text: EmbeddingMatrix
    labels: LabelSet
    ground_truth: np.ndarray
    ood_images: EmbeddingMatrix
    groups: tuple[tuple[int, ...], ...]


def _unit_rows(m: np.ndarray) -> np.ndarray:
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def synthesize_fixture(spec: FixtureSpec) -> Fixture:
    """Deterministically build (ID images, texts, labels, truth, OOD images)."""
    c, d = spec.n_classes, spec.dim
    streams = [
        np.random.Generator(np.random.Philox(child))
        for child in np.random.SeedSequence(spec.seed).spawn(3)
    ]
    rng_text, rng_img, rng_ood = streams

    groups: list[tuple[int, ...]] = [
        tuple(range(start, min(start + spec.similar_group_size, c)))
        for start in range(0, c, spec.similar_group_size)
    ]
    group_of = {member: g for g in groups for member in g}

    axes = np.eye(c, d)
    group_means = np.stack([axes[list(group_of[j])].mean(axis=0) for j in range(c)])
    texts = _unit_rows(
        axes + GROUP_BLEND * group_means + TEXT_JITTER * rng_text.standard_normal((c, d))
    )

    # Per-class sibling direction (zero for singleton groups).
    siblings = np.zeros((c, d))
    for j in range(c):
        others = [m for m in group_of[j] if m != j]
        if others:
            siblings[j] = texts[others].sum(axis=0)
            siblings[j] /= np.linalg.norm(siblings[j])

    t = spec.cluster_tightness
    ground_truth = np.repeat(np.arange(c), spec.images_per_class)
    id_dirs = texts[ground_truth] + ID_LEAK * siblings[ground_truth]
    id_images = _unit_rows(
        t * id_dirs + rng_img.standard_normal((ground_truth.size, d))
    )

    anchors = rng_ood.integers(0, c, size=spec.n_ood)
    ood_images = _unit_rows(
        OOD_TIGHTNESS_RATIO * t * axes[anchors]
        + rng_ood.standard_normal((spec.n_ood, d))
    )

    labels = LabelSet(names=tuple(f"class_{j:03d}" for j in range(c)))
    return Fixture(
        id_images=EmbeddingMatrix(data=id_images.astype(np.float32)),
        id_text=EmbeddingMatrix(data=texts.astype(np.float32)),
        labels=labels,
        ground_truth=ground_truth,
        ood_images=EmbeddingMatrix(data=ood_images.astype(np.float32)),
        groups=tuple(groups),
    )
