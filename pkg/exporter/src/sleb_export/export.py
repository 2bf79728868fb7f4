"""Text and image export jobs: encode, widen to f32, L2-normalize, write.

Image folders are walked in lexicographic path order so repeated exports of
the same tree are reproducible. A folder layout of ``dir/<class>/<image>``
fills the manifest's label column; flat folders leave it empty.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .encoders import load_encoder
from .errors import EmptyInputError, LabelError
from .sleb import write_sleb

log = logging.getLogger("sleb_export")

IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp", ".gif", ".webp", ".tiff"}


@dataclass(frozen=True)
class ExportJob:
    model: str
    input_path: str
    out_embeddings: str
    prompt_template: str = "a photo of a {}"
    out_labels: str | None = None
    out_manifest: str | None = None
    batch_size: int = 32
    device: str = "cpu"

    def __post_init__(self):
        if self.prompt_template.count("{}") != 1:
            raise LabelError(
                "prompt template must contain exactly one '{}' placeholder: "
                f"{self.prompt_template!r}"
            )
        if self.batch_size < 1:
            raise LabelError("batch size must be >= 1")


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    matrix = matrix.astype(np.float32)
    norms = np.linalg.norm(matrix.astype(np.float64), axis=1, keepdims=True)
    if np.any(norms <= 1e-12):
        raise LabelError("encoder produced a zero embedding row")
    return (matrix.astype(np.float64) / norms).astype(np.float32)


def _read_labels(path: str | Path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    labels = [line for line in text.split("\n") if line != ""]
    if not labels:
        raise EmptyInputError(f"{path}: label file is empty")
    seen = set()
    for label in labels:
        if label in seen:
            raise LabelError(f"duplicate label: {label!r}")
        seen.add(label)
    return labels


def export_text_embeddings(job: ExportJob) -> int:
    """Encode one prompt per label; returns the number of rows written."""
    labels = _read_labels(job.input_path)
    encoder = load_encoder(job.model, device=job.device)
    prompts = [job.prompt_template.format(label) for label in labels]
    blocks = [
        encoder.encode_texts(prompts[i:i + job.batch_size])
        for i in range(0, len(prompts), job.batch_size)
    ]
    matrix = _normalize_rows(np.vstack(blocks))
    write_sleb(matrix, job.out_embeddings)
    if job.out_labels:
        with open(job.out_labels, "w", encoding="utf-8", newline="\n") as fh:
            for label in labels:
                fh.write(label + "\n")
    log.info("wrote %d text embeddings to %s", matrix.shape[0], job.out_embeddings)
    return matrix.shape[0]


def _collect_images(root: Path) -> list[Path]:
    paths = [
        p for p in root.rglob("*")
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    ]
    return sorted(paths, key=lambda p: str(p.relative_to(root)))


def export_image_embeddings(job: ExportJob) -> int:
    """Encode every decodable image under the input directory.

    Undecodable files are skipped with a warning and left out of the
    manifest, keeping manifest rows aligned one-to-one with matrix rows.
    """
    root = Path(job.input_path)
    if not root.is_dir():
        raise EmptyInputError(f"{root}: not a directory")
    candidates = _collect_images(root)
    if not candidates:
        raise EmptyInputError(f"{root}: no image files found")

    encoder = load_encoder(job.model, device=job.device)
    rows: list[np.ndarray] = []
    kept: list[Path] = []
    for start in range(0, len(candidates), job.batch_size):
        batch_paths = []
        batch_images = []
        for path in candidates[start:start + job.batch_size]:
            try:
                with Image.open(path) as img:
                    batch_images.append(img.convert("RGB"))
                batch_paths.append(path)
            except (UnidentifiedImageError, OSError) as exc:
                log.warning("skipping undecodable image %s: %s", path, exc)
        if batch_images:
            rows.append(encoder.encode_images(batch_images))
            kept.extend(batch_paths)

    if not kept:
        raise EmptyInputError(f"{root}: no decodable images")
    matrix = _normalize_rows(np.vstack(rows))
    write_sleb(matrix, job.out_embeddings)

    if job.out_manifest:
        with open(job.out_manifest, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["filename", "row", "label"])
            for row, path in enumerate(kept):
                rel = path.relative_to(root)
                label = rel.parts[0] if len(rel.parts) > 1 else ""
                writer.writerow([str(rel), row, label])
    log.info("wrote %d image embeddings to %s", matrix.shape[0], job.out_embeddings)
    return matrix.shape[0]
