"""Encoder backends behind one two-method interface.

``mock:<dim>`` is a deterministic offline encoder (hash-seeded unit vectors)
for tests and pipeline dry-runs without checkpoint downloads. Any other
model id is treated as a CLIP-style checkpoint and loaded through
torch + transformers; the ML frameworks are imported lazily so the mock
path works on machines without them.
"""

from __future__ import annotations

import hashlib

import numpy as np
from PIL import Image

from .errors import ModelLoadError

MOCK_PREFIX = "mock"
DEFAULT_MOCK_DIM = 512


def _hash_unit_vector(payload: bytes, dim: int) -> np.ndarray:
    seed = int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")
    v = np.random.default_rng(seed).standard_normal(dim)
    return (v / np.linalg.norm(v)).astype(np.float32)


class MockEncoder:
    """Deterministic stand-in: embeddings are hash-seeded unit vectors.

    Useful only for plumbing verification; carries no semantics.
    """

    def __init__(self, dim: int = DEFAULT_MOCK_DIM):
        if dim < 1:
            raise ModelLoadError(f"mock dimension must be >= 1, got {dim}")
        self.dim = dim

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        return np.stack(
            [_hash_unit_vector(t.encode("utf-8"), self.dim) for t in texts]
        )

    def encode_images(self, images: list[Image.Image]) -> np.ndarray:
        rows = []
        for img in images:
            rgb = img.convert("RGB")
            payload = rgb.tobytes() + str(rgb.size).encode("ascii")
            rows.append(_hash_unit_vector(payload, self.dim))
        return np.stack(rows)


class ClipEncoder:
    """CLIP-style checkpoint via transformers; outputs widened to float32."""

    def __init__(self, model_id: str, device: str = "cpu"):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise ModelLoadError(
                f"torch/transformers unavailable for model {model_id!r}: {exc}"
            ) from exc
        try:
            self._model = CLIPModel.from_pretrained(model_id).to(device).eval()
            self._processor = CLIPProcessor.from_pretrained(model_id)
        except Exception as exc:
            raise ModelLoadError(f"cannot load model {model_id!r}: {exc}") from exc
        self._torch = torch
        self._device = device

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        torch = self._torch
        inputs = self._processor(
            text=texts, return_tensors="pt", padding=True, truncation=True
        ).to(self._device)
        with torch.no_grad():
            features = self._model.get_text_features(**inputs)
        return features.float().cpu().numpy().astype(np.float32)

    def encode_images(self, images: list[Image.Image]) -> np.ndarray:
        torch = self._torch
        inputs = self._processor(images=images, return_tensors="pt").to(self._device)
        with torch.no_grad():
            features = self._model.get_image_features(**inputs)
        return features.float().cpu().numpy().astype(np.float32)


def load_encoder(model_id: str, device: str = "cpu"):
    if model_id == MOCK_PREFIX:
        return MockEncoder()
    if model_id.startswith(MOCK_PREFIX + ":"):
        spec = model_id.split(":", 1)[1]
        try:
            dim = int(spec)
        except ValueError:
            raise ModelLoadError(f"bad mock dimension {spec!r}") from None
        return MockEncoder(dim)
    return ClipEncoder(model_id, device=device)
