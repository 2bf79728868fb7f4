"""Embedding matrices and label sets, plus their on-disk formats.

The binary embedding format (SLEB) is deliberately minimal so that any
exporter can produce it and any consumer can memory-check it:

    bytes 0-3    ASCII magic ``SLEB``
    bytes 4-7    u32 little-endian format version (currently 1)
    bytes 8-11   u32 little-endian row count N
    bytes 12-15  u32 little-endian dimension D
    bytes 16-    N*D float32 little-endian values, row-major

Labels travel separately as UTF-8 text, one label per line (LF endings,
no blank lines); line i names row i of the paired matrix.

Loading never normalizes: the stored file is the encoder's raw output.
Scoring kernels require unit rows and check them, so normalization is an
explicit, visible step (:func:`l2_normalize`).
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    DegenerateRowError,
    FormatError,
    IoError,
    LabelError,
    PairingError,
)

SLEB_MAGIC = b"SLEB"
SLEB_VERSION = 1
_HEADER = struct.Struct("<4sIII")

DEFAULT_PROMPT_TEMPLATE = "a photo of a {}"


class LabelKind(enum.Enum):
    ID = "ID"
    EXTENDED = "EXTENDED"


@dataclass(frozen=True)
class EmbeddingMatrix:
    """An immutable N x D float32 matrix of embedding coordinates.

    Invariants (checked at construction): N >= 1, D >= 1, all values finite.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise DataError(f"embedding matrix must be 2-D, got ndim={arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DataError(f"embedding matrix must be at least 1x1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DataError("embedding matrix contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n_rows(self) -> int:
        return int(self.data.shape[0])

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])

    def row(self, i: int) -> np.ndarray:
        return self.data[i]

    def row_norms(self) -> np.ndarray:
        return np.linalg.norm(self.data.astype(np.float64), axis=1)

    def is_normalized(self, tol: float = 1e-4) -> bool:
        return bool(np.all(np.abs(self.row_norms() - 1.0) <= tol))


@dataclass(frozen=True)
class LabelSet:
    """Ordered class names plus the prompt template they were encoded with."""

    names: tuple[str, ...]
    prompt_template: str = DEFAULT_PROMPT_TEMPLATE
    kind: LabelKind = LabelKind.ID

    def __post_init__(self):
        names = tuple(self.names)
        if not names:
            raise LabelError("label set must contain at least one name")
        seen = set()
        for name in names:
            if not name:
                raise LabelError("label names must be non-empty")
            if name in seen:
                raise LabelError(f"duplicate label name: {name!r}")
            seen.add(name)
        if self.prompt_template.count("{}") != 1:
            raise LabelError(
                f"prompt template must contain exactly one '{{}}' placeholder: "
                f"{self.prompt_template!r}"
            )
        object.__setattr__(self, "names", names)

    def __len__(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise LabelError(f"unknown label: {name!r}") from None

    def prompts(self) -> list[str]:
        return [self.prompt_template.format(name) for name in self.names]


def extend_labels(ids: LabelSet, extra: list[str] | tuple[str, ...]) -> LabelSet:
    """Build an EXTENDED label set: the ID names in order, then `extra`."""
    return LabelSet(
        names=tuple(ids.names) + tuple(extra),
        prompt_template=ids.prompt_template,
        kind=LabelKind.EXTENDED,
    )


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    """Load a SLEB file. Values come back bit-exact; nothing is normalized."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc

    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: file shorter than the 16-byte header")
    magic, version, n_rows, dim = _HEADER.unpack_from(raw, 0)
    if magic != SLEB_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {SLEB_MAGIC!r}")
    if version != SLEB_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if n_rows < 1 or dim < 1:
        raise FormatError(f"{path}: declared shape {n_rows}x{dim} is not positive")

    expected = n_rows * dim * 4
    payload = raw[_HEADER.size:]
    if len(payload) != expected:
        raise FormatError(
            f"{path}: declared {n_rows}x{dim} needs {expected} payload bytes, "
            f"found {len(payload)}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(n_rows, dim)
    if not np.all(np.isfinite(data)):
        raise DataError(f"{path}: payload contains non-finite values")
    return EmbeddingMatrix(data=data)


def save_embeddings(m: EmbeddingMatrix, path: str | Path) -> None:
    """Write `m` as a SLEB file; loading it back reproduces `m` bit-exactly.

    Invariants are re-checked before any bytes hit the disk.
    """
    if not np.all(np.isfinite(m.data)):
        raise DataError("refusing to save a matrix with non-finite values")
    path = Path(path)
    header = _HEADER.pack(SLEB_MAGIC, SLEB_VERSION, m.n_rows, m.dim)
    body = np.ascontiguousarray(m.data, dtype="<f4").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(body)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def l2_normalize(m: EmbeddingMatrix) -> EmbeddingMatrix:
    """Scale every row to unit Euclidean norm.

    Raises DegenerateRowError (with the offending row index) for rows whose
    norm is <= 1e-12: a zero embedding signals an upstream failure, not a
    value to be silently patched.
    """
    norms = np.linalg.norm(m.data.astype(np.float64), axis=1)
    bad = np.flatnonzero(norms <= 1e-12)
    if bad.size:
        raise DegenerateRowError(int(bad[0]))
    out = (m.data.astype(np.float64) / norms[:, None]).astype(np.float32)
    return EmbeddingMatrix(data=out)


def load_labels(
    path: str | Path,
    prompt_template: str = DEFAULT_PROMPT_TEMPLATE,
    kind: LabelKind = LabelKind.ID,
) -> LabelSet:
    """Read a newline-delimited UTF-8 label file, preserving order."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if "\r" in text:
        raise LabelError(f"{path}: label files use LF line endings, found CR")
    if text.endswith("\n"):
        text = text[:-1]
    names = text.split("\n") if text else []
    if any(name == "" for name in names):
        raise LabelError(f"{path}: blank line in label file")
    if not names:
        raise LabelError(f"{path}: label file is empty")
    return LabelSet(names=tuple(names), prompt_template=prompt_template, kind=kind)


def save_labels(s: LabelSet, path: str | Path) -> None:
    """Write one label per line with LF endings."""
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for name in s.names:
                fh.write(name)
                fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def validate_pairing(m: EmbeddingMatrix, s: LabelSet) -> None:
    """Check that matrix rows and label lines describe the same things."""
    if m.n_rows != len(s):
        raise PairingError(
            f"matrix has {m.n_rows} rows but label set has {len(s)} names"
        )
