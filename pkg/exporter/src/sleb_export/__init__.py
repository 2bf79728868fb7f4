"""SLEB embedding exporter: turns VLM checkpoints plus labels or image
folders into the binary embedding files the scoring toolkit consumes."""

from .errors import EmptyInputError, ExportError, LabelError, ModelLoadError
from .export import ExportJob, export_image_embeddings, export_text_embeddings

__version__ = "0.1.0"
