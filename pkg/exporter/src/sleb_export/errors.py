class ExportError(Exception):
    """Base class for exporter failures (maps to exit code 2)."""


class ModelLoadError(ExportError):
    """The requested model id could not be loaded."""


class LabelError(ExportError):
    """Label input violates a constraint (duplicates, blanks)."""


class EmptyInputError(ExportError):
    """No labels or no images to export (maps to exit code 1)."""
