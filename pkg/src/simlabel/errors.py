"""Exception hierarchy shared by all simlabel modules.

Every error raised by the library derives from :class:`SimlabelError`, so
callers (and the CLI) can distinguish data/format problems from genuine bugs
with a single except clause.
"""


class SimlabelError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(SimlabelError):
    """A file does not follow its declared on-disk format."""


class DataError(SimlabelError):
    """Payload values violate an invariant (non-finite, bad shape counts)."""


class IoError(SimlabelError):
    """An output path could not be written or an input path read."""


class DegenerateRowError(DataError):
    """A matrix row has (near-)zero norm and cannot be normalized."""

    def __init__(self, row: int):
        super().__init__(f"row {row} has zero norm")
        self.row = row


class LabelError(SimlabelError):
    """Label names are duplicated, empty, or unresolvable."""


class PairingError(SimlabelError):
    """An embedding matrix and a label set disagree on row count."""


class ShapeError(SimlabelError):
    """Vector/matrix dimensions do not match the operation's contract."""


class NormError(SimlabelError):
    """An input that must be unit-norm is not."""


class ParamError(SimlabelError):
    """A numeric parameter is outside its documented range."""


class MapError(SimlabelError):
    """A similar-class map violates its structural invariants."""
