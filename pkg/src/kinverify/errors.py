"""Exception types shared across the toolkit.

Each class maps to one CLI exit code (see ``cli.EXIT_CODES``) so scripted
callers can tell input mistakes from data-format problems from numerical
failures.
"""


class KinverifyError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(KinverifyError, ValueError):
    """An argument violates a documented precondition."""


class FileAccessError(KinverifyError, OSError):
    """A path does not exist or cannot be read or written."""


class UnsupportedFormatError(KinverifyError):
    """A file is not in one of the accepted formats, or is corrupt."""


class ProtocolError(KinverifyError):
    """The verification protocol cannot be satisfied: degenerate folds,
    single-class score sets, or impossible negative pairing."""


class NumericalError(KinverifyError):
    """A linear-algebra step failed despite regularization."""


class StageError(KinverifyError):
    """Pipeline stage failure; carries the stage name for diagnostics."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
