"""Exception types shared across the package."""


class JointCrfError(Exception):
    """Base class for every error this package raises deliberately."""


class InventoryError(JointCrfError):
    """A role inventory is malformed (duplicate names, missing Verb/O entry)."""


class UnknownRoleError(JointCrfError):
    """A role name does not resolve against the loaded inventories."""


class AlignmentError(JointCrfError):
    """Parallel sequences (tokens, tags, gold labels) have mismatched lengths."""


class DataError(JointCrfError):
    """An instance is unusable for the requested operation or regime."""


class InfeasibleMaskError(DataError):
    """A constraint mask leaves no admissible label sequence."""


class CorpusParseError(JointCrfError):
    """A corpus file is malformed; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
