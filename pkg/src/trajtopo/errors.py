"""Exception types shared across the package."""


class TopoError(Exception):
    """Base class for all trajtopo errors."""


# --- bundle I/O ---

class MissingFile(TopoError):
    pass


class MetadataParse(TopoError):
    pass


class ShapeMismatch(TopoError):
    pass


class NonFiniteEntry(TopoError):
    pass


class ValueOutOfRange(TopoError):
    pass


class ChecksumMismatch(TopoError):
    pass


class IoError(TopoError):
    pass


# --- distance matrices ---

class DimensionOverflow(TopoError):
    """Input too large for the configured memory budget and no projection given."""


class InvalidOrder(TopoError):
    pass


class EmptySelection(TopoError):
    pass


# --- lifetimes / dimension ---

class NegativeAlpha(TopoError):
    pass


class TooLarge(TopoError):
    pass


# --- magnitude ---

class NonPositiveScale(TopoError):
    pass


class SolverDiverged(TopoError):
    pass


# --- correlation analysis ---

class LengthMismatch(TopoError):
    pass


class DegenerateInput(TopoError):
    """Raised when a rank statistic is undefined (constant input)."""


class NoValidSlice(TopoError):
    pass


class MissingRiskHistory(TopoError):
    pass


# --- synthetic data ---

class InvalidSpec(TopoError):
    pass
