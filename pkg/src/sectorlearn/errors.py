"""Exception types raised across the package."""


class SectorLearnError(Exception):
    """Base class for all package errors."""


class UnachievableBeamwidth(SectorLearnError, ValueError):
    pass


class ParseError(SectorLearnError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LinkIndexError(SectorLearnError, IndexError):
    """A sector or UE id lies outside the declared range."""


class EmptyDataset(SectorLearnError, ValueError):
    pass


class DegenerateGeometry(SectorLearnError, ValueError):
    pass


class DimensionMismatch(SectorLearnError, ValueError):
    pass


class MissingLink(SectorLearnError, KeyError):
    pass


class EmptyRegion(SectorLearnError, ValueError):
    pass


class BudgetExceeded(SectorLearnError, RuntimeError):
    pass


class ShapeMismatch(SectorLearnError, ValueError):
    pass


class ArchitectureMismatch(SectorLearnError, ValueError):
    pass


class InsufficientSamples(SectorLearnError, ValueError):
    pass


class LengthMismatch(SectorLearnError, ValueError):
    pass


class EmptyWindow(SectorLearnError, ValueError):
    pass


class ConfigError(SectorLearnError, ValueError):
    pass
