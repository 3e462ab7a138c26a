"""Exception hierarchy shared by every ncodlab module."""


class NcodLabError(Exception):
    """Base class for all library errors."""


class ZeroVector(NcodLabError, ValueError):
    pass


class LengthMismatch(NcodLabError, ValueError):
    pass


class NegativeStd(NcodLabError, ValueError):
    pass


class BadDims(NcodLabError, ValueError):
    pass


class DimMismatch(NcodLabError, ValueError):
    pass


class StaleCache(NcodLabError, ValueError):
    pass


class ShapeMismatch(NcodLabError, ValueError):
    pass


class SingleClass(NcodLabError, ValueError):
    pass


class BadPairMap(NcodLabError, ValueError):
    pass


class BadFraction(NcodLabError, ValueError):
    pass


class EmptyClass(NcodLabError, ValueError):
    pass


class DegenerateCentroid(NcodLabError, ValueError):
    pass


class IndexOutOfRange(NcodLabError, IndexError):
    pass


class EmptyBatch(NcodLabError, ValueError):
    pass


class PlacementFailure(NcodLabError, RuntimeError):
    pass


class ParseError(NcodLabError, ValueError):
    """Malformed input file; ``line`` is 1-based (0 when unknown)."""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class DimInconsistency(NcodLabError, ValueError):
    pass


class ClassTooSmall(NcodLabError, ValueError):
    pass


class ConfigInvalid(NcodLabError, ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class EmptyGroup(NcodLabError, ValueError):
    pass


class OneClassOnly(NcodLabError, ValueError):
    pass
