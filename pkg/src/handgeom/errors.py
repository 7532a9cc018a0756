"""Exception types raised across the package."""


class HandGeomError(ValueError):
    """Base class for all validation and geometry errors."""


class NonPositiveLength(HandGeomError):
    pass


class NonPositiveSigma(HandGeomError):
    pass


class DimensionMismatch(HandGeomError):
    pass


class EmptyStack(HandGeomError):
    pass


class DegenerateBox(HandGeomError):
    pass


class ZeroLengthFinger(HandGeomError):
    pass


class ZeroLengthDigit(HandGeomError):
    pass


class CollinearJoints(HandGeomError):
    pass


class EmptyCorpus(HandGeomError):
    pass


class DivergedLoss(RuntimeError):
    """Raised by the refiner when the objective keeps increasing."""


class CountMismatch(HandGeomError):
    pass


class BadThresholds(HandGeomError):
    pass


class ParseError(HandGeomError):
    def __init__(self, message, line=None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class SchemaViolation(ParseError):
    pass


class ConfigError(HandGeomError):
    pass
