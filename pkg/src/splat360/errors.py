"""Exception hierarchy shared across the package."""


class Splat360Error(Exception):
    """Base class for all errors raised by this package."""


# --- scene loading / raster IO ---

class MissingModelFile(Splat360Error):
    pass


class ParseError(Splat360Error):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class InconsistentModel(Splat360Error):
    pass


class UnsupportedCameraModel(Splat360Error):
    pass


class FormatError(Splat360Error):
    pass


class CorruptRaster(Splat360Error):
    pass


class InvalidStride(Splat360Error):
    pass


# --- camera geometry / view selection ---

class InvalidRotation(Splat360Error):
    pass


class InvalidQuaternion(Splat360Error):
    pass


class DuplicateView(Splat360Error):
    pass


class RankOutOfRange(Splat360Error):
    pass


class NoRegistrableSubset(Splat360Error):
    pass


class InsufficientControlPoints(Splat360Error):
    pass


class IntrinsicsMismatch(Splat360Error):
    pass


# --- rendering ---

class CulledGaussian(Splat360Error):
    """Signal that a Gaussian lies behind the near plane; skipped, not fatal."""


class ShapeError(Splat360Error):
    pass


class InvalidThreshold(Splat360Error):
    pass


# --- optimization ---

class InitializationError(Splat360Error):
    pass


class EmptyCloud(Splat360Error):
    pass


# --- fusion loop / enhancer client ---

class BudgetTooSmall(Splat360Error):
    pass


class InvalidEta(Splat360Error):
    pass


class PoolExhausted(Splat360Error):
    pass


class EnhancerUnavailable(Splat360Error):
    pass


class ProtocolViolation(Splat360Error):
    pass


class EmptyInstructionPool(Splat360Error):
    pass
