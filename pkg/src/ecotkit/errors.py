"""Exception types shared across the toolkit."""


class EcotError(Exception):
    """Base class for all toolkit errors."""


class SchemaViolation(EcotError):
    """A dataset record breaks the trajectory schema or a type invariant."""

    def __init__(self, line: int, field: str, message: str = ""):
        self.line = line
        self.field = field
        detail = f" ({message})" if message else ""
        super().__init__(f"line {line}, field '{field}'{detail}")


class IoFailure(EcotError):
    """Reading or writing a dataset file failed."""


class NonFiniteState(EcotError):
    """A robot state contains NaN or infinite components."""


class UnparsableLabel(EcotError):
    """A string is not a canonical movement-primitive label."""


class DegenerateDepth(EcotError):
    """Homogeneous depth is (numerically) zero; the point cannot be projected."""


class MinimalSampleUnavailable(EcotError):
    """Fewer correspondences than the minimal sample needed to fit a camera."""


class NoConsensus(EcotError):
    """RANSAC found no hypothesis with enough inliers."""


class BackendUnavailable(EcotError):
    """An annotator backend could not be reached after retries."""


class BackendRefusal(EcotError):
    """An annotator backend answered but refused the request."""


class MalformedPlan(EcotError):
    """A planner response failed validation after retries."""


class LengthMismatch(EcotError):
    """Per-step inputs do not agree with the trajectory length."""


class ParseError(EcotError):
    """A serialized reasoning chain could not be parsed."""

    def __init__(self, position: int, expected: str):
        self.position = position
        self.expected = expected
        super().__init__(f"at position {position}: expected {expected}")


class InvalidEdit(EcotError):
    """A correction produced a chain that fails validation."""


class InvalidConfig(EcotError):
    """A simulator or pipeline configuration is out of range."""


class InfeasibleTargets(EcotError):
    """Calibration targets lie outside what any cost model can achieve."""

    def __init__(self, message: str, closest=None):
        self.closest = closest
        super().__init__(message)


class ConfigError(EcotError):
    """Pipeline configuration file or flags are invalid."""
