class ToolkitError(Exception):
    """Base class for every error raised by the toolkit."""


class ValidationError(ToolkitError, ValueError):
    def __init__(self, message, frame=None):
        if frame is not None:
            message = f"frame {frame}: {message}"
        super().__init__(message)
        self.frame = frame


class ParseError(ToolkitError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(ValidationError):
    pass


class InvalidStride(ValidationError):
    pass


class EmptyGroup(ValidationError):
    pass


class ChainLengthMismatch(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    def __init__(self, message, field=None):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class NonPositiveDepth(ToolkitError, ValueError):
    pass


class ZeroDepth(ToolkitError, ValueError):
    pass


class PointBehindCamera(ToolkitError, ValueError):
    pass


class TooFewCorrespondences(ToolkitError):
    pass


class DegenerateGeometry(ToolkitError):
    pass


class SingularNormalEquations(ToolkitError):
    pass


class MatcherFailure(ToolkitError):
    def __init__(self, message, steps=0):
        super().__init__(message)
        self.steps = steps


class StepBudgetExhausted(ToolkitError):
    def __init__(self, outcome):
        super().__init__(
            f"servo loop did not converge within {outcome.steps} control steps"
        )
        self.outcome = outcome


class NoVisibleLandmarks(ToolkitError):
    pass


class DegenerateField(ToolkitError):
    pass
