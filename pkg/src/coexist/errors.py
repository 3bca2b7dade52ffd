"""Exception types raised across the package."""


class CoexistError(Exception):
    """Base class for all package errors."""


class InvalidSpec(CoexistError, ValueError):
    pass


class BoundsViolation(CoexistError):
    """A sampled coefficient value falls outside its declared [inf, sup]."""

    def __init__(self, t, x, value, inf, sup):
        self.t = t
        self.x = x
        self.value = value
        self.inf = inf
        self.sup = sup
        super().__init__(
            f"c(t={t:.6g}, x={x:.6g}) = {value:.17g} outside declared [{inf!r}, {sup!r}]"
        )


class HypothesisNotMet(CoexistError):
    pass


class NotConverged(CoexistError):
    """Iteration did not converge; the partial trace is attached."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class NonUniqueSystem(CoexistError):
    def __init__(self, message, coefficients=None):
        super().__init__(message)
        self.coefficients = coefficients


class NotConstantCoefficients(CoexistError):
    pass


class ChemotaxisNotZero(CoexistError):
    pass


class StepUnstable(CoexistError):
    pass


class PullbackNotConverged(CoexistError):
    def __init__(self, message, deviation=None):
        super().__init__(message)
        self.deviation = deviation


class NonPositiveComponent(CoexistError, ValueError):
    pass


class SingularSystem(CoexistError):
    pass


class CflViolated(CoexistError):
    pass


class GridMismatch(CoexistError, ValueError):
    pass


class ConfigError(CoexistError):
    """Raised by the config parser; ``problems`` lists every violation found."""

    def __init__(self, message, problems=None):
        self.problems = list(problems or [])
        if self.problems:
            message = message + ": " + "; ".join(self.problems)
        super().__init__(message)


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass
