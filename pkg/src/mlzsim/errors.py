"""Exception types shared across the package."""


class MlzError(Exception):
    """Base class for all package-specific errors."""


class InvalidParameter(MlzError):
    """A builder or closed-form routine received out-of-domain parameters."""


class DegenerateSlopes(InvalidParameter):
    """Two level slopes coincide (within the relative tolerance)."""


class DuplicateCoupling(InvalidParameter):
    """The same unordered state pair was given more than one coupling."""


class DiagonalCoupling(InvalidParameter):
    """A coupling was requested between a state and itself."""


class NotBipartite(MlzError):
    """The connectivity graph contains an odd cycle.

    The offending cycle (a list of 1-based state indices) is stored in
    ``cycle`` when available.
    """

    def __init__(self, message, cycle=None):
        super().__init__(message)
        self.cycle = cycle


class UnsupportedSignPattern(InvalidParameter):
    """A coupling-sign pattern without a known closed-form solution."""


class ToleranceExceeded(MlzError):
    """A propagation diagnostic exceeded its hard tolerance."""


class Overflow(MlzError):
    """Evolution-matrix entries exceeded the overflow guard."""


class DimensionMismatch(MlzError):
    """Matrix/bipartition/model sizes are inconsistent."""


class AnsatzViolated(MlzError):
    """Gauge stripping left a residual: the pure-gauge phase ansatz fails.

    The residual magnitude is stored in ``residual``.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DisconnectedGauge(MlzError):
    """Phases cannot be propagated consistently across graph components."""


class DegenerateRealPart(MlzError):
    """A cyclic product has (numerically) vanishing real part."""


class DiagonalConditionViolated(MlzError):
    """A diagonal identity of the triangular factorization failed.

    ``shell`` is the 1-based state index whose condition failed and
    ``residual`` the violation magnitude.
    """

    def __init__(self, message, shell=None, residual=None):
        super().__init__(message)
        self.shell = shell
        self.residual = residual


class Singular(MlzError):
    """Non-finite entries encountered during factorization."""


class ParseError(MlzError):
    """Configuration text is not valid JSON."""


class SchemaError(MlzError):
    """Configuration JSON violates the run-config schema.

    ``violations`` is a list of ``(json_pointer, message)`` pairs covering
    every detected problem.
    """

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = violations or []
