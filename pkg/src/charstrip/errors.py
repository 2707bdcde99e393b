"""Exception types shared across the package."""


class CharstripError(Exception):
    """Base class for all package errors."""


# --- expression language ---

class ExpressionSyntaxError(CharstripError):
    """Malformed expression text. Carries the byte offset of the failure."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownIdentifierError(CharstripError):
    def __init__(self, name, offset):
        super().__init__(f"unknown identifier {name!r} (at offset {offset})")
        self.name = name
        self.offset = offset


class UnboundVariableError(CharstripError):
    pass


class DivisionByZeroError(CharstripError):
    pass


class DomainError(CharstripError):
    """log/sqrt (or similar) evaluated outside its domain."""


# --- grids and system validation ---

class ValidationFailedError(CharstripError):
    """A sampled hyperbolicity or sign check failed. Carries the offending
    sample point and quantity."""

    def __init__(self, message, where=None, quantity=None):
        super().__init__(message)
        self.where = where
        self.quantity = quantity


class SingularDiagonalizerError(CharstripError):
    """|det Q| fell below the configured floor at some grid node."""


class StateOutOfBoxError(CharstripError):
    """A state field left the box where the coefficients are trusted."""


class StepFailureError(CharstripError):
    """A characteristic speed crossed zero while tracing."""


class LookbackOutOfWindowError(CharstripError):
    """A delayed boundary lookup fell outside a window topology."""


class WindowTooShortError(CharstripError):
    pass


class MixedSignDampingError(CharstripError):
    """Periodic-coupling norm estimates need every diagonal damping term
    bounded away from zero; some row touches zero."""


class AssemblyVersionError(CharstripError):
    """An operator assembly was applied to data from a different snapshot."""


# --- solvers ---

class NonContractionError(CharstripError):
    """The fixed-point residual stopped decreasing for too many iterations."""


class ToleranceNotReachedError(CharstripError):
    pass


class OuterDivergenceError(CharstripError):
    """The outer quasilinear iteration increments grew repeatedly."""


class ConfigError(CharstripError):
    def __init__(self, message, path=None, field=None):
        loc = "" if field is None else f" [{field}]"
        src = "" if path is None else f" in {path}"
        super().__init__(f"{message}{loc}{src}")
        self.path = path
        self.field = field
