"""Exception hierarchy shared across the package."""


class IsosimError(Exception):
    """Base class for all library errors."""


class DomainError(IsosimError, ValueError):
    """An argument lies outside the domain of a formula."""


class NetlistError(IsosimError, ValueError):
    """Malformed circuit description."""


class UnknownNode(NetlistError):
    def __init__(self, node, element=None):
        self.node = node
        self.element = element
        where = f" (element {element!r})" if element else ""
        super().__init__(f"unknown node {node!r}{where}")


class DisconnectedGraph(NetlistError):
    pass


class NonPositiveValue(NetlistError):
    def __init__(self, element, field, value):
        self.element = element
        self.field = field
        self.value = value
        super().__init__(f"element {element!r}: {field} must be positive, got {value!r}")


class PortCountError(NetlistError):
    pass


class LineSingularity(IsosimError, ArithmeticError):
    """Transmission line electrical length is a multiple of pi; its Y stamp is undefined."""

    def __init__(self, element, theta):
        self.element = element
        self.theta = theta
        super().__init__(f"line {element!r} is singular at theta={theta!r} rad")


class SingularMatrix(IsosimError, ArithmeticError):
    pass


class NoConvergence(IsosimError, RuntimeError):
    def __init__(self, message, last_residual=float("nan"), power_reached=None):
        self.last_residual = last_residual
        self.power_reached = power_reached
        super().__init__(
            f"{message} (last residual {last_residual:.3e}, power reached {power_reached})"
        )


class EmptySweep(IsosimError, ValueError):
    pass


class MinimumOnBoundary(IsosimError, ValueError):
    pass


class SingularCapacitanceMatrix(IsosimError, ValueError):
    pass


class NotSettled(IsosimError, RuntimeError):
    def __init__(self, steadiness):
        self.steadiness = steadiness
        super().__init__(f"transient not settled: steadiness metric {steadiness:.3e}")


class NonConvergentStep(IsosimError, RuntimeError):
    pass


class StepSizeIncompatibleWithDelay(IsosimError, ValueError):
    pass


class SchemaMismatch(IsosimError, ValueError):
    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__(f"CSV is missing columns: {', '.join(self.missing)}")
