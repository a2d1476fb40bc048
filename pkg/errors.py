"""Exception hierarchy.

Every failure the toolkit reports is a ``ToolkitError``.  Each class carries
the process exit code the command-line front end maps it to:

* 2 - usage (bad flags, invalid job)
* 3 - I/O (missing or unreadable files)
* 4 - computation (domain, convergence, conditioning)
"""

from typing import Optional, Tuple

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_COMPUTATION = 4


class ToolkitError(Exception):
    """Base class of all toolkit errors."""

    exit_code: int = EXIT_COMPUTATION


class DomainError(ToolkitError, ValueError):
    """An argument lies outside the domain of the operation."""


class OutOfRangeError(DomainError):
    """Query outside a tabulated grid (no extrapolation)."""

    def __init__(self, omega: float, lower: float, upper: float):
        self.omega = omega
        self.lower = lower
        self.upper = upper
        super().__init__(f"omega={omega:g} rad/s outside tabulated range [{lower:g}, {upper:g}]")


class MaterialFormatError(ToolkitError, ValueError):
    """Malformed material file."""

    exit_code = EXIT_IO

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class PassivityError(ToolkitError, ValueError):
    """Negative absorption (Im eps < 0) in a material, or a non-passive scattering mode."""

    def __init__(self, message: str, omega: Optional[float] = None, line: Optional[int] = None):
        self.omega = omega
        self.line = line
        # file content problems are reported like other material-file errors
        self.exit_code = EXIT_IO if line is not None else EXIT_COMPUTATION
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class MonotonicityError(MaterialFormatError):
    """Tabulated frequencies are not strictly increasing."""


class SpecialFunctionAccuracyError(ToolkitError, ArithmeticError):
    """Internal convergence check of a special-function evaluation failed."""


class IntegrationError(ToolkitError, ArithmeticError):
    """Adaptive quadrature hit its subinterval cap before reaching the tolerance."""

    def __init__(self, message: str, worst_interval: Tuple[float, float, float], partial_value: float):
        self.worst_interval = worst_interval
        self.partial_value = partial_value
        a, b, err = worst_interval
        super().__init__(f"{message} (worst subinterval [{a:g}, {b:g}] with error {err:.3g})")


class TruncationError(ToolkitError, ArithmeticError):
    """Multipole sum did not converge below the order cap."""

    def __init__(self, message: str, orders: int, last_change: float):
        self.orders = orders
        self.last_change = last_change
        super().__init__(f"{message} (orders={orders}, last relative change={last_change:.3g})")


class ConditioningError(ToolkitError, ArithmeticError):
    """The multiple-scattering system is too ill-conditioned to solve reliably."""

    def __init__(self, message: str, condition: float):
        self.condition = condition
        super().__init__(f"{message} (condition estimate {condition:.3g})")


class ConversionError(ToolkitError, ArithmeticError):
    """Planar/spherical conversion failed its round-trip identity check."""


class UsageError(ToolkitError, ValueError):
    """Invalid command line or job file."""

    exit_code = EXIT_USAGE


class InputOutputError(ToolkitError, OSError):
    """A referenced file is missing or unreadable."""

    exit_code = EXIT_IO


class ComputationError(ToolkitError):
    """A grid point of a sweep failed; wraps the original error."""

    def __init__(self, point: dict, cause: Exception):
        self.point = point
        self.cause = cause
        super().__init__(f"computation failed at grid point {point}: {cause}")
