"""Exception hierarchy for lego-qml.

Every error carries the process exit code the CLI uses when it escapes a
command.
"""


class LegoError(Exception):
    """Base class for all lego-qml errors."""

    exit_code: int = 1


class ConfigurationError(LegoError):
    """Invalid or missing configuration."""

    exit_code = 2

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class InvariantViolationError(LegoError):
    """A hard contract was broken (frozen block mutated, checkpoint tampered)."""

    exit_code = 3


class FrozenBlockError(InvariantViolationError):
    """Attempt to modify a frozen feature block."""


class DivergenceError(LegoError):
    """Training produced a non-finite loss."""

    exit_code = 4

    def __init__(self, epoch: int, grad_norm: float):
        self.epoch = epoch
        self.grad_norm = grad_norm
        super().__init__(f"loss diverged at epoch {epoch} (grad norm {grad_norm:.6g})")


class DataError(LegoError):
    """Dataset is empty, too small or inconsistent."""


class ShapeError(LegoError, ValueError):
    """Array length or shape does not match what the operation expects."""


class ArgumentError(LegoError, ValueError):
    """Argument outside its documented domain."""


class RangeError(ArgumentError):
    """Numeric values outside the admissible range."""


class QubitIndexError(LegoError, IndexError):
    """Gate references a qubit the state does not have."""


class FormatError(LegoError):
    """Malformed binary or text file."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})" if offset is not None else message)


class LookupFailure(LegoError, KeyError):
    """Sample id missing from an embedding table."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class UnsupportedModeError(LegoError):
    """Operation is not defined for the requested evaluation mode."""


class ScaleError(LegoError):
    """Problem size exceeds the desk-scale budget of an estimator."""


class SizeGuardError(LegoError):
    """Dense materialization would exceed its size guard."""
