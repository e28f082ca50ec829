from typing import Optional, Sequence

from src.const import EXIT_RUNTIME, EXIT_USAGE


class RSENetError(Exception):
    """Base class for every error raised by this package. `exit_code` is what the CLI exits with."""

    exit_code: int = EXIT_RUNTIME


class UsageError(RSENetError, ValueError):
    exit_code = EXIT_USAGE


class ExamFormatError(RSENetError, ValueError):
    exit_code = EXIT_USAGE

    def __init__(self, path: object, reason: str) -> None:
        self.path = path
        super().__init__(f"{path}: {reason}")


class ConsistencyError(RSENetError, ValueError):
    exit_code = EXIT_USAGE


class ShapeError(RSENetError, ValueError):
    exit_code = EXIT_USAGE


class ConfigurationError(RSENetError, ValueError):
    exit_code = EXIT_USAGE


class InsufficientDataError(RSENetError, ValueError):
    exit_code = EXIT_USAGE


class BoundsError(RSENetError, IndexError):
    exit_code = EXIT_USAGE


class PreconditionError(RSENetError, ValueError):
    exit_code = EXIT_USAGE


class DegenerateVarianceError(RSENetError, ValueError):
    exit_code = EXIT_USAGE


class DegeneratePairError(RSENetError, ValueError):
    exit_code = EXIT_USAGE

    def __init__(self, indices: Sequence[int]) -> None:
        self.indices = list(indices)
        super().__init__(f"Pairs with zero mean area at indices {self.indices}")


class NumericalDivergenceError(RSENetError, ArithmeticError):
    exit_code = EXIT_RUNTIME

    def __init__(self, message: str, epoch: Optional[int] = None, step: Optional[int] = None) -> None:
        self.epoch = epoch
        self.step = step
        super().__init__(f"{message} (epoch={epoch}, step={step})")


class DependencyError(RSENetError):
    exit_code = EXIT_RUNTIME

    def __init__(self, member: str, reason: str) -> None:
        self.member = member
        super().__init__(f"Ensemble member {member} failed to load: {reason}")
