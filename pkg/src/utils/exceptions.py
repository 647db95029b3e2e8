# src/utils/exceptions.py
from typing import Optional, Sequence


class RobustUcError(Exception):
    """Base class for every error raised by the toolkit. `exit_code` is what the CLI returns."""

    exit_code: int = 1


class ConfigError(RobustUcError):
    exit_code = 2


class DataParseError(RobustUcError):
    exit_code = 2


class EstimationError(RobustUcError):
    exit_code = 2


class UncertaintySetError(RobustUcError):
    """Invalid set parameters (e.g. an empty polyhedron) or an unsupported norm for the LP oracles."""

    exit_code = 2


class InfeasibleError(RobustUcError):
    exit_code = 3

    def __init__(self, message: str, stage: Optional[str] = None, binding_rows: Sequence[str] = ()):
        super().__init__(message)
        self.stage = stage
        self.binding_rows = list(binding_rows)


class DispatchInfeasibleError(InfeasibleError):
    pass


class BackendError(RobustUcError):
    """The solver engine itself failed (numerical trouble, license, capability mismatch)."""

    exit_code = 3


class BackendMissingError(RobustUcError):
    exit_code = 4


class LimitReachedError(RobustUcError):
    exit_code = 5
