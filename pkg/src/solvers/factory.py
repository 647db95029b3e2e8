# src/solvers/factory.py
from typing import Dict, Optional

from src.solvers.base import BackendOptions, SolverBackend
from src.solvers.gurobi_backend import GurobiBackend, _import_gurobi, gurobi_available
from src.solvers.highs_backend import HighsBackend
from src.utils.exceptions import ConfigError
from src.utils.logging_config import logger


def available_backends() -> Dict[str, bool]:
    return {"highs": True, "gurobi": gurobi_available()}


def get_backend(name: str = "auto", options: Optional[BackendOptions] = None) -> SolverBackend:
    """
    Resolves a backend by name. "auto" prefers Gurobi (lazy constraints for
    one-tree solving) when a licensed installation is found, HiGHS otherwise.
    """
    options = options or BackendOptions()
    name = name.lower()
    if name == "auto":
        name = "gurobi" if gurobi_available() else "highs"
        logger.info(f"Backend 'auto' resolved to '{name}'")
    if name == "highs":
        return HighsBackend(options)
    if name == "gurobi":
        _import_gurobi()  # raises BackendMissingError
        return GurobiBackend(options)
    raise ConfigError(f"Unknown solver backend '{name}' (expected auto, highs or gurobi)")


def backend_from_settings(settings) -> SolverBackend:
    return get_backend(settings.BACKEND, BackendOptions.from_settings(settings))
