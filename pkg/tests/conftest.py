# tests/conftest.py
import os
from pathlib import Path

import hypothesis
import numpy as np
import pytest

from src.config.settings import settings as base_settings
from src.models.power_system import PowerSystem
from src.solvers.base import BackendOptions
from src.solvers.highs_backend import HighsBackend

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("default", max_examples=25, deadline=None)
hypothesis.settings.register_profile(
    "debugger", max_examples=25, deadline=None, report_multiple_bugs=False, derandomize=True
)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))

np.seterr(all="warn")


@pytest.fixture
def backend():
    """HiGHS with a tight gap, so MILP objectives can be compared exactly."""
    return HighsBackend(BackendOptions(mip_gap=1e-6))


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def one_bus() -> PowerSystem:
    return PowerSystem.from_file(DATA_DIR / "one_bus.yaml")


@pytest.fixture(scope="session")
def three_bus() -> PowerSystem:
    return PowerSystem.from_file(DATA_DIR / "three_bus.yaml")


@pytest.fixture(scope="session")
def six_bus() -> PowerSystem:
    return PowerSystem.from_file(DATA_DIR / "six_bus.yaml")


@pytest.fixture
def run_settings(tmp_path):
    """Settings writing into a temporary directory, HiGHS only, few trajectories."""
    return base_settings.with_overrides(OUTPUT_DIR=str(tmp_path), BACKEND="highs", MIP_GAP=1e-4,
                                        N_TRAJECTORIES=4)
