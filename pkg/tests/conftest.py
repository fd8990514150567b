"""Shared pytest fixtures for the anti-piracy lab test suite.

## Running the suite

### Fast local run: unit and e2e tests
    pytest tests/ -q -m "not performance and not slow"

### Full suite, including runtime checks at the largest supported n
    pytest tests/ -q

Every test runs with metrics enabled and the default resource caps unless a
fixture overrides them; settings are re-read after each override.
"""
import os

# ------------------------------------------------------------------ #
# Environment defaults so the suite never depends on a local .env.   #
# ------------------------------------------------------------------ #
os.environ.setdefault("LAB_ENVIRONMENT", "test")
os.environ.setdefault("LAB_LOG_LEVEL", "WARNING")
os.environ.setdefault("LAB_DEFAULT_JOBS", "1")
os.environ.setdefault("LAB_METRICS_ENABLED", "true")

import numpy as np
import pytest
import structlog
from hypothesis import HealthCheck, settings as hypothesis_settings

from src.core.config import get_settings
from src.protocol.instances import Instance, make_instance

hypothesis_settings.register_profile(
    "default",
    max_examples=50,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
hypothesis_settings.register_profile("ci", max_examples=200, deadline=None)
hypothesis_settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))


# ---------------------------------------------------------------------------
# Custom pytest markers
# ---------------------------------------------------------------------------
def pytest_configure(config):
    config.addinivalue_line("markers", "slow: exact simulation at the largest supported n")
    config.addinivalue_line("markers", "performance: runtime / throughput test")
    config.addinivalue_line("markers", "e2e: end-to-end scenario test")


# ---------------------------------------------------------------------------
# Settings
# ---------------------------------------------------------------------------


@pytest.fixture(autouse=True)
def _fresh_settings():
    """Settings are lru-cached; clear around every test so env overrides apply."""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture(autouse=True)
def _reset_structlog():
    """configure_logging binds sys.stderr at call time; under capture that stream
    is closed after the test, so restore structlog defaults between tests."""
    yield
    structlog.reset_defaults()


@pytest.fixture
def lab_env(monkeypatch):
    """Set LAB_* variables for one test: lab_env(STATEVECTOR_CAP_QUBITS=6)."""

    def _apply(**values: object) -> None:
        for key, value in values.items():
            monkeypatch.setenv(f"LAB_{key}", str(value))
        get_settings.cache_clear()

    return _apply


# ---------------------------------------------------------------------------
# Randomness and instances
# ---------------------------------------------------------------------------


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def yes_instance() -> Instance:
    return make_instance(8, "YES", 7)


@pytest.fixture
def no_ab_instance() -> Instance:
    return make_instance(8, "NO_AB", 11)


@pytest.fixture
def no_ba_instance() -> Instance:
    return make_instance(8, "NO_BA", 13)


@pytest.fixture
def results_dir(tmp_path):
    out = tmp_path / "results"
    out.mkdir()
    return out
