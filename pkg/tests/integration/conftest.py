# Copyright 2026 The elkc Authors.
# See LICENSE file for licensing details.

"""Fixtures for elkc integration tests."""

import logging
from pathlib import Path

import pytest

logger = logging.getLogger(__name__)


@pytest.fixture(scope="module", name="sweep_cases")
def sweep_cases_fixture(pytestconfig: pytest.Config) -> int:
    """The number of randomized cases per round trip sweep."""
    cases = pytestconfig.getoption("--sweep-cases")
    assert cases > 0, "Please specify a positive --sweep-cases"
    return cases


@pytest.fixture(scope="module", name="convergence_seeds")
def convergence_seeds_fixture(pytestconfig: pytest.Config) -> list[int]:
    """The seeds of the convergence comparison."""
    count = pytestconfig.getoption("--convergence-seeds")
    assert count > 0, "Please specify a positive --convergence-seeds"
    return list(range(count))


@pytest.fixture(scope="function", name="log_dir")
def log_dir_fixture(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """A temporary log directory for console script runs."""
    log_dir = tmp_path / "log"
    monkeypatch.setenv("ELKC_LOG_DIR", str(log_dir))
    monkeypatch.delenv("ELKC_SEED", raising=False)
    return log_dir
