"""Shared fixtures and the per-criterion acceptance summary."""

import numpy as np
import pytest

from dsvm.experiment import build_setup
from dsvm.config import ExperimentConfig

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def reference_setup():
    """The default experiment: 5 agents, 60 points, alpha 10, 0.05 s switching."""
    return build_setup(ExperimentConfig())
