from __future__ import annotations

import pytest
from hypothesis import settings

from closuresim.config import ExperimentConfig

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def small_config() -> ExperimentConfig:
    # busy enough to fork a few times in 300 rounds
    return ExperimentConfig(n=6, rounds=300, q=0.05, k=3, tx_rate=0.5)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
