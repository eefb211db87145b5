import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from alfalfa_yield.synth import SynthConfig, generate  # noqa: E402

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def synth_corpus(tmp_path_factory):
    """Two identical synthetic states, 60 noiseless samples each."""
    root = tmp_path_factory.mktemp("synth")
    return generate(SynthConfig(seed=11, n_states=2, samples_per_state=60), root)


@pytest.fixture
def verdict():
    """Record one PASS/FAIL/SKIP line for an acceptance criterion."""

    def record(number: int, status: str, detail: str) -> None:
        line = f"criterion {number:2d}: {status:4s} {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
