import time
from pathlib import Path

import pytest

SESSION_T0 = time.perf_counter()

# one "criterion NN PASS/FAIL" line per acceptance criterion, echoed in the
# terminal summary so they are visible without -s
ACCEPTANCE_LINES: list[str] = []


def pytest_collection_modifyitems(config, items):
    # acceptance runs last: the per-module suites gate it, and its wall-clock
    # check then covers nearly the whole session
    items.sort(key=lambda item: item.module.__name__ == "test_acceptance")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def bundled_run(tmp_path_factory, data_dir):
    """One pipeline run of the bundled synthetic dataset, shared read-only."""
    from flowmem.pipeline import load_config, run_pipeline

    out = tmp_path_factory.mktemp("bundled_run")
    config = load_config(data_dir / "run_config.json", out_dir=str(out))
    report = run_pipeline(config)
    return config, report, out
