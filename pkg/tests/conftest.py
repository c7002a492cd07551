import json
from dataclasses import replace

import pytest

from ucreduce import grid, harness


@pytest.fixture(scope="session")
def six_bus():
    return grid.load_bundled("six_bus.json")


@pytest.fixture(scope="session")
def fixture_config():
    return harness.load_config(harness.bundled_config_path())


def _run(config, out_dir):
    return harness.run_pipeline(replace(config, out_dir=str(out_dir)))


@pytest.fixture(scope="session")
def pipeline_run(fixture_config, tmp_path_factory):
    """The shipped 6-bus experiment, run once per test session."""
    return _run(fixture_config, tmp_path_factory.mktemp("pipeline_a"))


@pytest.fixture(scope="session")
def pipeline_rerun(fixture_config, tmp_path_factory):
    return _run(fixture_config, tmp_path_factory.mktemp("pipeline_b"))


def read_json(path):
    return json.loads(open(path).read())


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
