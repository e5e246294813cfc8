from pathlib import Path

import pytest

from parastab.scenarios import load_suite, run_suite

REPO = Path(__file__).resolve().parent.parent
CONFIGS = REPO / "configs"
GOLDEN = Path(__file__).resolve().parent / "golden"


@pytest.fixture(scope="session")
def fixture_config() -> Path:
    return CONFIGS / "fixture_suite.toml"


@pytest.fixture(scope="session")
def extra_config() -> Path:
    return CONFIGS / "fixture_extra.toml"


@pytest.fixture(scope="session")
def fixture_suite_run(tmp_path_factory, fixture_config):
    """One full fixture-suite run shared by the golden and acceptance tests."""
    out = tmp_path_factory.mktemp("fixture_suite")
    suite_id, scenarios = load_suite(fixture_config)
    result = run_suite(scenarios, out_dir=out, suite_id=suite_id, seed=42, threads=1)
    return result, out
