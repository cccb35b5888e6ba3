import os
import sys

import hypothesis
import numpy as np
import pytest

# Make tests.utils and the src layout importable without an install
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
for path in (project_root, os.path.join(project_root, "src")):
    if path not in sys.path:
        sys.path.insert(0, path)

hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


def pytest_addoption(parser):
    """Add custom command line options for pytest."""
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="Run the slow acceptance suites over full-size campaigns",
    )


def pytest_collection_modifyitems(config, items):
    """Skip tests marked slow unless --run-slow is given."""
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="Need --run-slow flag to run acceptance suites")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)

    if config.option.verbose >= 1:
        print(f"\nRunning on {sys.platform}")


@pytest.fixture
def rng():
    """Seeded generator; each test gets a fresh, identical stream."""
    return np.random.default_rng(12345)


@pytest.fixture
def isolated_dir(tmp_path, monkeypatch):
    """Run in an empty directory so no project config or logs leak in."""
    monkeypatch.chdir(tmp_path)
    for key in list(os.environ):
        if key.startswith("SEMROBUST_"):
            monkeypatch.delenv(key)
    return tmp_path
