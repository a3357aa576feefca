import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))


def pytest_configure(config) -> None:
    config.addinivalue_line("markers", "slow: long numerical checks (N=8 superoperator, N=10 perturbation, large ensembles)")


def pytest_collection_modifyitems(config, items) -> None:
    # slow checks run only when a marker expression is given, e.g. `-m slow`
    if config.getoption("-m"):
        return
    skip = pytest.mark.skip(reason="slow; select with -m slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)
