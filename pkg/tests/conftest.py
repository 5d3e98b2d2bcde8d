import sys
from pathlib import Path

import pytest

# the oracle module lives next to the tests, not in the package
sys.path.insert(0, str(Path(__file__).parent))

REPO_ROOT = Path(__file__).parent.parent


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return REPO_ROOT / "docs" / "fixtures"


@pytest.fixture(scope="session")
def scenarios_dir() -> Path:
    return REPO_ROOT / "scenarios"
