import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from helpers import SCHEMAS  # noqa: E402

from medtab.schema import load_schema  # noqa: E402


@pytest.fixture(scope="session")
def heart_schema():
    return load_schema(SCHEMAS / "heart.schema.json")


@pytest.fixture(scope="session")
def hepatitis_schema():
    return load_schema(SCHEMAS / "hepatitis.schema.json")
