from __future__ import annotations

import os

import pytest

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


@pytest.fixture(scope="session")
def tiny4_path() -> str:
    return os.path.join(DATA_DIR, "tiny4.json")
