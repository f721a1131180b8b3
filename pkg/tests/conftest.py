import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from sklab.field_core import AnnulusGrid

settings.register_profile("sklab", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("sklab")

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def oracles():
    return json.loads((DATA / "oracles.json").read_text())


@pytest.fixture
def grid():
    return AnnulusGrid(0.05, 0.5, 64, 64)


def oracle_z(row, center=0j):
    return center + row["r"] * np.exp(1j * row["theta"])


def interior(a, rows=1):
    return np.asarray(a)[rows:-rows]
