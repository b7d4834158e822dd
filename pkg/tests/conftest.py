import os

# Settings are read at import time; keep tests off the on-disk registry
os.environ.setdefault("LAB_RECORD_RUNS", "false")
os.environ.setdefault("DATABASE_URL", "sqlite://")

import numpy as np
import pytest
from sqlmodel import Session

from app.database.connection import create_db_and_tables, make_engine
from app.service.weights import parse_weight


@pytest.fixture
def memory_engine():
    engine = make_engine("sqlite://", echo=False)
    create_db_and_tables(engine)
    return engine


@pytest.fixture
def session(memory_engine):
    with Session(memory_engine) as s:
        yield s


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def const_weight():
    return parse_weight("const:1")
