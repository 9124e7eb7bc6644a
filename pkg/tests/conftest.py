import random

import pytest

from vertfed.fixedpoint import FixedPointCodec
from vertfed.groups import DlogSolver, DlogTable, group_gen


@pytest.fixture(scope="session")
def ctx():
    return group_gen(48, seed=20240601)


@pytest.fixture(scope="session")
def solver(ctx):
    return DlogSolver(ctx, DlogTable.build(ctx, 1 << 15))


@pytest.fixture()
def rnd():
    return random.Random(0xC0FFEE)


@pytest.fixture()
def codec():
    return FixedPointCodec(scale=1000, value_bound=16.0)
