import numpy as np
import pytest

from ymtorus import gaugefield as gf
from ymtorus import lattice

# acceptance lines recorded by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_base(rng):
    return gf.FlatBase(*rng.uniform(0.1, np.pi - 0.1, 2))


def random_connection(rng, N, amp=0.3, base=None, kmax=2):
    base = random_base(rng) if base is None else base
    return gf.Connection(base, amp * lattice.random_smooth(rng, N, (2,), kmax=kmax))


def slice_field(rng, N, base, kmax=2):
    return gf.coulomb_project(lattice.random_smooth(rng, N, (2,), kmax=kmax), base)
