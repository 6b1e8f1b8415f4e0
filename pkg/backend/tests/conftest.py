from pathlib import Path

import numpy as np
import pytest

from app.models.measures import from_piecewise, random_measure

INSTANCES = Path(__file__).resolve().parents[1] / "instances"

LOG2 = float(np.log(2.0))


def uniform(lo, hi):
    return from_piecewise([lo, hi], [1.0 / (hi - lo)])


@pytest.fixture
def e1():
    return uniform(0.0, 1.0), uniform(0.0, 1.0)


@pytest.fixture
def e2():
    return uniform(0.0, 1.0), uniform(1.0, 2.0)


@pytest.fixture
def e3():
    return uniform(0.0, 1.0), uniform(0.5, 1.5)


@pytest.fixture
def e4():
    return uniform(0.0, 2.0), from_piecewise([0.0, 1.0, 1.5, 2.0], [0.5, 0.0, 1.0])


@pytest.fixture
def mirrored_e2():
    return uniform(1.0, 2.0), uniform(0.0, 1.0)


@pytest.fixture
def touching():
    # F_mu - F_nu > 0 on (0, 1) and (1, 2), = 0 at 1
    return uniform(0.0, 2.0), from_piecewise([0.0, 0.5, 1.0, 1.5, 2.0], [0.0, 1.0, 0.0, 1.0])


def random_pairs(count=50, seed=0):
    rng = np.random.default_rng(seed)
    return [(random_measure(rng, 0.0, 1.0, gap_prob=0.2), random_measure(rng, 0.0, 1.0, gap_prob=0.2))
            for _ in range(count)]


@pytest.fixture
def instances_dir():
    return INSTANCES
