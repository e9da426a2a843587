import numpy as np
import pytest

from cpekit.trajectories import builtin_system, make_rng


@pytest.fixture
def reactor():
    return builtin_system("batch_reactor")


@pytest.fixture
def converter():
    return builtin_system("voltage_converter")


@pytest.fixture
def rng():
    return make_rng(12345)


def random_signal(rng, T, m):
    return rng.uniform(-1.0, 1.0, (T, m))


@pytest.fixture
def signal():
    return random_signal
