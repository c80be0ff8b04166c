"""Shared fixtures: expensive geometric constructions are built once."""

import numpy as np
import pytest

from mirrorbm.hinges import compute_special_points
from mirrorbm.presets import preset_domain


@pytest.fixture(scope="session")
def example1():
    curve, alpha = preset_domain("example1")
    return curve, alpha


@pytest.fixture(scope="session")
def example1_specials(example1):
    curve, alpha = example1
    return compute_special_points(curve, alpha)


@pytest.fixture(scope="session")
def disk_domain():
    curve, alpha = preset_domain("disk")
    return curve, alpha


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260814)
