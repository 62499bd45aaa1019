import numpy as np
import pytest

from quadcode.ontology import CLASSES, default_quad_map


@pytest.fixture
def quad_map():
    return default_quad_map()


@pytest.fixture
def classes():
    return CLASSES


@pytest.fixture
def np_gen():
    return np.random.default_rng(20240817)
