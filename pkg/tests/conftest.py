"""Общие фикстуры тестов"""
import numpy as np
import pytest

from spectral.models import FlowParams
from spectral.radial_grid import build_grid, random_dirichlet_field


@pytest.fixture
def grid():
    """Сетка R=2, n=32"""
    return build_grid(2.0, 32)


@pytest.fixture
def params():
    return FlowParams(nu=1.0e-2, A=1.0, B=1.0, R=2.0, K=4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def dirichlet_field(grid, rng):
    """Фабрика гладких случайных полей с нулями на границах"""
    def make(complex_valued: bool = True):
        return random_dirichlet_field(grid, rng, complex_valued=complex_valued)
    return make
