"""
Shared model fixtures for kinetics tests
"""

import pytest

from kinetics.potentials import MollifiedCoulomb, Quadratic, build_model


@pytest.fixture
def unit_model():
    """a = b = gamma = sigma = 1 in one dimension"""
    return build_model(1, 1.0, 1.0, Quadratic(1.0), Quadratic(1.0))


@pytest.fixture
def free_model():
    """No interaction: W = 0"""
    return build_model(1, 1.0, 1.0, Quadratic(1.0), Quadratic(0.0))


@pytest.fixture
def coulomb_model():
    return build_model(1, 1.0, 1.0, Quadratic(1.0), MollifiedCoulomb(0.3, 1.0))


@pytest.fixture
def coulomb_model_2d():
    return build_model(2, 1.0, 1.0, Quadratic(1.0), MollifiedCoulomb(0.3, 1.0))
