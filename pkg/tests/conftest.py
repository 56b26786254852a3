import numpy as np
import pytest

from surfsde import galerkin, geometry, operators, spaces


@pytest.fixture(scope="session")
def unit_circle():
    return geometry.static_circle(1.0, horizon=1.0, n_grid=64)


@pytest.fixture(scope="session")
def unit_circle_gram(unit_circle):
    return spaces.GramPath.build(unit_circle, 8)


@pytest.fixture(scope="session")
def dilation_gram():
    # linear dilation: moving norms scale like R(t), handy closed forms
    curve = geometry.dilating_circle(1.0, 1.0, "linear", 1.0, 64)
    return spaces.GramPath.build(curve, 16)


@pytest.fixture(scope="session")
def exp_gram():
    curve = geometry.dilating_circle(1.0, 0.8, "exp", 1.0, 64)
    return spaces.GramPath.build(curve, 16)


@pytest.fixture(scope="session")
def ellipse_gram():
    curve = geometry.oscillating_ellipse(1.0, 0.7, 0.12, 1.0, 0.5, 64)
    return spaces.GramPath.build(curve, 32)


@pytest.fixture(scope="session")
def ellipse_gram_fine():
    # explicit stepping with modes up to n = 32 needs dt * n^2 <= 1
    curve = geometry.oscillating_ellipse(1.0, 0.7, 0.12, 1.0, 0.25, 64)
    return spaces.GramPath.build(curve, 256)


@pytest.fixture(scope="session")
def heat_model():
    return operators.StefanModel(operators.LinearHeatNonlinearity(), operators.no_noise(1))


@pytest.fixture(scope="session")
def stefan_model():
    noise = operators.NoiseModel(
        operators.noise_spectrum(0.25, 8), coupling="linear_multiplicative"
    )
    return operators.StefanModel(operators.StefanNonlinearity(1, 1, 1), noise)


@pytest.fixture(scope="session")
def small_basis(unit_circle_gram):
    return galerkin.TimeBasis.build(unit_circle_gram, n=6)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
