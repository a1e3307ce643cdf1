import numpy as np
import pytest

from ptwell.grid import Grid
from ptwell.potentials import PotentialSpec, Reflection, quartic_1d
from ptwell.problem import DoubleWellProblem


def custom_1d(v0, w=lambda x: x, extent=3.0, center=0.0, name="custom"):
    """1D spec from callables of ``x``."""
    return PotentialSpec(
        dimension=1,
        v0=lambda p: v0(p[:, 0]),
        w=lambda p: w(p[:, 0]),
        involution=Reflection(0, center),
        domain_box=((center - extent, center + extent),),
        name=name,
    )


@pytest.fixture(scope="session")
def quartic():
    return quartic_1d()


@pytest.fixture(scope="session")
def grid601():
    return Grid(((-3.0, 3.0),), (601,))


@pytest.fixture(scope="session")
def problem_h025(quartic, grid601):
    return DoubleWellProblem.build(quartic, grid601, 0.25, 0.3, max_epsilon_ratio=1.0)


@pytest.fixture(scope="session")
def problem_h03(quartic, grid601):
    return DoubleWellProblem.build(quartic, grid601, 0.3, 0.3, max_epsilon_ratio=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
