"""Shared fixtures: the 4-point line, the planted mixture, and seeded streams."""

import numpy as np
import pytest

from d2ptas import RngStream, SquaredEuclidean
from d2ptas.cli import generate_planted


@pytest.fixture(scope="session")
def sq():
    return SquaredEuclidean()


@pytest.fixture
def four_point_line():
    """The standard tiny fixture: {0, 1, 4, 5} on a line.

    Its k=2 optimum is {0,1} | {4,5} with centers 0.5 and 4.5 and cost
    4 * 0.25 = 1.0; its 1-mean is 2.5 with cost 17.0.
    """
    return np.array([[0.0], [1.0], [4.0], [5.0]])


@pytest.fixture(scope="session")
def planted():
    """Three well-separated Gaussian blobs, 100 points each, with ground truth."""
    rng = RngStream(7)
    points, labels, centers = generate_planted(
        k=3, per_cluster=100, dim=2, separation=10.0, sigma=1.0, rng=rng.derive(0))
    return points, labels, centers


@pytest.fixture
def rng():
    return RngStream(12345)


@pytest.fixture
def gen():
    """A plain numpy generator for building random test instances."""
    return RngStream(918273).derive(0).generator
