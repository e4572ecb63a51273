import numpy as np
import pytest

from tbp import Problem, ShapeClass, shape_check


def random_concave_means(rng, K, min_gap=0.05):
    """Concave means via non-increasing increments, clear of the threshold at 0.

    Guaranteed: concave, every |mean| >= min_gap, at least one arm above 0.
    """
    for _ in range(200):
        incs = np.sort(rng.normal(0.0, 1.0, K - 1))[::-1]
        mu = np.concatenate(([0.0], np.cumsum(incs)))
        mu = mu - mu.max() + float(rng.uniform(0.3, 2.0))
        if np.min(np.abs(mu)) >= min_gap and np.any(mu > 0):
            p = Problem(mu, 1.0, 0.0)
            assert shape_check(p, ShapeClass.CONCAVE)
            return mu
    raise AssertionError("failed to draw a concave instance clear of the threshold")


def random_relaxed_means(rng, K, split, min_gap=0.05):
    """Relaxed-monotone means: `split` arms below 0, the rest above, blocks unsorted."""
    below = -rng.uniform(min_gap, 3.0, split)
    above = rng.uniform(min_gap, 3.0, K - split)
    return np.concatenate([below, above])


def random_v_gaps(rng, K, min_gap_low=0.05, min_gap_high=0.5):
    """Gap vectors realizable in the monotone class: non-increasing into the
    argmin, non-decreasing after."""
    i = int(rng.integers(0, K))
    gmin = float(rng.uniform(min_gap_low, min_gap_high))
    left = np.sort(rng.uniform(gmin * 1.001, 5.0, i))[::-1]
    right = np.sort(rng.uniform(gmin * 1.001, 5.0, K - i - 1))
    return np.concatenate([left, [gmin], right])


@pytest.fixture
def concave_sampler():
    return random_concave_means


@pytest.fixture
def relaxed_sampler():
    return random_relaxed_means


@pytest.fixture
def v_gap_sampler():
    return random_v_gaps
