"""Bandit problems, shape classes, deterministic sampling, and instance families.

Arms are indexed ``1..K`` in every public API, matching the usual bandit
convention.  Vector quantities (means, gaps, labels) are stored positionally,
so arm ``k`` lives at array index ``k - 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

__all__ = [
    "LARGE_GAP",
    "ShapeClass",
    "Setting",
    "Problem",
    "GapVector",
    "Classification",
    "RngStream",
    "true_labels",
    "gaps",
    "shape_check",
    "sample_mean",
    "make_setting",
    "augment",
]

#: Gap assigned to the "very large" arms of the one-small-gap instance family.
LARGE_GAP = 100.0


class ShapeClass(Enum):
    """Structural constraint on the sequence of arm means."""

    UNSTRUCTURED = "unstructured"
    MONOTONE = "monotone"
    MONOTONE_DECREASING = "monotone_decreasing"
    RELAXED_MONOTONE = "relaxed_monotone"
    CONCAVE = "concave"


class Setting(Enum):
    """Named experiment instance families (plus a custom escape hatch)."""

    S1 = "s1"
    S2 = "s2"
    S2_CONCAVE = "s2concave"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class Problem:
    """A K-armed Gaussian threshold-classification instance.

    Parameters
    ----------
    means : array-like of float
        Arm means, arm ``k`` at index ``k - 1``.  Non-sentinel means must be
        finite.
    sigma : float
        Noise scale; samples of arm ``k`` are ``Normal(mu_k, sigma**2)``.
    tau : float
        Known classification threshold.
    sentinels : (float, float), optional
        When set, arms ``1`` and ``K`` are deterministic sentinel arms with
        exactly these values (``-inf`` low and ``+inf`` or ``-inf`` high).
        Sampling a sentinel costs zero budget.
    """

    means: np.ndarray
    sigma: float
    tau: float
    sentinels: Optional[Tuple[float, float]] = None

    def __post_init__(self) -> None:
        means = np.array(self.means, dtype=np.float64, copy=True)
        if means.ndim != 1 or means.size < 1:
            raise ValueError("means must be a non-empty 1-d vector")
        means.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "tau", float(self.tau))
        if not math.isfinite(self.tau):
            raise ValueError("tau must be finite")
        if not (math.isfinite(self.sigma) and self.sigma >= 0.0):
            raise ValueError("sigma must be finite and nonnegative")
        if self.sentinels is not None:
            lo, hi = self.sentinels
            if means.size < 3:
                raise ValueError("an augmented problem needs at least one real arm")
            if not (math.isinf(lo) and lo < 0):
                raise ValueError("low sentinel must be -inf")
            if not math.isinf(hi):
                raise ValueError("high sentinel must be infinite")
            if means[0] != lo or means[-1] != hi:
                raise ValueError("sentinel values must match the boundary means")
            interior = means[1:-1]
        else:
            interior = means
        if not np.all(np.isfinite(interior)):
            raise ValueError("non-sentinel means must be finite")

    @property
    def K(self) -> int:
        """Number of arms, sentinels included."""
        return int(self.means.size)

    @property
    def n_original(self) -> int:
        """Number of non-sentinel arms."""
        return self.K - 2 if self.sentinels is not None else self.K

    @property
    def original_means(self) -> np.ndarray:
        """Means of the non-sentinel arms."""
        return self.means[1:-1] if self.sentinels is not None else self.means

    def mean(self, arm: int) -> float:
        """True mean of ``arm`` (1-based)."""
        if not 1 <= arm <= self.K:
            raise IndexError(f"arm {arm} out of range 1..{self.K}")
        return float(self.means[arm - 1])

    def is_sentinel(self, arm: int) -> bool:
        if not 1 <= arm <= self.K:
            raise IndexError(f"arm {arm} out of range 1..{self.K}")
        return self.sentinels is not None and (arm == 1 or arm == self.K)

    def to_original(self, arm: int) -> int:
        """Map an augmented arm index back to the pre-augmentation index."""
        if self.sentinels is None:
            raise ValueError("problem has no sentinels")
        if not 2 <= arm <= self.K - 1:
            raise IndexError(f"arm {arm} is not a non-sentinel augmented index")
        return arm - 1

    def to_augmented(self, arm: int) -> int:
        """Map a pre-augmentation arm index into the augmented problem."""
        if self.sentinels is None:
            raise ValueError("problem has no sentinels")
        if not 1 <= arm <= self.n_original:
            raise IndexError(f"arm {arm} out of range 1..{self.n_original}")
        return arm + 1


@dataclass(frozen=True, eq=False)
class GapVector:
    """Per-arm distances to the threshold and their minimum."""

    gaps: np.ndarray
    delta_min: float

    def __post_init__(self) -> None:
        g = np.array(self.gaps, dtype=np.float64, copy=True)
        g.setflags(write=False)
        object.__setattr__(self, "gaps", g)
        object.__setattr__(self, "delta_min", float(self.delta_min))
        if np.any(g < 0):
            raise ValueError("gaps must be nonnegative")
        if g.size and self.delta_min != float(np.min(g)):
            raise ValueError("delta_min must equal the minimum gap")


@dataclass(frozen=True, eq=False)
class Classification:
    """A +/-1 label per arm (+1 means the mean is at or above the threshold)."""

    labels: np.ndarray

    def __post_init__(self) -> None:
        lab = np.array(self.labels, dtype=np.int64, copy=True)
        if lab.ndim != 1:
            raise ValueError("labels must be 1-d")
        if not np.all(np.isin(lab, (-1, 1))):
            raise ValueError("labels must be +/-1")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    def __len__(self) -> int:
        return int(self.labels.size)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Classification):
            return np.array_equal(self.labels, other.labels)
        return NotImplemented


@dataclass(eq=False)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_index)``.

    Two streams built from the same pair yield bit-identical draw sequences;
    distinct ``stream_index`` values give statistically independent streams
    (PCG64 seeded through ``SeedSequence(seed, spawn_key=(stream_index,))``).
    Streams are stateful and must not be shared between concurrent consumers.
    """

    seed: int
    stream_index: int = 0

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if int(self.stream_index) < 0:
            raise ValueError("stream_index must be nonnegative")
        self.seed = int(self.seed)
        self.stream_index = int(self.stream_index)
        self._generator: Optional[np.random.Generator] = None

    @property
    def generator(self) -> np.random.Generator:
        if self._generator is None:
            ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_index,))
            self._generator = np.random.Generator(np.random.PCG64(ss))
        return self._generator


def true_labels(problem: Problem) -> Classification:
    """Ground-truth classification of the non-sentinel arms."""
    mu = problem.original_means
    return Classification(np.where(mu >= problem.tau, 1, -1))


def gaps(problem: Problem) -> GapVector:
    """Distances |mu_k - tau| for every arm (sentinels map to +inf)."""
    g = np.abs(problem.means - problem.tau)
    return GapVector(g, float(np.min(g)))


def _relaxed_monotone(means: np.ndarray, tau: float) -> bool:
    above = means > tau
    below = means < tau
    # Violated iff a strictly-above arm precedes a strictly-below arm.
    return not bool(np.any(below & (np.cumsum(above) > 0)))


def _concave(means: np.ndarray) -> bool:
    if means.size < 3:
        return True
    mid = 0.5 * means[:-2] + 0.5 * means[2:]
    with np.errstate(invalid="ignore"):
        ok = mid <= means[1:-1]
    # NaN (from inf - inf midpoints) compares False, i.e. not concave.
    return bool(np.all(ok))


def shape_check(problem: Problem, shape: ShapeClass) -> bool:
    """Whether the mean sequence (sentinels included) belongs to ``shape``."""
    m = problem.means
    if shape is ShapeClass.UNSTRUCTURED:
        return True
    if shape is ShapeClass.MONOTONE:
        return bool(np.all(m[1:] >= m[:-1]))
    if shape is ShapeClass.MONOTONE_DECREASING:
        return bool(np.all(m[1:] <= m[:-1]))
    if shape is ShapeClass.RELAXED_MONOTONE:
        return _relaxed_monotone(m, problem.tau)
    if shape is ShapeClass.CONCAVE:
        return _concave(m)
    raise ValueError(f"unknown shape class {shape!r}")


def sample_mean(problem: Problem, arm: int, n: int, rng: RngStream) -> Tuple[float, int]:
    """Sample arm ``arm`` ``n`` times and return ``(sample mean, budget spent)``.

    Sentinel arms are deterministic and free: their exact value is returned at
    zero cost.  For regular arms the returned value is drawn directly from
    ``Normal(mu, sigma**2 / n)``, which has exactly the law of an average of
    ``n`` independent draws; one generator variate is consumed per call.
    """
    if not 1 <= arm <= problem.K:
        raise IndexError(f"arm {arm} out of range 1..{problem.K}")
    if problem.is_sentinel(arm):
        return problem.mean(arm), 0
    if n < 1:
        raise ValueError("n must be >= 1")
    mu = problem.mean(arm)
    scale = problem.sigma / math.sqrt(n)
    return mu + scale * float(rng.generator.standard_normal()), n


def _enforce_float_concavity(means: np.ndarray) -> np.ndarray:
    """Raise middles by at most a few ulps so the float midpoint inequality holds.

    The tent's flanks satisfy the defining inequality with exact equality in
    real arithmetic, which per-element rounding can flip by one ulp for
    unlucky (tau, delta) pairs.
    """
    m = means.copy()
    for _ in range(200):
        avg = 0.5 * m[:-2] + 0.5 * m[2:]
        bad = avg > m[1:-1]
        if not bad.any():
            return m
        m[np.flatnonzero(bad) + 1] = avg[bad]
    raise RuntimeError("could not restore floating-point concavity")


def make_setting(setting: Setting, K: int, delta: float, tau: float, sigma: float = 1.0) -> Problem:
    """Build one of the named benchmark instances.

    ``S1``: monotone means, a single arm at ``tau + delta`` (the first arm
    above threshold) and every other gap equal to ``LARGE_GAP``, the below
    block occupying the first ``K // 2`` arms.  ``S2``: monotone means with
    every gap equal to ``delta``, split at ``K // 2``.  ``S2_CONCAVE``: a
    symmetric tent with consecutive means ``2 * delta`` apart, peak at
    ``tau + 3 * delta`` on the center arm, so every gap is an odd multiple
    of ``delta``.
    """
    if K < 3:
        raise ValueError("K must be >= 3")
    if not delta > 0:
        raise ValueError("delta must be positive")
    half = K // 2
    if setting is Setting.S1:
        if delta >= LARGE_GAP:
            raise ValueError(f"S1 requires delta < {LARGE_GAP}")
        means = np.empty(K)
        means[:half] = tau - LARGE_GAP
        means[half] = tau + delta
        means[half + 1 :] = tau + LARGE_GAP
    elif setting is Setting.S2:
        means = np.empty(K)
        means[:half] = tau - delta
        means[half:] = tau + delta
    elif setting is Setting.S2_CONCAVE:
        center = half + 1
        k = np.arange(1, K + 1)
        means = _enforce_float_concavity(tau + delta * (3.0 - 2.0 * np.abs(k - center)))
    else:
        raise ValueError(f"make_setting does not build {setting!r} instances")
    problem = Problem(means, sigma, tau)
    if setting is Setting.S2_CONCAVE:
        # Construct-and-check: the tent must be concave with all gaps >= delta/2
        # and at least one arm above threshold.
        if not shape_check(problem, ShapeClass.CONCAVE):
            raise RuntimeError("emitted tent instance is not concave")
        if gaps(problem).delta_min < delta / 2 or not np.any(means > tau):
            raise RuntimeError("emitted tent instance violates its gap contract")
    return problem


def augment(problem: Problem, shape: ShapeClass) -> Problem:
    """Append deterministic sentinel arms for a tree search.

    Monotone augmentation brackets the threshold with ``-inf`` and ``+inf``
    sentinels; concave augmentation adds ``-inf`` on both ends.  The original
    arm ``j`` sits at augmented index ``j + 1`` (see ``Problem.to_original`` /
    ``Problem.to_augmented``).
    """
    if problem.sentinels is not None:
        raise ValueError("problem is already augmented")
    if shape is ShapeClass.MONOTONE:
        lo, hi = -math.inf, math.inf
    elif shape is ShapeClass.CONCAVE:
        lo, hi = -math.inf, -math.inf
    else:
        raise ValueError("augment supports Monotone and Concave only")
    means = np.concatenate(([lo], problem.means, [hi]))
    return Problem(means, problem.sigma, problem.tau, sentinels=(lo, hi))
