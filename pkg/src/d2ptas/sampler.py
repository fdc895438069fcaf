"""Cost-weighted sampling against a growing center set.

A point's sampling weight is its cached divergence to the nearest chosen
center (the "potential").  With no centers yet every point gets pseudo-weight
1, so the first draw is uniform; once all points are covered exactly the
distribution falls back to uniform again, flagged so callers can terminate
early instead of treating it as an error.
"""

from collections import namedtuple

import numpy as np

from .divergences import PropertyReport, as_points
from .errors import ConfigError, DimensionMismatch

__all__ = [
    "RngStream",
    "CenterSet",
    "D2Distribution",
    "d2_distribution",
    "d2_sample",
    "weighted_draw",
    "add_center",
    "empirical_distribution_check",
]

_MASK64 = (1 << 64) - 1


def _splitmix64(x):
    """One round of the splitmix64 mixer; bijective on 64-bit words."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


class RngStream:
    """Deterministic random stream addressed by (seed, stream_id).

    The same (seed, stream_id) always produces the same draw sequence,
    independent of platform.  ``derive(i)`` yields child stream i through a
    64-bit mix of the parent id, so a derivation path like
    ``root.derive(r).derive(i)`` is stable no matter how many siblings are
    ever created -- which is what makes "extend the experiment" reproducible.
    """

    def __init__(self, seed, stream_id=0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        self._gen = None

    @property
    def generator(self):
        """The underlying numpy Generator (created lazily, then reused)."""
        if self._gen is None:
            ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
            self._gen = np.random.Generator(np.random.PCG64(ss))
        return self._gen

    def derive(self, index):
        """Child stream ``index`` of this stream (fresh generator state)."""
        child = _splitmix64((_splitmix64(self.stream_id) + int(index)) & _MASK64)
        return RngStream(self.seed, child)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


class CenterSet:
    """Ordered centers plus cached per-point cost to the nearest one.

    Immutable in use: ``add`` returns a new CenterSet, updating the cache with
    ``new = min(old, D(p, c_new))``.  Potentials are real costs from the first
    center onward and shrink monotonically under ``add``; the empty set
    carries pseudo-potential 1 per point purely so that sampling is uniform.
    """

    def __init__(self, points, measure, centers=None, potentials=None):
        self.points = as_points(points)
        self.measure = measure
        self.centers = list(centers) if centers is not None else []
        if potentials is None:
            if self.centers:
                potentials = np.min(measure.pairwise(self.points, np.asarray(self.centers)), axis=1)
            else:
                potentials = np.ones(self.points.shape[0])
        self.potentials = np.asarray(potentials, dtype=float)
        self.total_potential = float(self.potentials.sum())

    @classmethod
    def empty(cls, points, measure):
        return cls(points, measure)

    @property
    def size(self):
        return len(self.centers)

    def center_array(self):
        if not self.centers:
            return np.empty((0, self.points.shape[1]))
        return np.asarray(self.centers, dtype=float)

    def add(self, center):
        """New CenterSet with ``center`` appended and potentials re-minimized."""
        c = np.atleast_1d(np.asarray(center, dtype=float))
        if c.shape != (self.points.shape[1],):
            raise DimensionMismatch(f"center has shape {c.shape}, points are {self.points.shape[1]}-dimensional")
        self.measure.validate_points(c)
        fresh = np.asarray(self.measure.rowwise(self.points, c[None, :]), dtype=float)
        if self.centers:
            fresh = np.minimum(self.potentials, fresh)
        return CenterSet(self.points, self.measure, self.centers + [c], fresh)

    def scoring_potentials(self):
        """Per-point costs for greedy augmentation scoring; +inf before any center."""
        if self.centers:
            return self.potentials
        return np.full(self.points.shape[0], np.inf)

    def recomputed_potentials(self):
        """From-scratch potentials, for validating the incremental cache."""
        if not self.centers:
            return np.ones(self.points.shape[0])
        return np.min(self.measure.pairwise(self.points, self.center_array()), axis=1)

    def distribution(self):
        """(probabilities, zero_potential) for cost-weighted sampling."""
        n = self.points.shape[0]
        if self.centers and self.total_potential <= 0.0:
            return np.full(n, 1.0 / n), True
        return self.potentials / self.total_potential, False

    def __repr__(self):
        return f"CenterSet(size={self.size}, total_potential={self.total_potential:.6g})"


D2Distribution = namedtuple("D2Distribution", ["probs", "zero_potential"])


def d2_distribution(center_set):
    """Exact sampling law: probability proportional to cost-to-nearest-center.

    Empty center set: uniform.  All points already covered exactly: uniform,
    with ``zero_potential`` set (the clustering cost is 0, not an error).
    """
    probs, flag = center_set.distribution()
    return D2Distribution(probs, flag)


def weighted_draw(probs, rng, count):
    """``count`` categorical draws from an explicit probability vector.

    Inverts the cumulative distribution over the support only, so
    zero-probability indices can never be drawn, even at float boundaries.
    """
    support = np.flatnonzero(probs > 0.0)
    cum = np.cumsum(probs[support])
    cum[-1] = 1.0  # kill accumulated rounding so u in [0, 1) always lands
    u = rng.generator.random(count)
    return support[np.searchsorted(cum, u, side="right")]


def d2_sample(center_set, rng, count):
    """``count`` independent point-index draws (with replacement)."""
    count = int(count)
    if count < 1:
        raise ConfigError(f"sample count must be >= 1, got {count}")
    probs, _ = center_set.distribution()
    return weighted_draw(probs, rng, count)


def add_center(center_set, center):
    """Functional spelling of ``center_set.add(center)``."""
    return center_set.add(center)


def empirical_distribution_check(center_set, rng, trials, tolerance=None):
    """Compare empirical draw frequencies against the exact distribution.

    The default tolerance follows the Monte-Carlo scale: 0.01 in L-infinity
    at 1e5 trials, 0.05 below that.
    """
    trials = int(trials)
    if trials < 1000:
        raise ConfigError("need at least 1000 trials for a meaningful frequency check")
    probs, flag = center_set.distribution()
    draws = d2_sample(center_set, rng, trials)
    freq = np.bincount(draws, minlength=probs.shape[0]) / trials
    linf = float(np.abs(freq - probs).max())
    if tolerance is None:
        tolerance = 0.01 if trials >= 100_000 else 0.05
    return PropertyReport(
        property="sampling",
        trials=trials,
        violations=int(linf > tolerance),
        worst_ratio=linf,
        tolerance=tolerance,
        details={"zero_potential": flag},
    )
