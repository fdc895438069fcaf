"""Sampling-based (1+eps)-approximate clustering.

The algorithm grows a center set over k iterations.  Each iteration draws N
points with probability proportional to their current cost, then adds the
mean of one M-subset of the draw.  Which subset gets added is the whole
game:

* ``Exhaustive`` branches on every candidate subset at every iteration and
  keeps the k-tuple of subsets whose final center set has least cost.  The
  drawn sample is first collapsed to its distinct point values and subsets of
  every size up to M are enumerated, which keeps the tree finite at sample
  sizes where choosing M of N positions would be astronomically infeasible.
* ``RandomTrials(R)`` is the cheap surrogate: per iteration it draws R
  anchored M-subsets (a uniform anchor position plus its M-1 nearest sample
  neighbors), scores each by the cost of the augmented center set, and
  greedily keeps the best one.

Everything is deterministic given an :class:`~d2ptas.sampler.RngStream`:
restart r uses ``rng.derive(r)``, iteration/trial streams are derived below
that, so extending restarts or trials never reshuffles earlier draws.
"""

import itertools
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .divergences import SquaredEuclidean, as_points, assign
from .errors import ConfigError, InsufficientPoints
from .sampler import CenterSet, d2_sample, weighted_draw

__all__ = [
    "Exhaustive",
    "RandomTrials",
    "parse_strategy",
    "PtasConfig",
    "ClusteringResult",
    "default_eta",
    "paper_scale_constants",
    "find_k_median",
    "find_k_means",
    "run_one_restart",
    "kmeanspp_seed",
    "find_best_over_k",
]

EPSILON_CAP = 0.5

DESK_SAMPLE_SIZE = 100
DESK_SUBSET_SIZE = 10
DESK_TRIALS = 50
DESK_RESTARTS = 8


# ----------------------------------------------------------------------
# subset-selection strategies
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Exhaustive:
    """Branch on every candidate subset of every sample (tiny scales only)."""

    def describe(self):
        return "exhaustive"


@dataclass(frozen=True)
class RandomTrials:
    """Score ``trials`` anchored M-subsets per iteration, keep the greedy best."""

    trials: int = DESK_TRIALS

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("RandomTrials needs at least one trial")

    def describe(self):
        return f"random:{self.trials}"


def parse_strategy(text):
    """'exhaustive' | 'random' | 'random:R' -> strategy object."""
    text = text.strip().lower()
    if text == "exhaustive":
        return Exhaustive()
    if text == "random":
        return RandomTrials()
    if text.startswith("random:"):
        try:
            return RandomTrials(int(text.split(":", 1)[1]))
        except ValueError as exc:
            raise ConfigError(f"bad trial count in strategy {text!r}") from exc
    raise ConfigError(f"unknown strategy {text!r}; use 'exhaustive' or 'random:R'")


# ----------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------

def default_eta(measure):
    """Triangle/symmetry aggregate used by the generic sample-size formula.

    For the plain squared-Euclidean objective the tuned constant 20 is used;
    otherwise eta is derived from the measure's declared constants as
    2 * alpha^2 / beta^2 * (1 + 1/beta).
    """
    if isinstance(measure, SquaredEuclidean):
        return 20.0
    a, b = measure.alpha, measure.beta
    return 2.0 * a * a / (b * b) * (1.0 + 1.0 / b)


def paper_scale_constants(measure, k, epsilon, eta):
    """(N, M) at full analysis scale -- far beyond what enumeration can run."""
    if isinstance(measure, SquaredEuclidean):
        return math.ceil(51200.0 * k / epsilon ** 3), math.ceil(100.0 / epsilon)
    delta = 0.2
    gamma = epsilon / eta
    mu = 1.0 if measure.mu is None else measure.mu
    f = 1.0 / (mu * gamma * delta)
    n = math.ceil(24.0 * eta * measure.alpha * measure.beta * k * f / epsilon ** 2)
    return n, math.ceil(f)


@dataclass(frozen=True)
class PtasConfig:
    """Algorithm constants; unset fields are filled from the scale preset.

    ``scale_preset="desk"`` uses constants sized for interactive runs
    (N=100, M=10, RandomTrials(50), 8 restarts).  ``"paper"`` uses the full
    analysis constants with exhaustive enumeration and 2^k restarts, which is
    only meaningful to inspect, not to run.
    """

    k: int
    epsilon: float
    sample_size_N: int = None
    subset_size_M: int = None
    restarts: int = None
    subset_strategy: object = None
    eta: float = None
    scale_preset: str = "desk"

    def resolved(self, measure):
        """A fully-populated copy of this config for ``measure``."""
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        eps = float(self.epsilon)
        if not (eps > 0.0):
            raise ConfigError(f"epsilon must be positive, got {eps}")
        if eps > EPSILON_CAP:
            warnings.warn(
                f"epsilon={eps} exceeds the supported range; clamped to {EPSILON_CAP}",
                stacklevel=2,
            )
            eps = EPSILON_CAP
        if self.scale_preset not in ("desk", "paper"):
            raise ConfigError(f"unknown scale preset {self.scale_preset!r}")

        eta = float(self.eta) if self.eta is not None else default_eta(measure)
        n_, m_ = self.sample_size_N, self.subset_size_M
        restarts, strategy = self.restarts, self.subset_strategy
        if self.scale_preset == "desk":
            n_ = DESK_SAMPLE_SIZE if n_ is None else n_
            m_ = DESK_SUBSET_SIZE if m_ is None else m_
            restarts = DESK_RESTARTS if restarts is None else restarts
            strategy = RandomTrials() if strategy is None else strategy
        else:
            pn, pm = paper_scale_constants(measure, self.k, eps, eta)
            n_ = pn if n_ is None else n_
            m_ = pm if m_ is None else m_
            restarts = 2 ** self.k if restarts is None else restarts
            strategy = Exhaustive() if strategy is None else strategy

        n_, m_, restarts = int(n_), int(m_), int(restarts)
        if m_ < 1 or n_ < 1:
            raise ConfigError("sample and subset sizes must be >= 1")
        if m_ > n_:
            raise ConfigError(f"subset size M={m_} exceeds sample size N={n_}")
        if restarts < 1:
            raise ConfigError("restarts must be >= 1")
        return replace(
            self,
            epsilon=eps,
            sample_size_N=n_,
            subset_size_M=m_,
            restarts=restarts,
            subset_strategy=strategy,
            eta=eta,
        )

    def summary(self):
        return {
            "k": self.k,
            "epsilon": self.epsilon,
            "sample_size_N": self.sample_size_N,
            "subset_size_M": self.subset_size_M,
            "restarts": self.restarts,
            "strategy": self.subset_strategy.describe() if self.subset_strategy else None,
            "eta": self.eta,
            "scale_preset": self.scale_preset,
        }


@dataclass
class ClusteringResult:
    """Centers, the induced assignment, total cost, and run provenance."""

    centers: np.ndarray
    assignment: np.ndarray
    cost: float
    meta: dict = field(default_factory=dict)

    def to_dict(self, include_trace=False):
        meta = {k: v for k, v in self.meta.items() if include_trace or k != "trace"}
        return {
            "centers": np.asarray(self.centers).tolist(),
            "assignment": np.asarray(self.assignment).tolist(),
            "cost": self.cost,
            "meta": _jsonable(meta),
        }


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    return value


# ----------------------------------------------------------------------
# restart internals
# ----------------------------------------------------------------------

class _Restart:
    """Outcome of one restart: chosen centers and how they were found."""

    __slots__ = ("cost", "centers", "trace", "subsets_examined")

    def __init__(self, cost, centers, trace, subsets_examined):
        self.cost = cost
        self.centers = centers
        self.trace = trace
        self.subsets_examined = subsets_examined


def _distinct_sample_points(points, sample_idx):
    """Indices of the distinct point values in the draw, first occurrence first."""
    uniq, first = np.unique(sample_idx, return_index=True)
    idxs = uniq[np.argsort(first)]
    if len(idxs) <= 1:
        return idxs
    keep, seen = [], set()
    for i in idxs:
        key = points[i].tobytes()
        if key not in seen:
            seen.add(key)
            keep.append(i)
    return np.asarray(keep, dtype=np.intp)


@lru_cache(maxsize=256)
def _combo_groups(pool_size, max_size):
    """Index combinations of sizes 1..max_size, lexicographic within each size."""
    groups = []
    for size in range(1, min(pool_size, max_size) + 1):
        combos = np.array(list(itertools.combinations(range(pool_size), size)), dtype=np.intp)
        groups.append(combos)
    return tuple(groups)


def _combo_by_rank(groups, rank):
    for combos in groups:
        if rank < len(combos):
            return combos[rank]
        rank -= len(combos)
    raise IndexError("subset rank out of range")


def _fill_distinct_centers(points, centers, k):
    """Pad a center list to k entries, preferring unused distinct data points."""
    have = {np.asarray(c).tobytes() for c in centers}
    out = list(centers)
    for row in points:
        if len(out) == k:
            break
        key = row.tobytes()
        if key not in have:
            have.add(key)
            out.append(row.copy())
    idx = 0
    while len(out) < k:  # fewer distinct values than k: duplicates are all that's left
        out.append(points[idx % len(points)].copy())
        idx += 1
    return out


class _TreeSearch:
    """Depth-first enumeration over per-iteration candidate subsets.

    Node streams follow the branch path (child s gets ``stream.derive(1+s)``,
    the node's own draw uses ``stream.derive(0)``), so the winning path can be
    replayed exactly to reconstruct its trace.
    """

    def __init__(self, points, measure, k, sample_size, subset_size):
        self.points = points
        self.measure = measure
        self.k = k
        self.sample_size = sample_size
        self.subset_size = subset_size
        self.best_cost = np.inf
        self.best_path = None
        self.subsets_examined = 0

    def _expand(self, potentials, stream):
        """Sample at this node and return (sample_idx, candidate centers, child potentials)."""
        n = self.points.shape[0]
        if potentials is None:
            probs = np.full(n, 1.0 / n)
        else:
            probs = potentials / potentials.sum()
        sample_idx = weighted_draw(probs, stream.derive(0), self.sample_size)
        pool_idx = _distinct_sample_points(self.points, sample_idx)
        pool = self.points[pool_idx]
        groups = _combo_groups(len(pool_idx), self.subset_size)
        cands = np.concatenate([pool[g].mean(axis=1) for g in groups], axis=0)
        fresh = self.measure.pairwise(self.points, cands)
        pots = fresh if potentials is None else np.minimum(potentials[:, None], fresh)
        return sample_idx, pool_idx, groups, cands, pots

    def run(self, stream):
        self._visit(None, stream, ())
        return self.best_cost, self.best_path

    def _visit(self, potentials, stream, path):
        if self.best_cost == 0.0:
            return
        depth = len(path)
        _, _, _, _, pots = self._expand(potentials, stream)
        costs = pots.sum(axis=0)
        self.subsets_examined += costs.shape[0]
        if depth == self.k - 1:
            b = int(np.argmin(costs))
            if costs[b] < self.best_cost:
                self.best_cost = float(costs[b])
                self.best_path = path + (b,)
            return
        for b in range(costs.shape[0]):
            if self.best_cost == 0.0:
                return
            if costs[b] == 0.0:
                # every point is covered already; deeper centers cannot matter
                if 0.0 < self.best_cost:
                    self.best_cost = 0.0
                    self.best_path = path + (b,)
                return
            self._visit(pots[:, b], stream.derive(1 + b), path + (b,))

    def replay(self, stream, path):
        """Recompute the winning branch and emit its per-iteration trace."""
        trace, centers = [], []
        potentials = None
        for depth, b in enumerate(path):
            sample_idx, pool_idx, groups, cands, pots = self._expand(potentials, stream)
            combo = _combo_by_rank(groups, b)
            trace.append({
                "iteration": depth,
                "sample": sample_idx,
                "pool": pool_idx,
                "subset_rank": b,
                "subset_points": pool_idx[combo],
                "center": cands[b],
                "partial_cost": float(pots[:, b].sum()),
            })
            centers.append(cands[b])
            potentials = pots[:, b]
            stream = stream.derive(1 + b)
        return centers, trace


def _exhaustive_restart(points, measure, cfg, stream):
    search = _TreeSearch(points, measure, cfg.k, cfg.sample_size_N, cfg.subset_size_M)
    cost, path = search.run(stream)
    centers, trace = search.replay(stream, path)
    centers = _fill_distinct_centers(points, centers, cfg.k)
    return _Restart(cost, centers, trace, search.subsets_examined)


def _greedy_restart(points, measure, cfg, stream):
    """One greedy pass: per iteration, R anchored subset trials, keep the best.

    Trial t picks a uniform anchor position in the sample and takes the M
    sample positions nearest the anchor (stable order, so ties resolve by
    position).  Anchored subsets are the load-bearing choice: a subset of M
    independent positions of a mixed sample almost never isolates one
    cluster, so its mean lands between clusters and the greedy score --
    which is blind beyond the current iteration -- happily keeps it.  A
    nearest-neighbor patch around a sampled anchor is cluster-pure whenever
    clusters are separated, so the candidate menu consists of plausible
    cluster centers instead of mixture midpoints.
    """
    trials = cfg.subset_strategy.trials
    m_ = cfg.subset_size_M
    center_set = CenterSet.empty(points, measure)
    trace, examined = [], 0
    for i in range(cfg.k):
        if center_set.size and center_set.total_potential == 0.0:
            break
        it_stream = stream.derive(i)
        sample_idx = d2_sample(center_set, it_stream.derive(0), cfg.sample_size_N)
        sample = points[sample_idx]
        anchors = np.array([
            int(it_stream.derive(1 + t).generator.integers(cfg.sample_size_N))
            for t in range(trials)
        ])
        to_anchor = measure.pairwise(sample, sample[anchors])    # (N, R)
        positions = np.argsort(to_anchor, axis=0, kind="stable")[:m_].T   # (R, M)
        cands = sample[positions].mean(axis=1)
        scores = np.minimum(
            center_set.scoring_potentials()[:, None],
            measure.pairwise(points, cands),
        ).sum(axis=0)
        examined += trials
        t_best = int(np.argmin(scores))
        trace.append({
            "iteration": i,
            "sample": sample_idx,
            "trial": t_best,
            "anchor": int(anchors[t_best]),
            "subset_positions": positions[t_best],
            "subset_points": sample_idx[positions[t_best]],
            "center": cands[t_best],
            "partial_cost": float(scores[t_best]),
        })
        center_set = center_set.add(cands[t_best])
    centers = _fill_distinct_centers(points, list(center_set.centers), cfg.k)
    cost = float(CenterSet(points, measure, centers).total_potential) if len(centers) > center_set.size \
        else center_set.total_potential
    return _Restart(cost, centers, trace, examined)


def _single_restart(points, measure, cfg, stream):
    if isinstance(cfg.subset_strategy, Exhaustive):
        return _exhaustive_restart(points, measure, cfg, stream)
    return _greedy_restart(points, measure, cfg, stream)


# ----------------------------------------------------------------------
# public entry points
# ----------------------------------------------------------------------

def find_k_median(data, measure, config, rng, threads=None):
    """Best clustering over all restarts and subset choices explored.

    Restart r runs on ``rng.derive(r)``; the winner is the (cost, restart)
    lexicographic minimum, so results are reproducible and adding restarts
    can only improve the returned cost.
    """
    points = as_points(data)
    measure.validate_points(points)
    cfg = config.resolved(measure)
    if points.shape[0] < cfg.k:
        raise InsufficientPoints(f"need at least k={cfg.k} points, got {points.shape[0]}")

    t0 = time.perf_counter()

    if np.unique(points, axis=0).shape[0] <= cfg.k:
        # every distinct value can host its own center; no search needed
        centers = np.asarray(_fill_distinct_centers(points, [], cfg.k), dtype=float)
        labels, costs = assign(measure, points, centers)
        return ClusteringResult(
            centers=centers,
            assignment=labels,
            cost=float(costs.sum()),
            meta={
                "seed": [rng.seed, rng.stream_id],
                "strategy": cfg.subset_strategy.describe(),
                "restarts": 0,
                "winning_restart": 0,
                "subsets_examined": 0,
                "iterations": 0,
                "seconds": time.perf_counter() - t0,
                "trace": [],
                "config": cfg.summary(),
            },
        )

    def one(r):
        return r, _single_restart(points, measure, cfg, rng.derive(r))

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            outcomes = list(pool.map(one, range(cfg.restarts)))
    else:
        outcomes = [one(r) for r in range(cfg.restarts)]

    best_r, best = min(outcomes, key=lambda pair: (pair[1].cost, pair[0]))
    centers = np.asarray(best.centers, dtype=float)
    labels, costs = assign(measure, points, centers)
    result = ClusteringResult(
        centers=centers,
        assignment=labels,
        cost=float(costs.sum()),
        meta={
            "seed": [rng.seed, rng.stream_id],
            "strategy": cfg.subset_strategy.describe(),
            "restarts": cfg.restarts,
            "winning_restart": best_r,
            "subsets_examined": sum(o.subsets_examined for _, o in outcomes),
            "iterations": cfg.k,
            "seconds": time.perf_counter() - t0,
            "trace": best.trace,
            "config": cfg.summary(),
        },
    )
    return result


def find_k_means(data, config, rng, threads=None, measure=None):
    """k-means entry point: squared-Euclidean objective, same engine underneath."""
    return find_k_median(data, measure if measure is not None else SquaredEuclidean(),
                         config, rng, threads=threads)


def run_one_restart(data, measure, config, rng):
    """Execute the k-iteration inner loop once, with a full per-iteration trace."""
    points = as_points(data)
    measure.validate_points(points)
    cfg = config.resolved(measure)
    if points.shape[0] < cfg.k:
        raise InsufficientPoints(f"need at least k={cfg.k} points, got {points.shape[0]}")
    t0 = time.perf_counter()
    outcome = _single_restart(points, measure, cfg, rng)
    centers = np.asarray(outcome.centers, dtype=float)
    labels, costs = assign(measure, points, centers)
    return ClusteringResult(
        centers=centers,
        assignment=labels,
        cost=float(costs.sum()),
        meta={
            "seed": [rng.seed, rng.stream_id],
            "strategy": cfg.subset_strategy.describe(),
            "restarts": 1,
            "subsets_examined": outcome.subsets_examined,
            "iterations": cfg.k,
            "seconds": time.perf_counter() - t0,
            "trace": outcome.trace,
            "config": cfg.summary(),
        },
    )


def kmeanspp_seed(data, measure, k, rng):
    """k centers by iterated single-point cost-weighted sampling (the classic seeding)."""
    points = as_points(data)
    measure.validate_points(points)
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if points.shape[0] < k:
        raise InsufficientPoints(f"need at least k={k} points, got {points.shape[0]}")
    center_set = CenterSet.empty(points, measure)
    picked = []
    for i in range(k):
        idx = int(d2_sample(center_set, rng.derive(i), 1)[0])
        picked.append(idx)
        center_set = center_set.add(points[idx])
    centers = np.asarray([points[i] for i in picked], dtype=float)
    labels, costs = assign(measure, points, centers)
    return ClusteringResult(
        centers=centers,
        assignment=labels,
        cost=float(costs.sum()),
        meta={"seed": [rng.seed, rng.stream_id], "method": "kmeans++", "picked": picked},
    )


def find_best_over_k(data, measure, config, rng, threads=None):
    """Run the algorithm for every center count i = 1..k and keep the best.

    Dropping the assumption that all k clusters matter costs accuracy, which
    is repaid by tightening epsilon to eps/((1+eps/2)*k) in the sub-runs; the
    i-center results are all scored on the same objective, so the returned
    minimum is well-defined (ties go to the smaller i).
    """
    points = as_points(data)
    base = config.resolved(measure)
    scaled_eps = base.epsilon / ((1.0 + base.epsilon / 2.0) * base.k)
    best, runs = None, []
    for i in range(1, base.k + 1):
        sub = replace(config, k=i, epsilon=scaled_eps)
        result = find_k_median(points, measure, sub, rng.derive(i), threads=threads)
        runs.append({"k": i, "cost": result.cost})
        if best is None or result.cost < best.cost:
            best = result
    best.meta["k_requested"] = base.k
    best.meta["epsilon_scaled"] = scaled_eps
    best.meta["runs"] = runs
    return best
