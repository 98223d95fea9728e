"""Finite metric spaces, discrete measures, Lipschitz machinery and path metrics.

Everything here is immutable after construction and safe to share across
workers.  Spaces are dense: a tuple of point labels plus a full distance
matrix, validated against the metric axioms at construction time.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError

# Hard cap on enumerated spaces: exact LP transport needs the full matrix.
MAX_POINTS = 10**6

# Full triangle sweep is O(m^3); above this size we spot-check random triples.
_FULL_TRIANGLE_LIMIT = 256
_METRIC_TOL = 1e-12


def trapezoid_weights(times: np.ndarray) -> np.ndarray:
    """Quadrature weights of the composite trapezoidal rule on a 1-D grid."""
    times = np.asarray(times, dtype=float)
    dt = np.diff(times)
    w = np.zeros_like(times)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


class FiniteMetricSpace:
    """A finite set of labelled points with an explicit distance matrix.

    Parameters
    ----------
    points : sequence of hashable labels
    dist : (m, m) array_like
        Symmetric, nonnegative, zero diagonal, triangle inequality.
    """

    def __init__(self, points, dist):
        self.points = tuple(points)
        self.dist = np.asarray(dist, dtype=float)
        self.dist.setflags(write=False)
        self._validate()

    def _validate(self):
        m = len(self.points)
        if self.dist.shape != (m, m):
            raise ValueError(f"distance matrix shape {self.dist.shape} != ({m}, {m})")
        if m > MAX_POINTS:
            raise CapacityError(f"{m} points exceeds cap {MAX_POINTS}")
        if not np.all(np.isfinite(self.dist)):
            raise ValueError("distances must be finite")
        if np.any(self.dist < 0):
            raise ValueError("distances must be nonnegative")
        if np.any(np.abs(np.diag(self.dist)) > 0):
            raise ValueError("diagonal of distance matrix must be zero")
        if not np.array_equal(self.dist, self.dist.T):
            if np.max(np.abs(self.dist - self.dist.T)) > _METRIC_TOL:
                raise ValueError("distance matrix must be symmetric")
        scale = max(self.dist.max(), 1.0)
        if m <= _FULL_TRIANGLE_LIMIT:
            for k in range(m):
                if np.any(self.dist > self.dist[:, k:k + 1] + self.dist[k:k + 1, :]
                          + _METRIC_TOL * scale):
                    raise ValueError("triangle inequality violated")
        else:
            rng = np.random.default_rng(0)
            i, j, k = rng.integers(0, m, size=(3, 200_000))
            if np.any(self.dist[i, j] > self.dist[i, k] + self.dist[k, j]
                      + _METRIC_TOL * scale):
                raise ValueError("triangle inequality violated (sampled triples)")

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        return (isinstance(other, FiniteMetricSpace)
                and self.points == other.points
                and np.array_equal(self.dist, other.dist))

    def __hash__(self):
        return hash((self.points, self.dist.tobytes()))

    def __repr__(self):
        return f"FiniteMetricSpace({len(self.points)} points)"

    def index(self, label) -> int:
        return self.points.index(label)

    @staticmethod
    def trivial(labels=(0, 1)) -> "FiniteMetricSpace":
        """The trivial metric d(x, y) = 1_{x != y} on the given labels."""
        m = len(labels)
        return FiniteMetricSpace(labels, np.ones((m, m)) - np.eye(m))

    @staticmethod
    def from_grid(values) -> "FiniteMetricSpace":
        """Points on the real line with the Euclidean distance."""
        v = np.asarray(values, dtype=float)
        return FiniteMetricSpace(tuple(v.tolist()), np.abs(v[:, None] - v[None, :]))

    def to_json(self) -> dict:
        return {"points": list(self.points), "dist": self.dist.tolist()}

    @staticmethod
    def from_json(doc) -> "FiniteMetricSpace":
        if isinstance(doc, str):
            doc = json.loads(doc)
        return FiniteMetricSpace([_label(p) for p in doc["points"]], doc["dist"])


def _label(p):
    # JSON round-trips lists as labels; make them hashable again
    return tuple(p) if isinstance(p, list) else p


class DiscreteMeasure:
    """Nonnegative weights summing to one on a :class:`FiniteMetricSpace`."""

    SUM_TOL = 1e-12

    def __init__(self, space: FiniteMetricSpace, weights):
        self.space = space
        self.weights = np.asarray(weights, dtype=float)
        self.weights.setflags(write=False)
        if self.weights.shape != (len(space),):
            raise ValueError("weights must match the number of points")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(self.weights.sum() - 1.0) > self.SUM_TOL:
            raise ValueError(f"weights sum to {self.weights.sum()!r}, not 1")

    def __eq__(self, other):
        return (isinstance(other, DiscreteMeasure)
                and self.space == other.space
                and np.array_equal(self.weights, other.weights))

    def __repr__(self):
        return f"DiscreteMeasure({np.array2string(self.weights, precision=4)})"

    @staticmethod
    def dirac(space: FiniteMetricSpace, label) -> "DiscreteMeasure":
        w = np.zeros(len(space))
        w[space.index(label)] = 1.0
        return DiscreteMeasure(space, w)

    @staticmethod
    def uniform(space: FiniteMetricSpace) -> "DiscreteMeasure":
        m = len(space)
        return DiscreteMeasure(space, np.full(m, 1.0 / m))

    def to_json(self) -> dict:
        doc = self.space.to_json()
        doc["weights"] = self.weights.tolist()
        return doc

    @staticmethod
    def from_json(doc, space: FiniteMetricSpace | None = None) -> "DiscreteMeasure":
        if isinstance(doc, str):
            doc = json.loads(doc)
        if space is None:
            space = FiniteMetricSpace.from_json(doc)
        return DiscreteMeasure(space, doc["weights"])


def bernoulli(q: float, space: FiniteMetricSpace | None = None) -> DiscreteMeasure:
    """Measure (1-q, q) on a two-point space (trivial metric by default)."""
    if space is None:
        space = FiniteMetricSpace.trivial()
    if len(space) != 2:
        raise ValueError("bernoulli needs a two-point space")
    return DiscreteMeasure(space, [1.0 - q, q])


@dataclass(frozen=True)
class LipschitzFunction:
    """Real values on the points of a space, with its Lipschitz constant.

    ``lip_const`` is always computed from the values, never trusted.
    """

    space: FiniteMetricSpace
    values: np.ndarray
    lip_const: float = field(init=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.space),):
            raise ValueError("values must match the number of points")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "lip_const", _lip_const(values, self.space.dist))

    def mean(self, mu: DiscreteMeasure) -> float:
        return float(self.values @ mu.weights)


def _lip_const(values: np.ndarray, dist: np.ndarray) -> float:
    off = ~np.eye(len(values), dtype=bool) & (dist > 0)
    if not off.any():
        return 0.0
    gaps = np.abs(values[:, None] - values[None, :])
    return float(np.max(gaps[off] / dist[off]))


def lipschitz_regularize(raw_values, L: float, space: FiniteMetricSpace) -> LipschitzFunction:
    """Project raw values onto the L-Lipschitz ball via the lower envelope
    f(x) = min_y (g(y) + L d(x, y)).

    Idempotent, and the identity on inputs that are already L-Lipschitz.
    """
    if L <= 0:
        raise ValueError("L must be positive")
    raw = np.asarray(raw_values, dtype=float)
    if not np.all(np.isfinite(raw)):
        raise ValueError("raw values must be finite")
    smoothed = np.min(raw[None, :] + L * space.dist, axis=1)
    return LipschitzFunction(space, smoothed)


@dataclass(frozen=True)
class PathGrid:
    """Strictly increasing time grid t_0 = 0 < ... < t_N = T for discrete paths."""

    times: np.ndarray
    dimension: int = 1

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or len(times) < 2:
            raise ValueError("need at least two grid times")
        if times[0] != 0.0:
            raise ValueError("grid must start at 0")
        if np.any(np.diff(times) <= 0):
            raise ValueError("grid times must be strictly increasing")
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @staticmethod
    def uniform(T: float, n_steps: int, dimension: int = 1) -> "PathGrid":
        return PathGrid(np.linspace(0.0, T, n_steps + 1), dimension)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.times)


def _path_array(gamma, grid: PathGrid) -> np.ndarray:
    g = np.asarray(gamma, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    if g.shape != (len(grid.times), grid.dimension):
        raise ValueError(
            f"path shape {np.asarray(gamma).shape} does not match grid "
            f"({len(grid.times)} times, dimension {grid.dimension})")
    return g


def path_distance(gamma1, gamma2, grid: PathGrid, kind: str) -> float:
    """Distance between two discrete paths sharing a grid.

    kind
        ``sup``            max_t |gamma1(t) - gamma2(t)|
        ``l2``             trapezoidal L^2([0, T]) norm of the difference
        ``cameron_martin`` discrete H-norm: sqrt(sum |increment diff|^2 / dt),
                           i.e. the H-norm of the piecewise-linear interpolant.
    """
    g1 = _path_array(gamma1, grid)
    g2 = _path_array(gamma2, grid)
    delta = g1 - g2
    if kind == "sup":
        return float(np.max(np.linalg.norm(delta, axis=1)))
    if kind == "l2":
        w = trapezoid_weights(grid.times)
        return float(np.sqrt(np.sum(w * np.sum(delta**2, axis=1))))
    if kind == "cameron_martin":
        incr = np.diff(delta, axis=0)
        return float(np.sqrt(np.sum(np.sum(incr**2, axis=1) / grid.steps)))
    raise ValueError(f"unknown path distance kind {kind!r}")


def product_space(space: FiniteMetricSpace, n: int, p: float) -> FiniteMetricSpace:
    """n-fold product of a space under the l_p combination of coordinates,
    d(x, y) = (sum_i d(x_i, y_i)^p)^(1/p).

    Points are enumerated lexicographically (first coordinate slowest), so
    index arithmetic in base |space| recovers the coordinates.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 1.0 <= p <= 2.0:
        raise ValueError("p must lie in [1, 2]")
    m = len(space)
    if m**n > MAX_POINTS:
        raise CapacityError(f"{m}^{n} product points exceed cap {MAX_POINTS}")
    if (m**n) ** 2 > 2 * 10**7:
        raise CapacityError(
            f"dense {m**n} x {m**n} distance matrix exceeds the in-memory cap")
    if n == 1:
        return space
    points = tuple(itertools.product(space.points, repeat=n))
    # index -> coordinate table, lexicographic
    idx = np.arange(m**n)
    coords = np.empty((m**n, n), dtype=np.int64)
    for pos in range(n - 1, -1, -1):
        coords[:, pos] = idx % m
        idx = idx // m
    dp = space.dist**p
    acc = np.zeros((m**n, m**n))
    for pos in range(n):
        acc += dp[np.ix_(coords[:, pos], coords[:, pos])]
    return FiniteMetricSpace(points, acc ** (1.0 / p))
