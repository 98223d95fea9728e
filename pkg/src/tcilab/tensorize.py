"""Dependent tensorization on finite spaces: entropy chain rule, backward and
forward contraction coefficients, the constructive step-by-step optimal
coupling, weight vectors, and the tensorized constants.

A sequential model is a time-indexed family of conditional kernels
P_i(. | x^{i-1}) on a finite base space; Markov models store one kernel row
matrix plus a start distribution.  All couplings and coefficients are exact:
every conditional Wasserstein distance is a small LP.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ContractionError
from .spaces import DiscreteMeasure, FiniteMetricSpace, product_space
from .transport import kl_divergence, wasserstein_exact

_HISTORY_SCAN_LIMIT = 10**4
_JOINT_CAP = 10**6
_COUPLING_CAP = 10**6
_FUTURE_CAP = 1000

ROW_SUM_TOL = 1e-12


class SequentialModel:
    """Conditional kernels P_i(. | x^{i-1}), i = 1..n, on a finite base space.

    ``step_rows(i)`` returns the (m^i, m) array whose h-th row is the law of
    x_{i+1} given the history with lexicographic index h (first coordinate
    slowest, so h % m is the most recent state).  The i = 0 rows ignore the
    (empty) history.
    """

    def __init__(self, base: FiniteMetricSpace, steps: list[np.ndarray]):
        self.base = base
        self.n = len(steps)
        m = len(base)
        if self.n < 1:
            raise ValueError("need at least one step")
        self._steps = []
        for i, rows in enumerate(steps):
            rows = np.asarray(rows, dtype=float)
            if rows.shape != (m**i, m):
                raise ValueError(f"step {i} rows must have shape ({m**i}, {m})")
            _check_rows(rows)
            rows.setflags(write=False)
            self._steps.append(rows)
        self.is_markov = False
        self.kernel = None
        self.start = None

    @classmethod
    def markov(cls, base: FiniteMetricSpace, start, kernel, n: int) -> "SequentialModel":
        """Homogeneous chain: x_1 ~ start, then x_{i+1} ~ kernel[x_i]."""
        m = len(base)
        start = np.asarray(start, dtype=float).reshape(1, m)
        kernel = np.asarray(kernel, dtype=float)
        if kernel.shape != (m, m):
            raise ValueError(f"kernel must be ({m}, {m})")
        _check_rows(start)
        _check_rows(kernel)
        model = cls.__new__(cls)
        model.base = base
        model.n = int(n)
        if model.n < 1:
            raise ValueError("need at least one step")
        model._steps = None
        model.is_markov = True
        model.kernel = kernel.copy()
        model.kernel.setflags(write=False)
        model.start = start[0].copy()
        model.start.setflags(write=False)
        return model

    def step_rows(self, i: int) -> np.ndarray:
        if not self.is_markov:
            return self._steps[i]
        m = len(self.base)
        if i == 0:
            return self.start.reshape(1, m)
        if m**i > _JOINT_CAP:
            raise CapacityError(f"{m}^{i} histories exceed cap {_JOINT_CAP}")
        return self.kernel[np.arange(m**i) % m]

    def to_json(self) -> dict:
        doc = {"base": self.base.to_json(), "horizon": self.n}
        if self.is_markov:
            doc["markov"] = {"start": self.start.tolist(), "kernel": self.kernel.tolist()}
        else:
            doc["steps"] = [s.tolist() for s in self._steps]
        return doc

    @staticmethod
    def from_json(doc) -> "SequentialModel":
        if isinstance(doc, str):
            doc = json.loads(doc)
        base = FiniteMetricSpace.from_json(doc["base"])
        if "markov" in doc:
            return SequentialModel.markov(base, doc["markov"]["start"],
                                          doc["markov"]["kernel"], doc["horizon"])
        return SequentialModel(base, [np.asarray(s) for s in doc["steps"]])


def _check_rows(rows: np.ndarray):
    if np.any(rows < 0):
        raise ValueError("kernel rows must be nonnegative")
    dev = np.max(np.abs(rows.sum(axis=1) - 1.0))
    if dev > ROW_SUM_TOL:
        raise ValueError(f"kernel row sums deviate from 1 by {dev:g}")


@dataclass(frozen=True)
class ContractionProfile:
    """Backward coefficients a_1..a_{n-1} with r^p = sum a_j^p, and the
    forward coefficient S when computed.  ``sampled`` marks coefficients
    obtained from a sampled (rather than exhaustive) history scan, in which
    case they are lower bounds."""

    p: float
    a: np.ndarray
    r: float
    S: float | None = None
    sampled: bool = False


class _RowCouplingCache:
    """Memoize exact couplings between kernel rows (they repeat a lot)."""

    def __init__(self, space: FiniteMetricSpace, p: float):
        self.space = space
        self.p = p
        self._cache = {}

    def distance_and_plan(self, row_a: np.ndarray, row_b: np.ndarray):
        key = (row_a.tobytes(), row_b.tobytes())
        hit = self._cache.get(key)
        if hit is None:
            mu = DiscreteMeasure(self.space, row_a)
            nu = DiscreteMeasure(self.space, row_b)
            value, plan = wasserstein_exact(mu, nu, self.space, self.p)
            hit = (value, plan.matrix)
            self._cache[key] = hit
        return hit

    def distance(self, row_a: np.ndarray, row_b: np.ndarray) -> float:
        return self.distance_and_plan(row_a, row_b)[0]


def joint_law(model: SequentialModel, p: float = 1.0) -> DiscreteMeasure:
    """The explicit law of (x_1, ..., x_n) on the product space (l_p metric)."""
    m = len(model.base)
    if m**model.n > _JOINT_CAP:
        raise CapacityError(f"{m}^{model.n} joint states exceed cap {_JOINT_CAP}")
    w = np.ones(1)
    for i in range(model.n):
        w = (w[:, None] * model.step_rows(i)).ravel()
    return DiscreteMeasure(product_space(model.base, model.n, p), w)


def joint_weights(model: SequentialModel) -> np.ndarray:
    """Joint law as a bare weight vector (no product-space construction)."""
    w = np.ones(1)
    for i in range(model.n):
        w = (w[:, None] * model.step_rows(i)).ravel()
    return w


def entropy_chain_rule(Q: SequentialModel, P: SequentialModel):
    """Decompose H(joint(Q)/joint(P)) as sum_i E_Q KL(Q_i(.|X^{i-1}) || P_i(.|X^{i-1})).

    Returns ``(per_step, total)``.  The total is an exact identity with the
    joint relative entropy; conditional absolute-continuity failure on a
    Q-charged history makes the affected step (and the total) +inf.
    """
    if Q.base != P.base or Q.n != P.n:
        raise ValueError("models must share base space and horizon")
    hist_w = np.ones(1)
    per_step = []
    for i in range(Q.n):
        q_rows = Q.step_rows(i)
        p_rows = P.step_rows(i)
        step_val = 0.0
        for h in np.nonzero(hist_w > 0)[0]:
            kl = kl_divergence(q_rows[h], p_rows[h])
            if math.isinf(kl):
                step_val = math.inf
                break
            step_val += hist_w[h] * kl
        per_step.append(step_val)
        hist_w = (hist_w[:, None] * q_rows).ravel()
    total = math.inf if any(math.isinf(s) for s in per_step) else float(sum(per_step))
    return per_step, total


def backward_coefficients(P: SequentialModel, p: float = 1.0) -> ContractionProfile:
    """Coefficients a_j with [W_p(P_i(.|x), P_i(.|x~))]^p <= sum_j a_j^p d(x_{i-j}, x~_{i-j})^p
    over history pairs differing in a single coordinate.

    Exact for Markov models (only a_1 is nonzero: the kernel's W_p-Lipschitz
    constant).  General models are scanned over all single-coordinate history
    pairs while m^{i-1} <= 10^4, and sampled above that (the result is then a
    lower bound, flagged via ``sampled``).
    """
    m = len(P.base)
    dist = P.base.dist
    cache = _RowCouplingCache(P.base, p)
    n = P.n
    a_p = np.zeros(max(n - 1, 0))
    sampled = False

    if P.is_markov:
        if n >= 2:
            best = 0.0
            for x in range(m):
                for y in range(x + 1, m):
                    if dist[x, y] == 0:
                        continue
                    w = cache.distance(P.kernel[x], P.kernel[y])
                    best = max(best, w**p / dist[x, y] ** p)
            a_p[0] = best
    else:
        rng = np.random.default_rng(0)
        for i in range(2, n + 1):         # step i has history length i-1
            rows = P.step_rows(i - 1)
            hist_len = i - 1
            n_hist = m**hist_len
            for j in range(1, i):         # coordinate i-j of the history moves
                pos = hist_len - j        # 0-based position in the history
                others = n_hist // m
                if n_hist <= _HISTORY_SCAN_LIMIT:
                    other_indices = range(others)
                else:
                    sampled = True
                    other_indices = rng.integers(0, others, size=200)
                stride = m ** (hist_len - 1 - pos)
                for flat in other_indices:
                    # rebuild the history index with a hole at `pos`
                    low = flat % stride
                    high = flat // stride
                    base_idx = high * stride * m + low
                    for x in range(m):
                        for y in range(x + 1, m):
                            if dist[x, y] == 0:
                                continue
                            hx = base_idx + x * stride
                            hy = base_idx + y * stride
                            w = cache.distance(rows[hx], rows[hy])
                            a_p[j - 1] = max(a_p[j - 1], w**p / dist[x, y] ** p)

    r = float(np.sum(a_p) ** (1.0 / p))
    return ContractionProfile(p=p, a=a_p ** (1.0 / p), r=r, sampled=sampled)


def _future_weights(model: SequentialModel, k: int, hist_idx: int) -> np.ndarray:
    """Law of (x_{k+1}, ..., x_n) given the length-k history with index hist_idx."""
    m = len(model.base)
    w = np.ones(1)
    prefix = hist_idx
    for i in range(k, model.n):
        rows = model.step_rows(i)
        n_new = w.size
        # history index of each partial future, prefixed by hist_idx
        hist_indices = prefix * n_new + np.arange(n_new)
        w = (w[:, None] * rows[hist_indices]).ravel()
    return w


def forward_coefficient(P: SequentialModel) -> float:
    """Smallest verified S with W_1^{l_1}(future | x_k = x, future | x_k = y) <= S d(x, y),
    maximized over the step k, the earlier history, and the pair (x, y).

    The future laws live on the (n-k)-fold product with the l_1 metric and
    the distance is an exact LP, so this is only feasible at desk scale
    (|base|^{n-k} <= 1000 per step).
    """
    m = len(P.base)
    dist = P.base.dist
    n = P.n
    best = 0.0
    for k in range(1, n):
        future_len = n - k
        if m**future_len > _FUTURE_CAP:
            raise CapacityError(
                f"future space {m}^{future_len} exceeds cap {_FUTURE_CAP}")
        fut_space = product_space(P.base, future_len, 1.0) if future_len > 1 else P.base
        cache = _RowCouplingCache(fut_space, 1.0)
        if P.is_markov:
            prefixes = [0]     # homogeneous chain: the future only sees x_k
        else:
            n_prefix = m ** (k - 1)
            if n_prefix > _HISTORY_SCAN_LIMIT:
                raise CapacityError(f"{n_prefix} histories exceed the scan limit")
            prefixes = range(n_prefix)
        for prefix in prefixes:
            futures = {}
            for x in range(m):
                futures[x] = _future_weights(P, k, prefix * m + x)
            for x in range(m):
                for y in range(x + 1, m):
                    if dist[x, y] == 0:
                        continue
                    w1 = cache.distance(futures[x], futures[y])
                    best = max(best, w1 / dist[x, y])
    return best


def marton_coupling(P: SequentialModel, Q: SequentialModel, p: float = 1.0):
    """Step-by-step optimal conditional coupling of joint(Q) and joint(P).

    At step i, conditionally on the pair of histories, (X~_i, X_i) receives
    the exact optimal W_p-coupling of Q_i(.|x~^{i-1}) and P_i(.|x^{i-1})
    (exact optimal couplings exist on finite spaces, so the construction
    needs no epsilon slack).  Returns ``(coupling, cost)`` where coupling is
    the (m^n, m^n) joint matrix with rows indexed by Q-sequences, and
    cost = (E sum_i d(X~_i, X_i)^p)^{1/p} >= W_p(joint(Q), joint(P)).
    """
    if Q.base != P.base or Q.n != P.n:
        raise ValueError("models must share base space and horizon")
    m = len(P.base)
    n = P.n
    if m ** (2 * n) > _COUPLING_CAP:
        raise CapacityError(f"coupling with {m**(2*n)} entries exceeds cap")
    dist_p = P.base.dist**p
    cache = _RowCouplingCache(P.base, p)

    coupling = np.ones((1, 1))
    cost_p = 0.0
    for i in range(n):
        q_rows = Q.step_rows(i)
        p_rows = P.step_rows(i)
        size = coupling.shape[0]
        new = np.zeros((size * m, size * m))
        for hq, hp in zip(*np.nonzero(coupling > 0)):
            mass = coupling[hq, hp]
            _, pi = cache.distance_and_plan(q_rows[hq], p_rows[hp])
            new[hq * m:(hq + 1) * m, hp * m:(hp + 1) * m] = mass * pi
            cost_p += mass * float(np.sum(pi * dist_p))
        coupling = new
    return coupling, cost_p ** (1.0 / p)


def tensorized_constant(C: float, r: float, n: int, p: float = 1.0) -> float:
    """The factor (1/(1-r)) sqrt(2 C n^{2/p-1}) multiplying sqrt(H) in the
    tensorized transport bound; dimension-free at p = 2."""
    if not 0.0 <= r:
        raise ValueError("r must be nonnegative")
    if r >= 1.0:
        raise ContractionError(f"contraction requires r < 1, got {r}")
    return math.sqrt(2.0 * C * n ** (2.0 / p - 1.0)) / (1.0 - r)


def weight_vector(a, n: int, delta: float) -> np.ndarray:
    """Positive weights z summing to 1 with (zA)_k = sum_{i>k} z_i a_{i-k} <= delta z_k.

    Built by the backward recursion z_n = 1, z_k = max(floor, (1/delta) sum_{i>k}
    z_i a_{i-k}), then normalized.  When the constraint sum vanishes entirely
    the previous weight is carried instead of the floor, so an all-zero
    coefficient vector yields the uniform z; a 1e-12 inflation keeps the
    inequality valid after normalization rounding.  Always feasible: the
    coefficient matrix is nilpotent lower triangular.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise ValueError("coefficients must be nonnegative")
    if a.size < n - 1:
        a = np.concatenate([a, np.zeros(n - 1 - a.size)])
    floor = 1e-9
    zt = np.zeros(n)
    zt[n - 1] = 1.0
    for k in range(n - 2, -1, -1):
        s = float(np.dot(zt[k + 1:], a[:n - 1 - k]))
        zt[k] = zt[k + 1] if s == 0.0 else max(floor, (s / delta) * (1.0 + 1e-12))
    return zt / zt.sum()


def default_weight_delta(r: float) -> float:
    """Fallback delta for weight vectors: max(r, 1/2), kept strictly below 1."""
    return min(max(r, 0.5), 0.99)


@dataclass(frozen=True)
class InvariantResult:
    mu: DiscreteMeasure
    r: float
    C_infty: float
    iterations: int


def invariant_fixed_point(kernel, space: FiniteMetricSpace, C: float,
                          tol: float = 1e-12, max_iter: int = 10**5) -> InvariantResult:
    """Unique invariant measure of a W_1-contracting Markov kernel, by fixed
    point iteration of nu -> nu P until W_1(nu P, nu) < tol.

    Requires the one-step contraction W_1(P(x,.), P(x~,.)) <= r d(x, x~) with
    r < 1; given a per-step constant C, the invariant measure inherits the
    constant C_infty = C / (1 - r^2).
    """
    kernel = np.asarray(kernel, dtype=float)
    _check_rows(kernel)
    model = SequentialModel.markov(space, np.full(len(space), 1.0 / len(space)), kernel, 2)
    r = float(backward_coefficients(model, p=1.0).a[0])
    if r >= 1.0:
        raise ContractionError(f"kernel is not W_1-contracting: r = {r}")

    nu = np.full(len(space), 1.0 / len(space))
    for it in range(max_iter):
        nxt = nu @ kernel
        nxt = nxt / nxt.sum()
        gap, _ = wasserstein_exact(DiscreteMeasure(space, nxt),
                                   DiscreteMeasure(space, nu), space, 1.0)
        # the sup-norm criterion is exact in floats; the LP alone can
        # under-report gaps near its own feasibility tolerance
        moved = float(np.max(np.abs(nxt - nu)))
        nu = nxt
        if gap < tol and moved < tol:
            return InvariantResult(mu=DiscreteMeasure(space, nu), r=r,
                                   C_infty=C / (1.0 - r**2), iterations=it + 1)
    raise ArithmeticError(f"fixed point iteration did not reach {tol} in {max_iter} steps")


def martingale_constant(C: float, S: float, n: int) -> float:
    """Constant n C (1 + S)^2 produced by the martingale-difference route."""
    if C <= 0 or S < 0 or n < 1:
        raise ValueError("need C > 0, S >= 0, n >= 1")
    return n * C * (1.0 + S) ** 2


def dependent_hoeffding_bound(C: float, r: float, n: int, alpha: float, t: float) -> float:
    """Tail bound exp(-t^2 (1-r)^2 / (2 n C alpha^2)) for coordinate-Lipschitz
    functions of a contracting sequence."""
    if r >= 1.0:
        raise ContractionError(f"contraction requires r < 1, got {r}")
    if t < 0:
        raise ValueError("t must be nonnegative")
    return math.exp(-(t**2) * (1.0 - r) ** 2 / (2.0 * n * C * alpha**2))
