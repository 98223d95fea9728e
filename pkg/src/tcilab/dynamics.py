"""Random dynamical systems and diffusions: iterated random maps, the
Euler-Maruyama scheme, synchronous-coupling decay, and the empirical
tail-versus-bound harness.

Reproducibility contract: every Monte Carlo path draws from its own stream
derived from (seed, path index), so ensembles are bit-identical across runs,
chunk sizes and worker counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, ContractionError, DivergenceError, SimulationBlowupError
from .tci import heavy_tail_divergent
from .tensorize import dependent_hoeffding_bound

_CHUNK = 10_000


def path_stream(seed: int, index: int) -> np.random.Generator:
    """The RNG stream owned by path `index` of an ensemble seeded by `seed`."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _chunks(n: int, size: int = _CHUNK):
    for lo in range(0, n, size):
        yield lo, min(lo + size, n)


# ---------------------------------------------------------------------------
# iterated random maps


@dataclass
class RandomMapSystem:
    """State recursion X_{n+1} = F(X_n, W_{n+1}) driven by i.i.d. noise.

    ``map_fn(x, w)`` must be vectorized over a batch axis: x is (batch, dim),
    w is (batch, noise_dim).  ``noise_fn(rng, size)`` draws (size, noise_dim)
    noise variates.
    """

    dim: int
    noise_dim: int
    map_fn: object
    noise_fn: object
    matrix: np.ndarray | None = None

    def __post_init__(self):
        probe = self.map_fn(np.zeros((2, self.dim)),
                            np.zeros((2, self.noise_dim)))
        probe = np.asarray(probe)
        if probe.shape != (2, self.dim) or not np.all(np.isfinite(probe)):
            raise ValueError("map_fn must return finite (batch, dim) states")

    @staticmethod
    def linear(A, noise_cov=None) -> "RandomMapSystem":
        """ARMA-type recursion X_{n+1} = A X_n + W with Gaussian noise."""
        A = np.asarray(A, dtype=float)
        d = A.shape[0]
        if noise_cov is None:
            chol = np.eye(d)
        else:
            chol = np.linalg.cholesky(np.asarray(noise_cov, dtype=float))
        return RandomMapSystem(
            dim=d, noise_dim=d,
            map_fn=lambda x, w: x @ A.T + w,
            noise_fn=lambda rng, size: rng.standard_normal((size, d)) @ chol.T,
            matrix=A,
        )


def norm_vs_spectral_radius(A) -> tuple[float, float]:
    """Operator norm (largest singular value) and spectral radius of a matrix.

    The spread between the two is exactly what separates one-step contraction
    from eventual contraction for linear systems.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("need a square matrix")
    op_norm = float(np.linalg.svd(A, compute_uv=False)[0])
    spectral_radius = float(np.max(np.abs(np.linalg.eigvals(A))))
    return op_norm, spectral_radius


@dataclass(frozen=True)
class NoiseTailPoint:
    x: np.ndarray
    mean: float
    stderr: float
    max_share: float
    divergent: bool


@dataclass(frozen=True)
class NoiseTailResult:
    per_x: list[NoiseTailPoint]
    sup_estimate: float      # inf when any grid point is divergent
    divergent: bool


def noise_tail_condition(sys: RandomMapSystem, delta: float, x_grid, n_mc: int,
                         seed: int) -> NoiseTailResult:
    """Monte Carlo estimate of sup_x E exp(delta |F(x, W) - F(x, W')|^2).

    Divergence at a grid point is declared when the running mean is
    non-finite or exceeds the overflow guard, or when the empirical tail
    index of the integrand drops below the integrability boundary
    (`tci.heavy_tail_divergent`): the signature of an infinite mean.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    points = [np.atleast_1d(np.asarray(x, dtype=float)) for x in x_grid]
    per_x = []
    for ix, x in enumerate(points):
        rng = path_stream(seed, ix)
        vals = np.empty(n_mc)
        count = 0
        overflowed = False
        while count < n_mc:
            size = min(_CHUNK, n_mc - count)
            w1 = sys.noise_fn(rng, size)
            w2 = sys.noise_fn(rng, size)
            xs = np.broadcast_to(x, (size, sys.dim))
            gap = sys.map_fn(xs, w1) - sys.map_fn(xs, w2)
            chunk = np.exp(delta * np.sum(np.asarray(gap) ** 2, axis=1))
            vals[count:count + size] = chunk
            count += size
            if not np.all(np.isfinite(chunk)):
                overflowed = True
                break
        vals = vals[:count]
        divergent = overflowed or heavy_tail_divergent(vals)
        finite = vals[np.isfinite(vals)]
        mean = float(finite.mean()) if finite.size else math.inf
        share = float(finite.max() / finite.sum()) if finite.size else 1.0
        per_x.append(NoiseTailPoint(
            x=x, mean=math.inf if divergent else mean,
            stderr=float(np.std(finite, ddof=1) / math.sqrt(finite.size))
            if finite.size > 1 else math.inf,
            max_share=share, divergent=divergent))
    divergent = any(pt.divergent for pt in per_x)
    sup_estimate = math.inf if divergent else max(pt.mean for pt in per_x)
    return NoiseTailResult(per_x=per_x, sup_estimate=sup_estimate, divergent=divergent)


@dataclass(frozen=True)
class ContractionEstimate:
    r_hat: float
    s_hat: float
    tail_truncated: bool   # last summand still above 1e-6 * s_hat


def l1_contraction_estimate(sys: RandomMapSystem, pairs, horizon: int, n_mc: int,
                            seed: int) -> ContractionEstimate:
    """Estimate the one-step L^1 contraction factor r and the summed
    sensitivity S = sum_n E d(X_n(x), X_n(x~)) / d(x, x~) under shared noise.

    ``pairs`` is a list of (x, x~) initial pairs; both statistics are maxima
    over the pairs.  The sum is truncated at `horizon`; a flag reports
    whether the final term was still non-negligible.
    """
    r_hat = 0.0
    s_hat = 0.0
    tail_truncated = False
    for ip, (x, xt) in enumerate(pairs):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        xt = np.atleast_1d(np.asarray(xt, dtype=float))
        d0 = float(np.linalg.norm(x - xt))
        if d0 == 0:
            raise ValueError("initial pairs must be distinct")
        rng = path_stream(seed, ip)
        cur = np.broadcast_to(x, (n_mc, sys.dim)).copy()
        cur_t = np.broadcast_to(xt, (n_mc, sys.dim)).copy()
        ratios = []
        for _ in range(horizon):
            w = sys.noise_fn(rng, n_mc)
            cur = np.asarray(sys.map_fn(cur, w))
            cur_t = np.asarray(sys.map_fn(cur_t, w))
            ratios.append(float(np.mean(np.linalg.norm(cur - cur_t, axis=1))) / d0)
        r_hat = max(r_hat, ratios[0])
        s_pair = float(np.sum(ratios))
        s_hat = max(s_hat, s_pair)
        if s_pair > 0 and ratios[-1] > 1e-6 * s_pair:
            tail_truncated = True
    return ContractionEstimate(r_hat=r_hat, s_hat=s_hat, tail_truncated=tail_truncated)


def discrete_sde_t2_constant(C: float, K: float, r: float) -> float:
    """Quadratic transport constant C K^2 / (1-r)^2 for the contracting
    discrete-time SDE X_{n+1} = f(X_n) + sigma(X_n) W_{n+1}."""
    if r >= 1.0:
        raise ContractionError(f"contraction requires r < 1, got {r}")
    return C * K**2 / (1.0 - r) ** 2


def ar1_path_covariance(a: float, n: int, noise_std: float = 1.0) -> np.ndarray:
    """Covariance of (X_1, ..., X_n) for X_{k+1} = a X_k + W, X_0 fixed."""
    idx = np.arange(1, n + 1)
    lo = np.minimum(idx[:, None], idx[None, :])
    gap = np.abs(idx[:, None] - idx[None, :])
    if a == 0.0:
        return noise_std**2 * np.eye(n)
    return noise_std**2 * a**gap * (1.0 - a ** (2 * lo)) / (1.0 - a**2)


@dataclass(frozen=True)
class QuadraticFunctional:
    """F(x) = const + <c, x> + x^T M x / 2 on (R^d)^n flattened to R^{dn}."""

    const: float = 0.0
    linear: np.ndarray | None = None
    quad: np.ndarray | None = None

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float).ravel()
        out = self.const
        if self.linear is not None:
            out += float(np.dot(self.linear, x))
        if self.quad is not None:
            out += 0.5 * float(x @ self.quad @ x)
        return out


def inf_convolution(form: QuadraticFunctional, x) -> float:
    """Closed-form quadratic inf-convolution QF(x) = inf_y (F(x+y) + |y|^2 / 2).

    With gradient g = c + M x at x, the infimum is
    F(x) - g^T (I + M)^{-1} g / 2; the linear case reduces to F(x) - |c|^2/2.
    Requires I + M positive definite, otherwise the infimum is -inf.
    """
    x = np.asarray(x, dtype=float).ravel()
    dim = x.size
    g = np.zeros(dim)
    if form.linear is not None:
        g = g + np.asarray(form.linear, dtype=float)
    if form.quad is None:
        return form.value(x) - 0.5 * float(np.dot(g, g))
    M = np.asarray(form.quad, dtype=float)
    g = g + M @ x
    try:
        chol = np.linalg.cholesky(np.eye(dim) + M)
    except np.linalg.LinAlgError:
        raise ValueError("quadratic part must satisfy M > -I (infimum finite)")
    half = np.linalg.solve(chol, g)
    return form.value(x) - 0.5 * float(np.dot(half, half))


# ---------------------------------------------------------------------------
# diffusions


@dataclass
class SdeSpec:
    """Drift b, diffusion sigma and their declared structural constants.

    ``drift(x)`` is vectorized over (batch, dim); ``sigma`` is either a
    constant (dim, noise_dim) matrix or a callable x -> (batch, dim,
    noise_dim).  Declared constants are spot-checked on sampled point pairs
    at construction: the one-sided drift bound B, the dissipativity constant
    delta, and the Hilbert-Schmidt bound A_hs; misdeclared specs fail fast.
    """

    dim: int
    noise_dim: int
    drift: object
    sigma: object
    A_hs: float | None = None
    B: float | None = None
    K: float | None = None
    sigma_inf: float | None = None
    delta: float | None = None
    _check_pairs: int = field(default=200, repr=False)

    def __post_init__(self):
        rng = np.random.default_rng(12345)
        x = 3.0 * rng.standard_normal((self._check_pairs, self.dim))
        y = 3.0 * rng.standard_normal((self._check_pairs, self.dim))
        bx, by = self.drift_at(x), self.drift_at(y)
        sx, sy = self.sigma_at(x), self.sigma_at(y)
        gap = y - x
        gap_sq = np.sum(gap**2, axis=1)
        inner = np.sum(gap * (by - bx), axis=1)
        tol = 1e-9
        if self.B is not None:
            # B >= 0 is the one-sided bound with the (1 + |y-x|^2) offset;
            # B < 0 asserts the stronger symmetric-gradient form B |y-x|^2
            cap = self.B * (1.0 + gap_sq) if self.B >= 0 else self.B * gap_sq
            if np.any(inner > cap + tol):
                raise ValueError("declared one-sided drift bound B fails on samples")
        if self.delta is not None:
            hs_sq = np.sum((sx - sy) ** 2, axis=(1, 2))
            if np.any(0.5 * hs_sq + inner > -self.delta * gap_sq + tol):
                raise ValueError("declared dissipativity constant delta fails on samples")
        if self.A_hs is not None:
            if np.any(np.sqrt(np.sum(sx**2, axis=(1, 2))) > self.A_hs + tol):
                raise ValueError("declared Hilbert-Schmidt bound A_hs fails on samples")

    def drift_at(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.drift(x), dtype=float)

    def sigma_at(self, x: np.ndarray) -> np.ndarray:
        if callable(self.sigma):
            return np.asarray(self.sigma(x), dtype=float)
        s = np.asarray(self.sigma, dtype=float)
        return np.broadcast_to(s, (x.shape[0],) + s.shape)

    @staticmethod
    def ornstein_uhlenbeck(theta: float = 0.5, sigma: float = 1.0, dim: int = 1) -> "SdeSpec":
        """dX = -theta X dt + sigma dB; dissipative with delta = theta."""
        if theta <= 0 or sigma <= 0:
            raise ValueError("theta and sigma must be positive")
        return SdeSpec(
            dim=dim, noise_dim=dim,
            drift=lambda x: -theta * x,
            sigma=sigma * np.eye(dim),
            A_hs=sigma * math.sqrt(dim), B=-theta, K=theta,
            sigma_inf=sigma, delta=theta,
        )

    @staticmethod
    def linear_drift(A, sigma: float = 1.0) -> "SdeSpec":
        """dX = A X dt + sigma dB with constant scalar diffusion."""
        A = np.asarray(A, dtype=float)
        d = A.shape[0]
        sym_max = float(np.max(np.linalg.eigvalsh(0.5 * (A + A.T))))
        return SdeSpec(
            dim=d, noise_dim=d,
            drift=lambda x: x @ A.T,
            sigma=sigma * np.eye(d),
            A_hs=sigma * math.sqrt(d), B=sym_max,
            K=float(np.linalg.svd(A, compute_uv=False)[0]),
            sigma_inf=sigma, delta=-sym_max if sym_max < 0 else None,
        )


@dataclass(frozen=True)
class SimConfig:
    dt: float
    horizon: float
    n_paths: int
    seed: int
    shared_noise: bool = False

    def __post_init__(self):
        if self.dt <= 0 or self.horizon <= 0 or self.dt >= self.horizon:
            raise ValueError("need 0 < dt < horizon")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)


@dataclass(frozen=True)
class PathEnsemble:
    times: np.ndarray
    paths: np.ndarray    # (n_paths, n_steps + 1, dim)


def _noise_block(seed: int, indices, n_steps: int, noise_dim: int) -> np.ndarray:
    block = np.empty((len(indices), n_steps, noise_dim))
    for row, idx in enumerate(indices):
        block[row] = path_stream(seed, idx).standard_normal((n_steps, noise_dim))
    return block


def _advance(sde: SdeSpec, x: np.ndarray, xi: np.ndarray, dt: float) -> np.ndarray:
    drift = sde.drift_at(x)
    diff = np.einsum("bij,bj->bi", sde.sigma_at(x), xi)
    return x + drift * dt + diff * math.sqrt(dt)


def _check_stability(sde: SdeSpec, cfg: SimConfig):
    if sde.K is not None and cfg.dt * sde.K >= 0.5:
        raise ValueError(f"dt * K = {cfg.dt * sde.K:g} >= 0.5: step too coarse")


def euler_maruyama(sde: SdeSpec, x0, cfg: SimConfig) -> PathEnsemble:
    """Simulate X_{k+1} = X_k + b(X_k) dt + sigma(X_k) sqrt(dt) xi_k.

    Path i draws its noise from the stream keyed by (cfg.seed, i), so two
    runs with the same config (and, under shared_noise, runs from different
    starting points) see identical noise.  Non-finite states abort with the
    offending step index.
    """
    _check_stability(sde, cfg)
    n_steps = cfg.n_steps
    total = cfg.n_paths * (n_steps + 1) * sde.dim
    if total > 2 * 10**8:
        raise CapacityError("ensemble too large to store; stream it instead")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    paths = np.empty((cfg.n_paths, n_steps + 1, sde.dim))
    for lo, hi in _chunks(cfg.n_paths):
        noise = _noise_block(cfg.seed, range(lo, hi), n_steps, sde.noise_dim)
        x = np.broadcast_to(x0, (hi - lo, sde.dim)).copy()
        paths[lo:hi, 0] = x
        for k in range(n_steps):
            x = _advance(sde, x, noise[:, k], cfg.dt)
            if not np.all(np.isfinite(x)):
                raise SimulationBlowupError(k + 1)
            paths[lo:hi, k + 1] = x
    return PathEnsemble(times=cfg.times, paths=paths)


@dataclass(frozen=True)
class CouplingDecayResult:
    times: np.ndarray
    curve: np.ndarray       # E |X_t(x) - X_t(x~)|^2, Monte Carlo
    stderr: np.ndarray
    bound: np.ndarray       # |x - x~|^2 e^{-2 delta t}
    allowance: float        # multiplicative discretization slack on the bound
    passed: bool


def coupling_decay(sde: SdeSpec, x, x_tilde, cfg: SimConfig) -> CouplingDecayResult:
    """Squared synchronous-coupling gap against the dissipativity bound
    |x - x~|^2 exp(-2 delta t).

    The verdict allows a multiplicative 3 K dt discretization slack plus
    three Monte Carlo standard errors at every grid time.
    """
    if sde.delta is None or sde.delta <= 0:
        raise ValueError("coupling decay needs a positive dissipativity constant")
    if not cfg.shared_noise:
        raise ValueError("synchronous coupling requires shared_noise=True")
    _check_stability(sde, cfg)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xt = np.atleast_1d(np.asarray(x_tilde, dtype=float))
    n_steps = cfg.n_steps
    acc = np.zeros(n_steps + 1)
    acc_sq = np.zeros(n_steps + 1)
    for lo, hi in _chunks(cfg.n_paths):
        noise = _noise_block(cfg.seed, range(lo, hi), n_steps, sde.noise_dim)
        cur = np.broadcast_to(x, (hi - lo, sde.dim)).copy()
        cur_t = np.broadcast_to(xt, (hi - lo, sde.dim)).copy()
        gap = np.sum((cur - cur_t) ** 2, axis=1)
        acc[0] += gap.sum()
        acc_sq[0] += (gap**2).sum()
        for k in range(n_steps):
            cur = _advance(sde, cur, noise[:, k], cfg.dt)
            cur_t = _advance(sde, cur_t, noise[:, k], cfg.dt)
            if not (np.all(np.isfinite(cur)) and np.all(np.isfinite(cur_t))):
                raise SimulationBlowupError(k + 1)
            gap = np.sum((cur - cur_t) ** 2, axis=1)
            acc[k + 1] += gap.sum()
            acc_sq[k + 1] += (gap**2).sum()
    n = cfg.n_paths
    curve = acc / n
    var = np.maximum(acc_sq / n - curve**2, 0.0)
    stderr = np.sqrt(var / n)
    times = cfg.times
    bound = float(np.sum((x - xt) ** 2)) * np.exp(-2.0 * sde.delta * times)
    allowance = 3.0 * cfg.dt * (sde.K if sde.K is not None else 0.0)
    passed = bool(np.all(curve <= bound * (1.0 + allowance) + 3.0 * stderr))
    return CouplingDecayResult(times=times, curve=curve, stderr=stderr,
                               bound=bound, allowance=allowance, passed=passed)


# ---------------------------------------------------------------------------
# empirical tails against analytic bounds


@dataclass
class MarkovChainSampler:
    """Finite-state chain sampled path-by-path for the tail harness."""

    start: np.ndarray
    kernel: np.ndarray
    n_steps: int

    def sample(self, seed: int, indices) -> np.ndarray:
        start_cum = np.cumsum(self.start)
        kern_cum = np.cumsum(self.kernel, axis=1)
        u = np.empty((len(indices), self.n_steps))
        for row, idx in enumerate(indices):
            u[row] = path_stream(seed, idx).random(self.n_steps)
        m = len(self.start)
        states = np.empty((len(indices), self.n_steps), dtype=np.int64)
        s = np.minimum(np.sum(u[:, 0, None] > start_cum[None, :], axis=1), m - 1)
        states[:, 0] = s
        for k in range(1, self.n_steps):
            s = np.minimum(np.sum(u[:, k, None] > kern_cum[s], axis=1), m - 1)
            states[:, k] = s
        return states


@dataclass(frozen=True)
class BoundSpec:
    """Names the analytic tail bound to compare against and its constants.

    kinds
        ``dependent_hoeffding``     exp(-r^2 (1-rc)^2 / (2 n C alpha^2))
        ``sde_time_average``        exp(-r^2 / (2 n C alpha^2))
        ``diffusion_time_average``  exp(-T r^2 delta^2 / (2 alpha^2 sigma^2));
                                    the transposed variant
                                    exp(-T r^2 sigma^2 / (2 alpha^2 delta^2))
                                    is reported alongside, not enforced.
    """

    kind: str
    params: dict
    r_values: tuple

    def bound(self, r: float) -> float:
        p = self.params
        if self.kind == "dependent_hoeffding":
            return dependent_hoeffding_bound(p["C"], p["r"], p["n"], p["alpha"], r)
        if self.kind == "sde_time_average":
            return math.exp(-(r**2) / (2.0 * p["n"] * p["C"] * p.get("alpha", 1.0) ** 2))
        if self.kind == "diffusion_time_average":
            return math.exp(-p["T"] * r**2 * p["delta"] ** 2
                            / (2.0 * p["alpha"] ** 2 * p["sigma"] ** 2))
        raise ValueError(f"unknown bound kind {self.kind!r}")

    def alt_bound(self, r: float) -> float | None:
        if self.kind == "diffusion_time_average":
            p = self.params
            return math.exp(-p["T"] * r**2 * p["sigma"] ** 2
                            / (2.0 * p["alpha"] ** 2 * p["delta"] ** 2))
        return None


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054):
    """95% Wilson score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    phat = successes / trials
    denom = 1.0 + z**2 / trials
    center = (phat + z**2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z**2 / (4 * trials**2)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


@dataclass(frozen=True)
class TailRow:
    r: float
    empirical: float
    bound: float
    ci_low: float
    ci_high: float
    meaningful: bool       # bound >= 10 / n_paths, so the CI can resolve it
    passed: bool
    bound_alt: float | None = None


@dataclass(frozen=True)
class TailReport:
    rows: list[TailRow]
    mean_value: float
    n_paths: int
    passed: bool


def tail_vs_bound(functional, generator, cfg: SimConfig, bound_spec: BoundSpec) -> TailReport:
    """Empirical exceedance P(f > E f + r) against an analytic tail bound.

    ``generator`` is an SdeSpec (functional receives (times, paths) for a
    chunk and returns one value per path) or a MarkovChainSampler
    (functional receives the integer state matrix).  The verdict for each r
    is `empirical <= bound + CI halfwidth` with a 95% binomial interval.
    """
    values = np.empty(cfg.n_paths)
    if isinstance(generator, SdeSpec):
        _check_stability(generator, cfg)
        x0 = np.zeros(generator.dim) if "x0" not in bound_spec.params \
            else np.atleast_1d(np.asarray(bound_spec.params["x0"], dtype=float))
        n_steps = cfg.n_steps
        times = cfg.times
        for lo, hi in _chunks(cfg.n_paths):
            noise = _noise_block(cfg.seed, range(lo, hi), n_steps, generator.noise_dim)
            x = np.broadcast_to(x0, (hi - lo, generator.dim)).copy()
            chunk_paths = np.empty((hi - lo, n_steps + 1, generator.dim))
            chunk_paths[:, 0] = x
            for k in range(n_steps):
                x = _advance(generator, x, noise[:, k], cfg.dt)
                if not np.all(np.isfinite(x)):
                    raise SimulationBlowupError(k + 1)
                chunk_paths[:, k + 1] = x
            values[lo:hi] = functional(times, chunk_paths)
    elif isinstance(generator, MarkovChainSampler):
        for lo, hi in _chunks(cfg.n_paths):
            states = generator.sample(cfg.seed, range(lo, hi))
            values[lo:hi] = functional(states)
    else:
        raise TypeError("generator must be an SdeSpec or a MarkovChainSampler")

    if not np.all(np.isfinite(values)):
        raise DivergenceError("non-finite functional values in the ensemble")
    mean = float(values.mean())
    rows = []
    for r in bound_spec.r_values:
        exceed = int(np.sum(values > mean + r))
        freq = exceed / cfg.n_paths
        bound = bound_spec.bound(r)
        lo_ci, hi_ci = wilson_interval(exceed, cfg.n_paths)
        meaningful = bound >= 10.0 / cfg.n_paths
        passed = freq <= bound + (hi_ci - freq)
        rows.append(TailRow(r=float(r), empirical=freq, bound=bound, ci_low=lo_ci,
                            ci_high=hi_ci, meaningful=meaningful, passed=passed,
                            bound_alt=bound_spec.alt_bound(r)))
    return TailReport(rows=rows, mean_value=mean, n_paths=cfg.n_paths,
                      passed=all(row.passed for row in rows))


def time_average_functional(V, normalize: bool = True):
    """Trapezoidal-rule functional gamma -> (1/T) int V(gamma(t)) dt (or the
    plain integral with normalize=False), vectorized over a path chunk."""
    def functional(times, paths):
        vals = V(paths)            # (chunk, n_times) expected
        dt = np.diff(times)
        w = np.zeros_like(times)
        w[:-1] += 0.5 * dt
        w[1:] += 0.5 * dt
        out = vals @ w
        return out / times[-1] if normalize else out
    return functional
