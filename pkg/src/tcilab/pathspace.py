"""Path-space machinery for quadratic transport inequalities of diffusions:
covariance-operator spectra, the drift-sensitivity constant alpha^2, the
Jacobian ODE, drift-based relative entropy, shift certificates, and the
Poincare / Tsirelson-type functional checks.

Gaussian path laws on L^2([0, T]) carry a sharp quadratic transport constant
equal to the top eigenvalue of their covariance operator; the spectrum
routines exist to compare that eigenvalue against the constants produced by
the dissipativity route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.sparse.linalg import eigsh

from .errors import KernelError
from .spaces import PathGrid, trapezoid_weights

_PSD_TOL = 1e-8
_REFINE_RTOL = 1e-4
_MAX_GRID = 4096


@dataclass(frozen=True)
class CovarianceKernel:
    """Symmetric kernel (s, t) -> Cov(X_s, X_t) on [0, T]."""

    kernel: object
    label: str
    T: float

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("horizon must be positive")
        # spot-check symmetry on a coarse grid
        ts = np.linspace(0.0, self.T, 8)
        vals = self(ts[:, None], ts[None, :])
        if np.max(np.abs(vals - vals.T)) > 1e-10 * max(np.max(np.abs(vals)), 1.0):
            raise KernelError("kernel is not symmetric")

    def __call__(self, s, t):
        return np.asarray(self.kernel(s, t), dtype=float)

    @staticmethod
    def wiener(T: float) -> "CovarianceKernel":
        """Brownian covariance min(s, t)."""
        return CovarianceKernel(lambda s, t: np.minimum(s, t), "wiener", T)

    @staticmethod
    def ornstein_uhlenbeck(T: float) -> "CovarianceKernel":
        """Covariance exp(-|t-s|/2) - exp(-(s+t)/2) of the mean-reverting
        unit-noise process dX = -X/2 dt + dB started at 0."""
        return CovarianceKernel(
            lambda s, t: np.exp(-np.abs(s - t) / 2.0) - np.exp(-(s + t) / 2.0),
            "ou", T)

    @staticmethod
    def by_name(name: str, T: float) -> "CovarianceKernel":
        if name == "wiener":
            return CovarianceKernel.wiener(T)
        if name == "ou":
            return CovarianceKernel.ornstein_uhlenbeck(T)
        raise ValueError(f"unknown kernel {name!r}")


@dataclass(frozen=True)
class SpectrumResult:
    grid_size: int
    lambda_max: float
    rayleigh_indicator: float
    refinement_history: list

    def to_json(self) -> dict:
        return {"N": self.grid_size, "lambda_max": self.lambda_max,
                "rayleigh_indicator": self.rayleigh_indicator,
                "history": [[int(n), lam] for n, lam in self.refinement_history]}


def _nystrom_top(kernel: CovarianceKernel, N: int) -> float:
    t = np.linspace(0.0, kernel.T, N)
    w = trapezoid_weights(t)
    K = kernel(t[:, None], t[None, :])
    sw = np.sqrt(w)
    M = sw[:, None] * K * sw[None, :]
    M = 0.5 * (M + M.T)
    scale = max(float(np.max(np.abs(M))), 1.0)
    try:
        np.linalg.cholesky(M + _PSD_TOL * scale * np.eye(N))
    except np.linalg.LinAlgError:
        raise KernelError("discretized kernel is indefinite beyond tolerance")
    return float(eigsh(M, k=1, which="LA", return_eigenvectors=False)[0])


def rayleigh_indicator(kernel: CovarianceKernel, tol: float = 1e-10) -> float:
    """<K 1, 1> / T by adaptive quadrature, splitting the inner integral at
    the diagonal where kernels like min(s, t) have a ridge."""
    T = kernel.T

    def inner(t):
        lo, _ = quad(lambda s: float(kernel(s, t)), 0.0, t, epsabs=tol, epsrel=tol)
        hi, _ = quad(lambda s: float(kernel(s, t)), t, T, epsabs=tol, epsrel=tol)
        return lo + hi

    total, _ = quad(inner, 0.0, T, epsabs=tol, epsrel=tol, limit=200)
    return total / T


def operator_spectrum(kernel: CovarianceKernel, N: int) -> SpectrumResult:
    """Top eigenvalue of the covariance operator by symmetrized Nystrom
    discretization (trapezoidal weights, uniform grid).

    The grid is doubled until successive top eigenvalues agree to 1e-4
    relative (grid capped at 4096); the refinement history is returned so the
    convergence rate can be inspected.
    """
    if N < 16:
        raise ValueError("need at least 16 grid points")
    history = [(N, _nystrom_top(kernel, N))]
    size = N
    while size * 2 <= _MAX_GRID:
        size *= 2
        history.append((size, _nystrom_top(kernel, size)))
        prev, cur = history[-2][1], history[-1][1]
        if abs(cur - prev) <= _REFINE_RTOL * max(abs(cur), 1e-30):
            break
    lam = history[-1][1]
    rayleigh = rayleigh_indicator(kernel)
    if lam < rayleigh - 1e-9:
        raise KernelError("top eigenvalue fell below its Rayleigh lower bound")
    return SpectrumResult(grid_size=history[-1][0], lambda_max=lam,
                          rayleigh_indicator=rayleigh, refinement_history=history)


def alpha_squared(T: float, K: float, B: float) -> float:
    """Squared Lipschitz bound of the drift map under a gradient bound K and
    one-sided bound B:

        B < 0:  2 (1 + K^2 / B^2)
        B = 0:  2 (1 + K^2 T^2 / 2)
        B > 0:  2 (1 + K^2 e^{2BT} / (2 B^2))
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if K < 0 or abs(B) > K:
        raise ValueError("need K >= 0 and |B| <= K")
    if B < 0:
        return 2.0 * (1.0 + K**2 / B**2)
    if B > 0:
        return 2.0 * (1.0 + K**2 * math.exp(2.0 * B * T) / (2.0 * B**2))
    return 2.0 * (1.0 + K**2 * T**2 / 2.0)


def jacobian_ode(gradient_field, s: float, t_end: float, grid) -> np.ndarray:
    """Flow Jacobian J(s, t_end) solving dJ/dt = G(t) J, J(s, s) = I, by the
    classical 4th-order Runge-Kutta scheme on the given time grid.

    ``gradient_field(t)`` returns the (d, d) drift gradient along the
    reference trajectory.
    """
    grid = np.asarray(grid, dtype=float)
    seg = grid[(grid >= s - 1e-12) & (grid <= t_end + 1e-12)]
    if len(seg) < 2 or abs(seg[0] - s) > 1e-9 or abs(seg[-1] - t_end) > 1e-9:
        raise ValueError("grid must cover [s, t_end] with s and t_end as nodes")
    d = np.asarray(gradient_field(seg[0])).shape[0]
    J = np.eye(d)
    for t0, t1 in zip(seg[:-1], seg[1:]):
        h = t1 - t0
        g0 = np.asarray(gradient_field(t0))
        gm = np.asarray(gradient_field(t0 + 0.5 * h))
        g1 = np.asarray(gradient_field(t1))
        k1 = g0 @ J
        k2 = gm @ (J + 0.5 * h * k1)
        k3 = gm @ (J + 0.5 * h * k2)
        k4 = g1 @ (J + h * k3)
        J = J + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if np.linalg.norm(J) > 1e12:
            raise ArithmeticError("Jacobian norm exceeded 1e12: unstable step")
    return J


def girsanov_entropy(beta, grid: PathGrid) -> float:
    """Relative entropy of a drift perturbation: (1/2) E int_0^T |beta_t|^2 dt,
    by the trapezoidal rule (and the ensemble mean when beta is random).

    ``beta`` may be a callable t -> value, a deterministic array on the grid
    of shape (N,) or (N, d), or a Monte Carlo ensemble of shape (n_paths, N)
    or (n_paths, N, d).
    """
    times = grid.times
    if callable(beta):
        vals = np.asarray([np.atleast_1d(beta(t)) for t in times], dtype=float)
    else:
        vals = np.asarray(beta, dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    if vals.ndim == 2 and vals.shape[0] == len(times):
        sq = np.sum(vals**2, axis=1)
    elif vals.ndim == 2 and vals.shape[1] == len(times):
        sq = np.mean(vals**2, axis=0)
    elif vals.ndim == 3 and vals.shape[1] == len(times):
        sq = np.mean(np.sum(vals**2, axis=2), axis=0)
    else:
        raise ValueError("beta shape does not match the grid")
    w = trapezoid_weights(times)
    return 0.5 * float(np.sum(w * sq))


def shift_w2_certificate(h, grid: PathGrid) -> tuple[float, float]:
    """Upper and lower certificates for the quadratic transport distance
    between a path law and its shift by h, under the derivative-based path
    norm: both equal |h|_H, derived two ways.

    upper: the translation coupling costs E |(X + h) - X|_H^2 = |h|_H^2.
    lower: any coupling's cost projected on the h direction is at least
    <h, h>_H / |h|_H by centering and Jensen.
    """
    h = np.asarray(h, dtype=float)
    if h.ndim == 1:
        h = h[:, None]
    if h.shape[0] != len(grid.times):
        raise ValueError("path does not match the grid")
    dt = grid.steps
    incr = np.diff(h, axis=0)
    upper = math.sqrt(float(np.sum(np.sum(incr**2, axis=1) / dt)))
    inner = float(np.sum(np.sum(incr * incr, axis=1) / dt))   # <h, h>_H
    lower = 0.0 if inner == 0.0 else inner / math.sqrt(inner)
    return upper, lower


@dataclass(frozen=True)
class PathT2Constants:
    c_path: float          # sigma^2 / delta^2, for the L^2 path metric
    c_marginal: float      # sigma^2 / (2 delta), for the time-T marginal
    eps_coefficient: float  # (1 - e^{(eps-2delta)T}) sigma^2 / (eps (2delta - eps))


def pathspace_t2_constants(sigma_inf: float, delta: float, T: float,
                           eps: float) -> PathT2Constants:
    """Constants produced by the dissipativity route for a diffusion with
    bounded diffusion coefficient: the free parameter eps in (0, 2 delta)
    trades between them; eps = delta recovers the path constant and
    eps -> 2 delta recovers the marginal constant."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if not 0.0 < eps < 2.0 * delta:
        raise ValueError("eps must lie in (0, 2 delta)")
    return PathT2Constants(
        c_path=sigma_inf**2 / delta**2,
        c_marginal=sigma_inf**2 / (2.0 * delta),
        eps_coefficient=(1.0 - math.exp((eps - 2.0 * delta) * T)) * sigma_inf**2
        / (eps * (2.0 * delta - eps)),
    )


@dataclass(frozen=True)
class GaussianMarginal:
    mean: float
    std: float

    def __post_init__(self):
        if self.std <= 0:
            raise ValueError("std must be positive")


@dataclass(frozen=True)
class PoincareResult:
    variance: float
    dirichlet: float       # C * E |g'|^2
    mc_error: float
    passed: bool


_HERMITE_NODES = 201


def poincare_check(marginal, g, g_prime, c_marginal: float) -> PoincareResult:
    """Variance-versus-Dirichlet-form check Var(g) <= C E |g'|^2.

    ``marginal`` is a GaussianMarginal (evaluated by Gauss-Hermite
    quadrature, no Monte Carlo error) or a 1-D sample array (three standard
    errors of slack are granted)."""
    if isinstance(marginal, GaussianMarginal):
        nodes, weights = np.polynomial.hermite_e.hermegauss(_HERMITE_NODES)
        weights = weights / weights.sum()
        y = marginal.mean + marginal.std * nodes
        gv = np.asarray(g(y), dtype=float)
        gp = np.asarray(g_prime(y), dtype=float)
        variance = float(np.sum(weights * gv**2) - np.sum(weights * gv) ** 2)
        dirichlet = c_marginal * float(np.sum(weights * gp**2))
        err = 1e-10 * max(abs(variance), abs(dirichlet), 1.0)
    else:
        y = np.asarray(marginal, dtype=float).ravel()
        n = y.size
        gv = np.asarray(g(y), dtype=float)
        gp2 = np.asarray(g_prime(y), dtype=float) ** 2
        variance = float(np.var(gv))
        dirichlet = c_marginal * float(np.mean(gp2))
        centered = (gv - gv.mean()) ** 2
        se_var = float(np.std(centered, ddof=1) / math.sqrt(n))
        se_dir = c_marginal * float(np.std(gp2, ddof=1) / math.sqrt(n))
        err = 3.0 * (se_var + se_dir)
    return PoincareResult(variance=variance, dirichlet=dirichlet, mc_error=err,
                          passed=variance <= dirichlet + err)


@dataclass(frozen=True)
class TsirelsonResult:
    lhs: float    # E exp(rho sup_h [<gamma, h> - |h|_G^2 / 2])
    rhs: float    # exp(rho E sup_h <gamma, h>)
    rel_error: float
    passed: bool


def tsirelson_check(k_set, ensemble_paths, grid: PathGrid, rho: float) -> TsirelsonResult:
    """Supremum-of-linear-functionals exponential inequality on a path
    ensemble: E exp(rho sup_h [<gamma, h> - |h|^2/2]) <= exp(rho E sup <gamma, h>),
    inner products and norms in L^2([0, T]) by the trapezoidal rule.

    Passes when lhs <= rhs (1 + 3 relative Monte Carlo error).
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    hs = [np.asarray(h, dtype=float).ravel() for h in k_set]
    if not hs:
        raise ValueError("k_set must be nonempty")
    paths = np.asarray(ensemble_paths, dtype=float)
    if paths.ndim == 3:
        paths = paths[:, :, 0]
    w = trapezoid_weights(grid.times)
    H = np.stack(hs, axis=1)                      # (N, n_h)
    inner = (paths * w[None, :]) @ H              # (n_paths, n_h)
    norms_sq = np.sum(w[:, None] * H**2, axis=0)  # (n_h,)
    z = np.max(inner, axis=1)
    shifted = np.max(inner - 0.5 * norms_sq[None, :], axis=1)
    expo = rho * shifted
    if np.max(expo) > 700.0:
        raise OverflowError("exponent overflow in the supremum functional")
    lhs_samples = np.exp(expo)
    n = paths.shape[0]
    lhs = float(lhs_samples.mean())
    rhs = float(math.exp(rho * z.mean()))
    rel = (float(np.std(lhs_samples, ddof=1) / math.sqrt(n)) / max(lhs, 1e-300)
           + rho * float(np.std(z, ddof=1) / math.sqrt(n)))
    return TsirelsonResult(lhs=lhs, rhs=rhs, rel_error=rel,
                           passed=lhs <= rhs * (1.0 + 3.0 * rel))
