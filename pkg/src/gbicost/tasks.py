"""Benchmark simulators with priors and exact expected-distance oracles.

Four tasks, each defining a prior p(theta), a stochastic simulator
x ~ p(x|theta), a canonical distance d, and an oracle for the cost

    cost(theta; x_o) = E_{x ~ p(x|theta)}[ d(x, x_o) ],

computed in closed form where the algebra allows it and by grid quadrature
otherwise.

================  =========  =====  ========================================
task              theta/x    trials simulator
================  =========  =====  ========================================
uniform1d         1 / 1      1      quartic g(0.8 (theta+0.25)) + U(-.25,.25)
two_moons         2 / 2      1      half-ring r~N(0.1, 0.01^2), translated
linear_gaussian   10 / 10    1      N(theta, 0.1 I)
gaussian_mixture  2 / 2x5    5      5 iid pts, 0.5 N(theta,I)+0.5 N(theta,.01I)
================  =========  =====  ========================================

The first three use the dimension-averaged squared error; the mixture task
compares 5-point sets with biased MMD^2 (Gaussian kernel).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .distances import DistanceConfig

__all__ = [
    "TASK_NAMES",
    "PriorBounds",
    "Task",
    "Uniform1D",
    "TwoMoons",
    "LinearGaussian",
    "GaussianMixture",
    "get_task",
]

TASK_NAMES = ("uniform1d", "two_moons", "linear_gaussian", "gaussian_mixture")


@dataclass(frozen=True)
class PriorBounds:
    """Elementwise envelope and spread of prior-predictive simulations."""

    low: np.ndarray
    high: np.ndarray
    std: np.ndarray
    n_sims: int

    def __post_init__(self) -> None:
        if np.any(self.low > self.high):
            raise ValueError("low must be <= high elementwise")
        if np.any(self.std <= 0):
            raise ValueError("std must be positive")


class Task:
    """Common interface; subclasses fill in the distributions."""

    name: str
    theta_dim: int
    x_dim: int
    n_trials: int = 1
    default_distance: DistanceConfig

    # Axis-aligned prior support for box priors, None for unbounded priors.
    prior_box: tuple[np.ndarray, np.ndarray] | None = None

    def prior_sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n iid prior draws, shape (n, theta_dim)."""
        raise NotImplementedError

    def prior_log_prob(self, theta: np.ndarray) -> float:
        """Exact log prior density; -inf outside the support."""
        raise NotImplementedError

    def prior_log_prob_batch(self, thetas: np.ndarray) -> np.ndarray:
        """Vectorized log prior density, shape (n,)."""
        raise NotImplementedError

    def prior_std(self) -> np.ndarray:
        """Per-dimension prior standard deviation (slice-sampler step scale)."""
        raise NotImplementedError

    def simulate_batch(self, thetas: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """One simulation per row of thetas: (n, x_dim) or (n, n_trials, x_dim)."""
        raise NotImplementedError

    def simulate(self, theta: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Single stochastic draw from p(x|theta)."""
        return self.simulate_batch(np.asarray(theta, dtype=float)[None, :], rng)[0]

    def true_cost_batch(self, thetas: np.ndarray, x_o: np.ndarray,
                        distance: DistanceConfig | None = None) -> np.ndarray:
        raise NotImplementedError

    def true_cost(self, theta: np.ndarray, x_o: np.ndarray,
                  distance: DistanceConfig | None = None) -> float:
        """Expected distance between simulations at theta and the target x_o."""
        t = np.asarray(theta, dtype=float)
        return float(self.true_cost_batch(t[None, :], x_o, distance)[0])

    def prior_predictive_bounds(self, n: int = 100_000,
                                rng: np.random.Generator | None = None) -> PriorBounds:
        """Envelope and std of n fresh prior-predictive simulations.

        For set-valued tasks the statistics pool all points of all sets.
        """
        if n < 2:
            raise ValueError("need n >= 2 simulations")
        if rng is None:
            rng = np.random.default_rng(0)
        xs = self.simulate_batch(self.prior_sample(n, rng), rng)
        pooled = xs.reshape(-1, xs.shape[-1])
        std = pooled.std(axis=0)
        return PriorBounds(low=pooled.min(axis=0), high=pooled.max(axis=0),
                           std=std, n_sims=n)

    def _check_theta(self, thetas: np.ndarray) -> np.ndarray:
        t = np.asarray(thetas, dtype=float)
        if t.ndim != 2 or t.shape[1] != self.theta_dim:
            raise ValueError(f"{self.name}: theta must be (n, {self.theta_dim})")
        return t

    def _canonical_only(self, distance: DistanceConfig | None) -> None:
        if distance is not None and distance.kind != self.default_distance.kind:
            raise NotImplementedError(
                f"{self.name}: cost oracle only supports {self.default_distance.kind}")


class _BoxPriorMixin:
    """Uniform prior over an axis-aligned box."""

    def prior_sample(self, n, rng):
        low, high = self.prior_box
        return rng.uniform(low, high, size=(n, self.theta_dim))

    def prior_log_prob(self, theta):
        theta = np.asarray(theta, dtype=float)
        low, high = self.prior_box
        if np.all(theta >= low) and np.all(theta <= high):
            return float(-np.sum(np.log(high - low)))
        return -math.inf

    def prior_log_prob_batch(self, thetas):
        thetas = np.asarray(thetas, dtype=float)
        low, high = self.prior_box
        inside = np.all((thetas >= low) & (thetas <= high), axis=1)
        const = float(-np.sum(np.log(high - low)))
        return np.where(inside, const, -np.inf)

    def prior_std(self):
        low, high = self.prior_box
        return (high - low) / math.sqrt(12.0)


# Quartic mean function of the 1-D task, evaluated at z = 0.8 (theta + 0.25).
_POLY = (0.1627, 0.9073, -1.2197, -1.4639, 1.4381)
_UNIFORM_NOISE_HALF_WIDTH = 0.25
UNIFORM1D_NOISE_VAR = (2 * _UNIFORM_NOISE_HALF_WIDTH) ** 2 / 12.0  # = 1/48


def uniform1d_mean(theta: np.ndarray) -> np.ndarray:
    """Noiseless simulator output g(z), z = 0.8 (theta + 0.25)."""
    z = 0.8 * (np.asarray(theta, dtype=float) + 0.25)
    return (
        _POLY[0]
        + _POLY[1] * z
        + _POLY[2] * z**2
        + _POLY[3] * z**3
        + _POLY[4] * z**4
    )


class Uniform1D(_BoxPriorMixin, Task):
    """1-D quartic with additive uniform noise; U(-1.5, 1.5) prior."""

    name = "uniform1d"
    theta_dim = 1
    x_dim = 1
    default_distance = DistanceConfig("mse")
    prior_box = (np.array([-1.5]), np.array([1.5]))

    def simulate_batch(self, thetas, rng):
        t = self._check_theta(thetas)
        eps = rng.uniform(-_UNIFORM_NOISE_HALF_WIDTH, _UNIFORM_NOISE_HALF_WIDTH,
                          size=(t.shape[0], 1))
        return uniform1d_mean(t) + eps

    def true_cost_batch(self, thetas, x_o, distance=None):
        # E[(g + eps - x_o)^2] = (g - x_o)^2 + var(eps)
        self._canonical_only(distance)
        t = self._check_theta(thetas)
        x_o = np.asarray(x_o, dtype=float).reshape(1)
        g = uniform1d_mean(t)[:, 0]
        return (g - x_o[0]) ** 2 + UNIFORM1D_NOISE_VAR


# Quadrature grid from which the ring's output moments are computed.
TWO_MOONS_GRID_X1 = (-1.2, 0.4)
TWO_MOONS_GRID_X2 = (-1.6, 1.6)
_RING_RADIUS_MEAN = 0.1
_RING_RADIUS_STD = 0.01
_RING_CENTER_X1 = 0.25


@lru_cache(maxsize=8)
def _two_moons_output_moments(n_bins: int) -> tuple[float, tuple[float, float], float]:
    """Midpoint-rule moments (mass, mean, E|v|^2) of the untranslated ring.

    The simulator output is this theta = 0 distribution shifted by t(theta),
    so the quadratic cost follows from these moments alone; refining
    ``n_bins`` refines the cost estimate.
    """
    e1 = np.linspace(*TWO_MOONS_GRID_X1, n_bins + 1)
    e2 = np.linspace(*TWO_MOONS_GRID_X2, n_bins + 1)
    c1 = 0.5 * (e1[:-1] + e1[1:])
    c2 = 0.5 * (e2[:-1] + e2[1:])
    v1, v2 = np.meshgrid(c1, c2, indexing="ij")
    u1 = v1 - _RING_CENTER_X1
    rho = np.hypot(u1, v2)
    with np.errstate(divide="ignore", invalid="ignore"):
        radial = np.exp(-0.5 * ((rho - _RING_RADIUS_MEAN) / _RING_RADIUS_STD) ** 2)
        radial /= math.sqrt(2 * math.pi) * _RING_RADIUS_STD
        dens = np.where((u1 > 0) & (rho > 1e-12), radial / (math.pi * rho), 0.0)
    area = (e1[1] - e1[0]) * (e2[1] - e2[0])
    m0 = float(dens.sum() * area)
    m1 = (float((v1 * dens).sum() * area), float((v2 * dens).sum() * area))
    m2 = float(((v1**2 + v2**2) * dens).sum() * area)
    return m0, m1, m2


class TwoMoons(_BoxPriorMixin, Task):
    """Half-ring of radius ~N(0.1, 0.01^2), translated by theta; U(-1,1)^2 prior.

    x = [r cos(a) + 0.25, r sin(a)] + [-|t1+t2|, -t1+t2] / sqrt(2),
    a ~ U(-pi/2, pi/2).
    """

    name = "two_moons"
    theta_dim = 2
    x_dim = 2
    default_distance = DistanceConfig("mse")
    prior_box = (np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
    quadrature_bins = 500

    @staticmethod
    def translation(thetas: np.ndarray) -> np.ndarray:
        t = np.asarray(thetas, dtype=float)
        return np.stack(
            [-np.abs(t[:, 0] + t[:, 1]), -t[:, 0] + t[:, 1]], axis=1
        ) / math.sqrt(2.0)

    def simulate_batch(self, thetas, rng):
        t = self._check_theta(thetas)
        n = t.shape[0]
        alpha = rng.uniform(-math.pi / 2, math.pi / 2, size=n)
        r = rng.normal(_RING_RADIUS_MEAN, _RING_RADIUS_STD, size=n)
        ring = np.stack([r * np.cos(alpha) + _RING_CENTER_X1, r * np.sin(alpha)], axis=1)
        return ring + self.translation(t)

    def true_cost_batch(self, thetas, x_o, distance=None, n_bins: int | None = None):
        self._canonical_only(distance)
        t = self._check_theta(thetas)
        x_o = np.asarray(x_o, dtype=float).reshape(2)
        m0, m1, m2 = _two_moons_output_moments(n_bins or self.quadrature_bins)
        if m0 <= 0:
            raise RuntimeError("quadrature grid carries no probability mass")
        w = self.translation(t) - x_o  # (n, 2)
        ev2 = m2 / m0
        ev = np.asarray(m1) / m0
        return (ev2 + 2.0 * (w @ ev) + np.sum(w**2, axis=1)) / 2.0


class LinearGaussian(Task):
    """10-D Gaussian mean inference: x ~ N(theta, 0.1 I), theta ~ N(0, 0.1 I)."""

    name = "linear_gaussian"
    theta_dim = 10
    x_dim = 10
    default_distance = DistanceConfig("mse")
    prior_var = 0.1
    likelihood_var = 0.1

    def prior_sample(self, n, rng):
        return rng.normal(0.0, math.sqrt(self.prior_var), size=(n, self.theta_dim))

    def prior_log_prob(self, theta):
        theta = np.asarray(theta, dtype=float)
        quad = float(np.sum(theta**2)) / self.prior_var
        return -0.5 * (quad + self.theta_dim * math.log(2 * math.pi * self.prior_var))

    def prior_log_prob_batch(self, thetas):
        thetas = np.asarray(thetas, dtype=float)
        quad = np.sum(thetas**2, axis=1) / self.prior_var
        return -0.5 * (quad + self.theta_dim * math.log(2 * math.pi * self.prior_var))

    def prior_std(self):
        return np.full(self.theta_dim, math.sqrt(self.prior_var))

    def simulate_batch(self, thetas, rng):
        t = self._check_theta(thetas)
        return t + rng.normal(0.0, math.sqrt(self.likelihood_var), size=t.shape)

    def true_cost_batch(self, thetas, x_o, distance=None):
        # E[mean((x - x_o)^2)] = |theta - x_o|^2 / D + likelihood variance
        self._canonical_only(distance)
        t = self._check_theta(thetas)
        x_o = np.asarray(x_o, dtype=float).reshape(self.x_dim)
        sq = np.sum((t - x_o) ** 2, axis=1)
        return sq / self.x_dim + self.likelihood_var


# Default Gaussian-kernel scale for comparing mixture 5-sets: the order of
# the median pairwise distance between prior-predictive points (the prior
# box spans [-10, 10]^2).  Overridable through DistanceConfig.
MIXTURE_BANDWIDTH = 10.0


def _gauss_kernel_expect(s2: float, m_sq: np.ndarray, gamma: float, dim: int) -> np.ndarray:
    """E[exp(-|z|^2 / (2 gamma^2))] for z ~ N(m, s2 I_dim) with |m|^2 = m_sq."""
    denom = gamma**2 + s2
    return (gamma**2 / denom) ** (dim / 2.0) * np.exp(-m_sq / (2.0 * denom))


class GaussianMixture(_BoxPriorMixin, Task):
    """Common mean of a 2-component mixture, observed through 5 iid points.

    Each point is N(theta, I) or N(theta, 0.01 I) with equal probability.
    Sets are compared with biased MMD^2, whose expectation over the
    simulator has a closed form (Gaussian integrals of the kernel).
    """

    name = "gaussian_mixture"
    theta_dim = 2
    x_dim = 2
    n_trials = 5
    default_distance = DistanceConfig("mmd2", bandwidth=MIXTURE_BANDWIDTH)
    prior_box = (np.array([-10.0, -10.0]), np.array([10.0, 10.0]))
    component_vars = (1.0, 0.01)

    def simulate_batch(self, thetas, rng):
        t = self._check_theta(thetas)
        n = t.shape[0]
        broad = t[:, None, :] + rng.normal(size=(n, self.n_trials, self.x_dim))
        narrow = t[:, None, :] + 0.1 * rng.normal(size=(n, self.n_trials, self.x_dim))
        pick = rng.random(size=(n, self.n_trials, 1)) < 0.5
        return np.where(pick, broad, narrow)

    def simulate_misspecified_batch(self, thetas, rng):
        """Variant with the narrow component displaced to 12.5 * sign(theta)."""
        t = self._check_theta(thetas)
        n = t.shape[0]
        broad = t[:, None, :] + rng.normal(size=(n, self.n_trials, self.x_dim))
        displaced = 12.5 * np.sign(t)[:, None, :] + 0.5 * rng.normal(
            size=(n, self.n_trials, self.x_dim))
        pick = rng.random(size=(n, self.n_trials, 1)) < 0.5
        return np.where(pick, broad, displaced)

    def _bandwidth(self, distance: DistanceConfig | None) -> float:
        if distance is None:
            return float(self.default_distance.bandwidth)
        if distance.kind != "mmd2":
            raise NotImplementedError("gaussian_mixture cost oracle requires mmd2")
        return float(distance.bandwidth or self.default_distance.bandwidth)

    def true_cost_batch(self, thetas, x_o, distance=None):
        """Exact E[MMD^2(X, x_o)] over 5-point sets X simulated at theta.

        The V-statistic expectation decomposes into Gaussian-kernel
        expectations between mixture components plus the fixed within-target
        term; see the derivation notes in the test suite's MC cross-check.
        """
        t = self._check_theta(thetas)
        y = np.asarray(x_o, dtype=float)
        if y.shape != (self.n_trials, self.x_dim):
            raise ValueError(f"x_o must be ({self.n_trials}, {self.x_dim})")
        gamma = self._bandwidth(distance)
        d = self.x_dim
        k = self.n_trials
        va, vb = self.component_vars

        # E k(x, x') over independent draws: average over component pairs.
        zero = np.zeros(1)
        kpp = 0.25 * (
            _gauss_kernel_expect(2 * va, zero, gamma, d)
            + 2 * _gauss_kernel_expect(va + vb, zero, gamma, d)
            + _gauss_kernel_expect(2 * vb, zero, gamma, d)
        )[0]
        # V-statistic within-X mean: (k-1)/k off-diagonal terms + 1/k of k(x,x)=1.
        within_x = (k - 1) / k * kpp + 1.0 / k

        diff_sq = np.sum((t[:, None, :] - y[None, :, :]) ** 2, axis=2)  # (n, k)
        kxy = 0.5 * (
            _gauss_kernel_expect(va, diff_sq, gamma, d)
            + _gauss_kernel_expect(vb, diff_sq, gamma, d)
        )
        cross = kxy.mean(axis=1)

        sq_yy = np.sum((y[:, None, :] - y[None, :, :]) ** 2, axis=2)
        within_y = float(np.exp(-sq_yy / (2 * gamma**2)).mean())
        return within_x + within_y - 2.0 * cross


_REGISTRY = {
    "uniform1d": Uniform1D,
    "two_moons": TwoMoons,
    "linear_gaussian": LinearGaussian,
    "gaussian_mixture": GaussianMixture,
}


def get_task(name: str) -> Task:
    """Look up a benchmark task by name."""
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ValueError(f"unknown task {name!r}; choose from {TASK_NAMES}") from None
