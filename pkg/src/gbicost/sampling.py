"""Generalized posteriors and the samplers that draw from them.

The target density is

    p(theta | x_o)  propto  exp(-beta * cost(theta, x_o)) * p(theta)

where the cost is either a trained network's prediction or a task's exact
expected-distance oracle.  Sampling backends:

* ``slice_sample``        -- multi-chain coordinate slice sampling
  (stepping-out and shrinkage), works for any potential;
* ``rejection_sample_gt`` -- exact rejection against the oracle cost, with
  the normalizing maximum estimated on a dense grid or by local search;
* ``linear_gaussian_gt``  -- the closed-form Gaussian posterior of the
  10-D linear-Gaussian task;
* ``abc_kernel_sample``   -- reference-table ABC with an exponential
  acceptance kernel, halving beta until enough samples are accepted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import nets
from .distances import DistanceConfig, make_distance
from .rng import derive_rng
from .tasks import LinearGaussian, Task

__all__ = [
    "Potential",
    "gbi_log_potential",
    "net_cost_fn",
    "oracle_cost_fn",
    "SliceConfig",
    "PosteriorSamples",
    "slice_sample",
    "PriorProposal",
    "GaussianProposal",
    "rejection_sample_gt",
    "LinearGaussianPosterior",
    "linear_gaussian_gt",
    "abc_kernel_sample",
]


def net_cost_fn(params: nets.NetParams):
    """Cost source backed by a trained network: (theta, x_o) -> prediction."""

    def cost(theta: np.ndarray, x_o: np.ndarray) -> float:
        x = np.asarray(x_o, dtype=float)
        return nets.forward(params, np.asarray(theta, dtype=float)[None, :], x[None, ...])

    return cost


def oracle_cost_fn(task: Task, distance: DistanceConfig | None = None):
    """Cost source backed by the task's exact expected-distance oracle."""

    def cost(theta: np.ndarray, x_o: np.ndarray) -> float:
        return task.true_cost(theta, x_o, distance)

    return cost


def gbi_log_potential(cost_fn, log_prior, beta: float, theta: np.ndarray,
                      x_o: np.ndarray) -> float:
    """-beta * cost(theta, x_o) + log prior(theta); -inf outside the support."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    lp = log_prior(theta)
    if lp == -math.inf:
        return -math.inf
    c = cost_fn(theta, x_o)
    if not math.isfinite(c):
        raise FloatingPointError(f"non-finite cost prediction at theta={theta!r}")
    return -beta * c + lp


class Potential:
    """Unnormalized log density of a generalized posterior.

    ``init_sampler(rng, n)`` provides starting points for MCMC chains
    (typically the prior sampler).
    """

    def __init__(self, cost_fn, log_prior, beta: float, x_o: np.ndarray,
                 init_sampler=None, source: str = "custom"):
        if beta < 0:
            raise ValueError("beta must be >= 0")
        self.cost_fn = cost_fn
        self.log_prior = log_prior
        self.beta = float(beta)
        self.x_o = np.asarray(x_o, dtype=float)
        self.init_sampler = init_sampler
        self.source = source

    @classmethod
    def from_net(cls, params: nets.NetParams, task: Task, beta: float,
                 x_o: np.ndarray) -> "Potential":
        return cls(net_cost_fn(params), task.prior_log_prob, beta, x_o,
                   init_sampler=task.prior_sample, source="cost-net")

    @classmethod
    def from_oracle(cls, task: Task, beta: float, x_o: np.ndarray,
                    distance: DistanceConfig | None = None) -> "Potential":
        return cls(oracle_cost_fn(task, distance), task.prior_log_prob, beta, x_o,
                   init_sampler=task.prior_sample, source="true-cost")

    def __call__(self, theta: np.ndarray) -> float:
        return gbi_log_potential(self.cost_fn, self.log_prior, self.beta,
                                 theta, self.x_o)


@dataclass
class SliceConfig:
    """Multi-chain coordinate slice-sampler settings.

    ``step_width`` is the initial bracket size per dimension (defaults to
    the prior standard deviation when sampling a task potential).  Samples
    are pooled round-robin across chains after discarding ``burn_in`` scans
    per chain, so the output is deterministic given the seed regardless of
    how chains would be scheduled.
    """

    n_chains: int = 100
    n_samples: int = 5000
    burn_in: int = 200
    step_width: float | np.ndarray | None = None
    max_stepouts: int = 50
    thin: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_chains < 1 or self.n_samples < 1:
            raise ValueError("n_chains and n_samples must be >= 1")
        if self.burn_in < 0 or self.thin < 1 or self.max_stepouts < 1:
            raise ValueError("invalid slice-sampler settings")


@dataclass
class PosteriorSamples:
    """Sample matrix with provenance."""

    samples: np.ndarray  # (M, theta_dim)
    method: str
    beta: float
    observation_id: str | None = None
    diagnostics: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.samples.shape[0]


def _slice_update_coord(log_prob, theta: np.ndarray, d: int, width: float,
                        log_cur: float, rng: np.random.Generator,
                        max_stepouts: int) -> tuple[float, float, int]:
    """One stepping-out/shrinkage update of coordinate d; returns
    (new value, new log prob, n evaluations)."""
    n_evals = 0

    def at(v: float) -> float:
        cand = theta.copy()
        cand[d] = v
        return log_prob(cand)

    u = rng.uniform()
    log_y = log_cur + math.log(u if u > 0.0 else np.finfo(float).tiny)
    x0 = theta[d]
    left = x0 - width * rng.uniform()
    right = left + width
    j = int(math.floor(max_stepouts * rng.uniform()))
    k = max_stepouts - 1 - j
    lp_left = at(left)
    n_evals += 1
    while j > 0 and lp_left > log_y:
        left -= width
        lp_left = at(left)
        n_evals += 1
        j -= 1
    lp_right = at(right)
    n_evals += 1
    while k > 0 and lp_right > log_y:
        right += width
        lp_right = at(right)
        n_evals += 1
        k -= 1

    for _ in range(1000):
        x1 = rng.uniform(left, right)
        lp = at(x1)
        n_evals += 1
        if lp > log_y:
            return x1, lp, n_evals
        if x1 < x0:
            left = x1
        else:
            right = x1
    raise RuntimeError("slice shrinkage failed to find an acceptable point")


def slice_sample(potential, cfg: SliceConfig, rng: np.random.Generator | None = None,
                 init_sampler=None, method: str = "slice",
                 observation_id: str | None = None) -> PosteriorSamples:
    """Draw ``cfg.n_samples`` pooled across ``cfg.n_chains`` independent chains.

    ``potential`` is a callable theta -> unnormalized log density (e.g. a
    ``Potential``).  Chains start at draws from ``init_sampler(rng, n)``
    with finite potential; initialization fails after 100 retries per chain.
    """
    if rng is None:
        rng = derive_rng(cfg.seed, "slice_sample")
    if init_sampler is None:
        init_sampler = getattr(potential, "init_sampler", None)
    if init_sampler is None:
        raise ValueError("no chain initializer: pass init_sampler")

    width = cfg.step_width
    if width is None:
        raise ValueError("cfg.step_width must be set (per-dimension scale)")

    chain_rngs = rng.spawn(cfg.n_chains)
    n_chains, m_total = cfg.n_chains, cfg.n_samples
    max_keep = -(-m_total // n_chains)
    beta = getattr(potential, "beta", None)

    kept: list[list[np.ndarray]] = []
    total_evals = 0
    dim = None
    for c, crng in enumerate(chain_rngs):
        n_keep = max(0, -(-(m_total - c) // n_chains))
        theta = None
        for _ in range(100):
            cand = np.atleast_2d(init_sampler(1, crng))[0].astype(float)
            lp = potential(cand)
            if math.isfinite(lp):
                theta = cand
                break
        if theta is None:
            raise RuntimeError("could not initialize chain at a finite-potential point")
        dim = theta.size
        widths = np.broadcast_to(np.asarray(width, dtype=float), (dim,))

        log_cur = lp
        chain_kept: list[np.ndarray] = []
        n_scans = cfg.burn_in + n_keep * cfg.thin
        for scan in range(n_scans):
            for d in range(dim):
                theta[d], log_cur, ev = _slice_update_coord(
                    potential, theta, d, float(widths[d]), log_cur, crng,
                    cfg.max_stepouts)
                total_evals += ev
            post = scan - cfg.burn_in + 1
            if post > 0 and post % cfg.thin == 0:
                chain_kept.append(theta.copy())
        kept.append(chain_kept)

    pooled = []
    for s in range(max_keep):
        for c in range(n_chains):
            if s < len(kept[c]) and len(pooled) < m_total:
                pooled.append(kept[c][s])
    samples = np.asarray(pooled)
    return PosteriorSamples(
        samples=samples,
        method=method,
        beta=float(beta) if beta is not None else math.nan,
        observation_id=observation_id,
        diagnostics={
            "n_chains": n_chains,
            "burn_in": cfg.burn_in,
            "thin": cfg.thin,
            "n_potential_evals": total_evals,
        },
    )


def mode_centered_proposal(task: Task, beta: float, x_o: np.ndarray,
                           distance: DistanceConfig | None = None,
                           variance: float | None = None,
                           min_prior_acceptance: float = 1e-3):
    """Proposal for rejection sampling on a box-prior task.

    Returns None (meaning: propose from the prior) whenever the prior
    proposal's estimated acceptance rate is workable; otherwise a Gaussian
    at the grid argmax of the generalized posterior with variance 50/beta.
    Centering on the actual mode (instead of the parameter that generated
    the observation) keeps rejection feasible for misspecified
    observations, whose posterior can sit far from the generating
    parameter; falling back to the prior covers low beta, where the
    posterior is box-wide and a local Gaussian cannot dominate it.
    """
    if task.prior_box is None:
        raise ValueError("mode search needs a box prior")
    grid = _grid_over_box(*task.prior_box)
    log_post = -beta * task.true_cost_batch(grid, x_o, distance)
    prior_acceptance = float(np.mean(np.exp(log_post - np.max(log_post))))
    if prior_acceptance >= min_prior_acceptance:
        return None
    center = grid[int(np.argmax(log_post))]
    var = variance if variance is not None else 50.0 / beta
    return GaussianProposal(center, math.sqrt(var))


class PriorProposal:
    """Proposal equal to the task prior (weight correction cancels)."""

    def __init__(self, task: Task):
        self.task = task

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.task.prior_sample(n, rng)

    def log_prob_batch(self, thetas: np.ndarray) -> np.ndarray:
        return self.task.prior_log_prob_batch(thetas)


class GaussianProposal:
    """Isotropic Gaussian proposal N(mean, std^2 I)."""

    def __init__(self, mean: np.ndarray, std: float):
        self.mean = np.asarray(mean, dtype=float)
        self.std = float(std)
        if self.std <= 0:
            raise ValueError("std must be positive")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.mean + self.std * rng.normal(size=(n, self.mean.size))

    def log_prob_batch(self, thetas: np.ndarray) -> np.ndarray:
        diff = np.asarray(thetas, dtype=float) - self.mean
        quad = np.sum(diff**2, axis=1) / self.std**2
        d = self.mean.size
        return -0.5 * (quad + d * math.log(2 * math.pi * self.std**2))


def _grid_over_box(low: np.ndarray, high: np.ndarray) -> np.ndarray:
    """Dense evaluation grid: 10^4 points in 1-D, 500^2 in 2-D."""
    dim = low.size
    if dim == 1:
        return np.linspace(low[0], high[0], 10_000)[:, None]
    if dim == 2:
        g1 = np.linspace(low[0], high[0], 500)
        g2 = np.linspace(low[1], high[1], 500)
        m1, m2 = np.meshgrid(g1, g2, indexing="ij")
        return np.stack([m1.ravel(), m2.ravel()], axis=1)
    raise ValueError("grid search only supports 1-D and 2-D parameter spaces")


def _cap_region(task: Task, proposal) -> tuple[np.ndarray, np.ndarray] | None:
    """Box over which the normalizing weight maximum is taken.

    For the prior proposal the prior/proposal ratio cancels, so the whole
    support is the right region.  For a narrow Gaussian proposal the weight
    is unbounded far out in the proposal's tails where neither proposal nor
    posterior carries mass; capping over mean +- 5 std (intersected with
    the prior box) keeps the sampler exact up to a reported clipped sliver.
    """
    if isinstance(proposal, GaussianProposal):
        low = proposal.mean - 5.0 * proposal.std
        high = proposal.mean + 5.0 * proposal.std
        if task.prior_box is not None:
            low = np.maximum(low, task.prior_box[0])
            high = np.minimum(high, task.prior_box[1])
        return low, high
    if task.prior_box is not None:
        return task.prior_box
    return None


def rejection_sample_gt(
    task: Task,
    beta: float,
    x_o: np.ndarray,
    n: int,
    rng: np.random.Generator,
    proposal=None,
    distance: DistanceConfig | None = None,
    observation_id: str | None = None,
    chunk_size: int = 100_000,
    max_proposals: int = 50_000_000,
) -> PosteriorSamples:
    """Exact rejection sampler against the true-cost oracle.

    Acceptance uses log weights -beta*cost + log prior - log proposal,
    normalized by their maximum over a dense grid (1-D/2-D box priors) or a
    Nelder-Mead search from 100 prior starts (higher dimensions).  Residual
    weights above the estimated maximum are clipped at 1 and the clipping
    rate is reported in the diagnostics.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if proposal is None:
        proposal = PriorProposal(task)

    def log_weight(thetas: np.ndarray) -> np.ndarray:
        cost = task.true_cost_batch(thetas, x_o, distance)
        return -beta * cost + task.prior_log_prob_batch(thetas) - proposal.log_prob_batch(thetas)

    region = _cap_region(task, proposal)
    if region is not None:
        candidates = _grid_over_box(*region)
        if isinstance(proposal, GaussianProposal):
            # Cap over the 5-sigma ball: the enclosing rectangle's corners
            # lie at 5*sqrt(2) sigma where the weight ratio explodes.
            dist = np.linalg.norm(candidates - proposal.mean, axis=1)
            candidates = candidates[dist <= 5.0 * proposal.std]
        log_max = float(np.max(log_weight(candidates)))
    else:
        starts = task.prior_sample(100, rng)

        def neg(theta):
            lw = log_weight(theta[None, :])[0]
            return math.inf if not math.isfinite(lw) else -lw

        best = -math.inf
        for s in starts:
            res = optimize.minimize(neg, s, method="Nelder-Mead",
                                    options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": 2000})
            best = max(best, -float(res.fun))
        log_max = best
    # Dedicated pre-pass of proposal draws tightens the cap in directions the
    # grid cannot cover; these draws are not reused for accept/reject.
    probe = proposal.sample(10_000, rng)
    lw_probe = log_weight(probe)
    finite = lw_probe[np.isfinite(lw_probe)]
    if finite.size:
        log_max = max(log_max, float(np.max(finite)))

    accepted: list[np.ndarray] = []
    n_accepted = 0
    n_proposed = 0
    n_clipped = 0
    while n_accepted < n:
        if n_proposed >= max_proposals:
            raise RuntimeError(
                f"rejection acceptance rate too low: {n_accepted}/{n_proposed} "
                f"accepted (need {n})")
        thetas = proposal.sample(chunk_size, rng)
        lw = log_weight(thetas) - log_max
        n_clipped += int(np.sum(lw > 0))
        acc = rng.uniform(size=chunk_size) < np.exp(np.minimum(lw, 0.0))
        n_proposed += chunk_size
        if acc.any():
            accepted.append(thetas[acc])
            n_accepted += int(acc.sum())
    samples = np.concatenate(accepted, axis=0)[:n]
    return PosteriorSamples(
        samples=samples,
        method="gt-rejection",
        beta=float(beta),
        observation_id=observation_id,
        diagnostics={
            "n_proposed": n_proposed,
            "acceptance_rate": n_accepted / n_proposed,
            "clip_rate": n_clipped / n_proposed,
            "log_weight_max": log_max,
        },
    )


@dataclass(frozen=True)
class LinearGaussianPosterior:
    """Closed-form generalized posterior of the linear-Gaussian task.

    With prior N(0, s0^2 I) and cost |theta - x_o|^2 / D + c, the posterior
    is N(mu, v I) with v = (1/s0^2 + 2 beta/D)^-1 and mu = v (2 beta/D) x_o.
    """

    mean: np.ndarray
    var: float

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.mean + math.sqrt(self.var) * rng.normal(size=(n, self.mean.size))

    def cov(self) -> np.ndarray:
        return self.var * np.eye(self.mean.size)


def linear_gaussian_gt(beta: float, x_o: np.ndarray,
                       task: LinearGaussian | None = None) -> LinearGaussianPosterior:
    """Exact GBI posterior for the linear-Gaussian task at inverse temperature beta."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    task = task or LinearGaussian()
    x_o = np.asarray(x_o, dtype=float).reshape(task.x_dim)
    prec = 1.0 / task.prior_var + 2.0 * beta / task.x_dim
    var = 1.0 / prec
    mean = var * (2.0 * beta / task.x_dim) * x_o
    return LinearGaussianPosterior(mean=mean, var=var)


def abc_kernel_sample(
    reference,
    x_o: np.ndarray,
    distance: DistanceConfig,
    beta0: float,
    rng: np.random.Generator,
    min_accept: int = 50,
    observation_id: str | None = None,
) -> PosteriorSamples:
    """Reference-table ABC with acceptance probability exp(-beta * d).

    ``reference`` is a SimDataset of prior simulations.  If fewer than
    ``min_accept`` rows are accepted, beta is halved and the whole pass is
    retried; the final beta is reported in the diagnostics.
    """
    n_ref = len(reference)
    if min_accept > n_ref:
        raise ValueError(f"min_accept={min_accept} exceeds reference size {n_ref}")
    if beta0 < 0:
        raise ValueError("beta0 must be >= 0")
    _, batch_fn = make_distance(distance)
    x_tiled = np.broadcast_to(np.asarray(x_o, dtype=float),
                              reference.xs.shape).copy()
    dists = batch_fn(reference.xs, x_tiled)

    beta = float(beta0)
    n_halvings = 0
    while True:
        acc = rng.uniform(size=n_ref) < np.exp(-beta * dists)
        if int(acc.sum()) >= min_accept:
            break
        beta /= 2.0
        n_halvings += 1
    return PosteriorSamples(
        samples=reference.thetas[acc].copy(),
        method="abc",
        beta=beta,
        observation_id=observation_id,
        diagnostics={
            "requested_beta": float(beta0),
            "final_beta": beta,
            "n_halvings": n_halvings,
            "n_accepted": int(acc.sum()),
        },
    )
