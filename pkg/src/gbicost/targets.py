"""Training-target pools: simulations, noise-augmented copies, observations.

The cost network amortizes over a pool of target datapoints.  The pool is
the concatenation, in order, of (1) the raw prior-predictive simulations,
(2) a random subsample of them with Gaussian noise added to broaden the
support, and (3) any observations known up front.  Synthetic misspecified
observations are manufactured by pushing fresh simulations outside the
prior-predictive envelope.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distances import DistanceConfig, make_distance
from .tasks import GaussianMixture, PriorBounds, Task

__all__ = [
    "SimDataset",
    "TargetSet",
    "NoiseConfig",
    "MisspecConfig",
    "ObservationSet",
    "simulate_dataset",
    "build_target_set",
    "well_specified_observations",
    "make_misspecified_observations",
    "sample_training_pairs",
    "make_pair_sampler",
]


@dataclass
class SimDataset:
    """Paired prior draws and simulator outputs."""

    task_name: str
    thetas: np.ndarray  # (N, theta_dim)
    xs: np.ndarray  # (N, x_dim) or (N, n_trials, x_dim)
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.thetas.shape[0] != self.xs.shape[0]:
            raise ValueError("thetas and xs row counts differ")
        if self.thetas.shape[0] == 0:
            raise ValueError("empty dataset")

    def __len__(self) -> int:
        return self.thetas.shape[0]


def simulate_dataset(task: Task, n: int, rng: np.random.Generator,
                     seed: int | None = None) -> SimDataset:
    """Draw n prior samples and one simulation each."""
    if n < 1:
        raise ValueError("need n >= 1 simulations")
    thetas = task.prior_sample(n, rng)
    xs = task.simulate_batch(thetas, rng)
    return SimDataset(task_name=task.name, thetas=thetas, xs=xs, seed=seed)


PROVENANCE_RAW = "raw"
PROVENANCE_AUGMENTED = "augmented"
PROVENANCE_OBSERVATION = "observation"


@dataclass
class TargetSet:
    """Pool of target datapoints with per-row provenance."""

    xs: np.ndarray  # (T, x_dim) or (T, n_trials, x_dim)
    provenance: np.ndarray  # (T,) of strings
    noise_std: np.ndarray | None = None
    source: str | None = None

    def __post_init__(self) -> None:
        if self.xs.shape[0] != self.provenance.shape[0]:
            raise ValueError("provenance length mismatch")

    def __len__(self) -> int:
        return self.xs.shape[0]

    def count(self, tag: str) -> int:
        return int(np.sum(self.provenance == tag))


@dataclass(frozen=True)
class NoiseConfig:
    """Noise augmentation: n_augmented subsampled rows get N(0, sigma^2 I)."""

    n_augmented: int = 100
    sigma: np.ndarray | float = 1.0

    def __post_init__(self) -> None:
        if self.n_augmented < 0:
            raise ValueError("n_augmented must be >= 0")
        if np.any(np.asarray(self.sigma) <= 0):
            raise ValueError("sigma must be positive")

    @classmethod
    def from_bounds(cls, bounds: PriorBounds, n_augmented: int = 100,
                    multiplier: float = 2.0) -> "NoiseConfig":
        """Per-dimension sigma = multiplier * prior-predictive std."""
        return cls(n_augmented=n_augmented, sigma=multiplier * bounds.std)


@dataclass(frozen=True)
class MisspecConfig:
    """Settings for manufacturing out-of-envelope observations."""

    n_observations: int = 10
    step_multiplier: float = 0.5
    max_iterations: int = 10_000

    def __post_init__(self) -> None:
        if self.step_multiplier <= 0:
            raise ValueError("step_multiplier must be positive")
        if self.n_observations < 0 or self.max_iterations < 1:
            raise ValueError("invalid misspecification config")


@dataclass
class ObservationSet:
    """Synthetic observations with the parameters that generated them."""

    xs: np.ndarray  # (n, x_dim) or (n, n_trials, x_dim)
    thetas: np.ndarray  # (n, theta_dim) generating parameters
    kind: str  # "well_specified" | "misspecified"
    ids: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.ids:
            self.ids = [f"{self.kind}-{i}" for i in range(self.xs.shape[0])]

    def __len__(self) -> int:
        return self.xs.shape[0]


def build_target_set(
    sims: SimDataset,
    noise: NoiseConfig,
    observations: np.ndarray | None,
    rng: np.random.Generator,
) -> TargetSet:
    """Concatenate raw sims, noise-augmented subsample, and observations.

    The augmented rows are a uniform without-replacement subsample of the
    simulations plus N(0, sigma^2 I) noise (elementwise over points for
    set-valued outputs).  Row order and provenance tags are fixed:
    raw block, augmented block, observation block.
    """
    xs = np.asarray(sims.xs, dtype=float)
    blocks = [xs]
    tags = [np.full(xs.shape[0], PROVENANCE_RAW, dtype=object)]

    if noise.n_augmented > 0:
        if noise.n_augmented > len(sims):
            raise ValueError("cannot subsample more rows than simulations")
        pick = rng.choice(len(sims), size=noise.n_augmented, replace=False)
        eps = rng.normal(0.0, 1.0, size=xs[pick].shape) * np.asarray(noise.sigma)
        blocks.append(xs[pick] + eps)
        tags.append(np.full(noise.n_augmented, PROVENANCE_AUGMENTED, dtype=object))

    if observations is not None and len(observations) > 0:
        obs = np.asarray(observations, dtype=float)
        if obs.shape[1:] != xs.shape[1:]:
            raise ValueError(
                f"observation shape {obs.shape[1:]} != simulation shape {xs.shape[1:]}")
        blocks.append(obs)
        tags.append(np.full(obs.shape[0], PROVENANCE_OBSERVATION, dtype=object))

    sigma = np.broadcast_to(np.asarray(noise.sigma, dtype=float), (xs.shape[-1],)).copy()
    return TargetSet(
        xs=np.concatenate(blocks, axis=0),
        provenance=np.concatenate(tags),
        noise_std=sigma,
        source=sims.task_name,
    )


def well_specified_observations(task: Task, n: int,
                                rng: np.random.Generator) -> ObservationSet:
    """Fresh prior-predictive draws used as in-support observations."""
    thetas = task.prior_sample(n, rng)
    xs = task.simulate_batch(thetas, rng)
    return ObservationSet(xs=xs, thetas=thetas, kind="well_specified")


def make_misspecified_observations(
    task: Task,
    bounds: PriorBounds,
    cfg: MisspecConfig,
    rng: np.random.Generator,
) -> ObservationSet:
    """Observations the simulator cannot reproduce.

    For vector-output tasks: start from fresh prior predictives and add
    N(0, (step_multiplier * sigma_x)^2 I) repeatedly until every dimension
    falls outside the prior-predictive envelope.  For the mixture task:
    simulate with the narrow component displaced far outside the prior box.
    """
    if bounds.n_sims < 100_000:
        raise ValueError("prior-predictive bounds must come from >= 100000 sims")
    thetas = task.prior_sample(cfg.n_observations, rng)

    if isinstance(task, GaussianMixture):
        xs = task.simulate_misspecified_batch(thetas, rng)
        return ObservationSet(xs=xs, thetas=thetas, kind="misspecified")

    xs = task.simulate_batch(thetas, rng)
    step = cfg.step_multiplier * bounds.std
    active = np.arange(xs.shape[0])
    for _ in range(cfg.max_iterations):
        outside = (xs[active] < bounds.low) | (xs[active] > bounds.high)
        active = active[~outside.all(axis=1)]
        if active.size == 0:
            return ObservationSet(xs=xs, thetas=thetas, kind="misspecified")
        xs[active] += rng.normal(0.0, 1.0, size=xs[active].shape) * step
    raise RuntimeError(
        f"{active.size} observation(s) still inside the envelope after "
        f"{cfg.max_iterations} iterations")


def _draw_distinct(n_pool: int, n_rows: int, n_target: int,
                   rng: np.random.Generator) -> np.ndarray:
    """(n_rows, n_target) indices, each row distinct, uniform over the pool."""
    if n_target > n_pool:
        raise ValueError(f"cannot draw {n_target} distinct targets from {n_pool}")
    if 2 * n_target >= n_pool:
        return np.stack([rng.permutation(n_pool)[:n_target] for _ in range(n_rows)])
    idx = rng.integers(0, n_pool, size=(n_rows, n_target))
    while True:
        srt = np.sort(idx, axis=1)
        dup = (np.diff(srt, axis=1) == 0).any(axis=1)
        if not dup.any():
            return idx
        idx[dup] = rng.integers(0, n_pool, size=(int(dup.sum()), n_target))


def sample_training_pairs(
    sims: SimDataset,
    targets: TargetSet,
    n_target: int,
    distance: DistanceConfig,
    rng: np.random.Generator,
    indices: np.ndarray | None = None,
):
    """Draw per-parameter targets and compute distance labels on the fly.

    For each selected simulation i, ``n_target`` targets are drawn uniformly
    without replacement from the pool, and the labels d(x_i, x_t) are
    computed directly; no full distance matrix is ever materialized.
    Returns (theta_rows, target_rows, labels) with ``n_target`` consecutive
    rows per simulation.
    """
    if n_target < 1:
        raise ValueError("n_target must be >= 1")
    if indices is None:
        indices = np.arange(len(sims))
    indices = np.asarray(indices)
    _, batch_fn = make_distance(distance)
    pick = _draw_distinct(len(targets), indices.size, n_target, rng)
    x_t = targets.xs[pick.ravel()]
    x_sim = np.repeat(sims.xs[indices], n_target, axis=0)
    labels = batch_fn(x_sim, x_t)
    theta_rows = np.repeat(sims.thetas[indices], n_target, axis=0)
    return theta_rows, x_t, labels


def make_pair_sampler(sims: SimDataset, targets: TargetSet, distance: DistanceConfig):
    """Label sampler closure in the form the network trainer expects."""

    def sampler(indices: np.ndarray, n_target: int, rng: np.random.Generator):
        _, x_t, labels = sample_training_pairs(
            sims, targets, n_target, distance, rng, indices=indices)
        return x_t, labels

    return sampler
