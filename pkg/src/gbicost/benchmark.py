"""End-to-end benchmark: simulate, train, sample, evaluate, and report.

A benchmark run is a grid of independent cells keyed by
(task, method, beta, observation class).  Observation classes cross
well-specified/misspecified with seen/unseen (seen observations were part
of the training target pool).  Per cell, posterior samples are drawn for
each observation of the class, and three metrics are recorded: average
posterior-predictive distance, C2ST accuracy against the ground-truth GBI
sampler, and (for the amortized method) cost-prediction accuracy.

Every random stream is derived from the root seed and the cell coordinates,
so reports are byte-identical across runs and independent of parallelism.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io as gio
from . import metrics, nets, sampling, targets
from .distances import DistanceConfig, median_heuristic_bandwidth
from .rng import derive_rng
from .tasks import TASK_NAMES, Task, get_task

SCHEMA_VERSION = 1

METHODS = ("ace", "gt", "abc")
OBSERVATION_CLASSES = (
    "well_specified_seen",
    "misspecified_seen",
    "well_specified_unseen",
    "misspecified_unseen",
)

# Per-task inverse-temperature grids spanning prior-dominated to sharply
# concentrated posteriors.  These are benchmark configuration values, chosen
# so that ground-truth rejection sampling stays feasible at the top end.
DEFAULT_BETAS = {
    "uniform1d": [4.0, 20.0, 100.0],
    "two_moons": [5.0, 25.0, 125.0],
    "linear_gaussian": [1.0, 10.0, 100.0],
    "gaussian_mixture": [2.0, 10.0, 50.0],
}


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


def _take(d: dict, ctx: str):
    """Strict dict reader: every key must be consumed exactly once."""
    remaining = dict(d)

    def pop(key, default=None):
        return remaining.pop(key, default)

    def done():
        if remaining:
            raise ConfigError(f"unknown key(s) in {ctx}: {sorted(remaining)}")

    return pop, done


@dataclass(frozen=True)
class ObservationSettings:
    n_well_specified: int = 10
    n_misspecified: int = 10
    n_unseen_well_specified: int = 10
    n_unseen_misspecified: int = 10
    misspec_step_multiplier: float = 0.5
    misspec_max_iterations: int = 10_000


@dataclass(frozen=True)
class NoiseSettings:
    n_augmented: int = 100
    std_multiplier: float = 2.0


@dataclass(frozen=True)
class NetworkSettings:
    hidden_dim: int = 64
    n_hidden_layers: int = 3
    residual: bool = True
    embed_n_layers: int = 2
    embed_width: int = 100
    embed_out_dim: int = 20


@dataclass(frozen=True)
class SamplerSettings:
    n_chains: int = 100
    n_samples: int = 5000
    burn_in: int = 200
    max_stepouts: int = 50
    thin: int = 1


@dataclass(frozen=True)
class DistanceSettings:
    kind: str | None = None  # None: the task's canonical distance
    bandwidth: float | None = None  # None: median heuristic at data generation
    exponent: float = 1.0


@dataclass
class RunConfig:
    """Full pipeline settings for one task."""

    task: str
    seed: int = 0
    output_dir: str | None = None
    n_simulations: int = 10_000
    n_bounds_simulations: int = 100_000
    noise: NoiseSettings = field(default_factory=NoiseSettings)
    observations: ObservationSettings = field(default_factory=ObservationSettings)
    distance: DistanceSettings = field(default_factory=DistanceSettings)
    network: NetworkSettings = field(default_factory=NetworkSettings)
    fit: nets.FitConfig = field(default_factory=nets.FitConfig)
    betas: list[float] = field(default_factory=list)
    sampler: SamplerSettings = field(default_factory=SamplerSettings)
    abc_min_accept: int = 50
    methods: tuple[str, ...] = METHODS

    def __post_init__(self) -> None:
        if self.task not in TASK_NAMES:
            raise ConfigError(f"unknown task {self.task!r}")
        if not self.betas:
            self.betas = list(DEFAULT_BETAS[self.task])
        if any(b <= 0 for b in self.betas):
            raise ConfigError("betas must be positive")
        if self.n_simulations < 1:
            raise ConfigError("n_simulations must be >= 1")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ConfigError(f"unknown method(s): {sorted(bad)}")

    def snapshot(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        return d


def _parse_section(d, ctx, cls):
    if d is None:
        return cls()
    if not isinstance(d, dict):
        raise ConfigError(f"{ctx} must be an object")
    try:
        return cls(**d)
    except TypeError as exc:
        raise ConfigError(f"invalid {ctx}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"invalid {ctx}: {exc}") from None


def parse_run_config(d: dict, require_output: bool = False,
                     ctx: str = "config") -> RunConfig:
    """Parse and validate a single-task config dict; unknown keys rejected."""
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    pop, done = _take(d, ctx)
    version = pop("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    task = pop("task")
    if task is None:
        raise ConfigError("task is required")
    cfg = RunConfig(
        task=task,
        seed=int(pop("seed", 0)),
        output_dir=pop("output_dir"),
        n_simulations=int(pop("n_simulations", 10_000)),
        n_bounds_simulations=int(pop("n_bounds_simulations", 100_000)),
        noise=_parse_section(pop("noise"), "noise", NoiseSettings),
        observations=_parse_section(pop("observations"), "observations",
                                    ObservationSettings),
        distance=_parse_section(pop("distance"), "distance", DistanceSettings),
        network=_parse_section(pop("network"), "network", NetworkSettings),
        fit=_parse_section(pop("fit"), "fit", nets.FitConfig),
        betas=list(pop("betas") or []),
        sampler=_parse_section(pop("sampler"), "sampler", SamplerSettings),
        abc_min_accept=int(pop("abc_min_accept", 50)),
        methods=tuple(pop("methods") or METHODS),
    )
    done()
    if require_output and not cfg.output_dir:
        raise ConfigError("output_dir is required")
    return cfg


@dataclass
class BenchmarkConfig:
    seed: int
    output_dir: str | None
    methods: tuple[str, ...]
    task_configs: list[RunConfig]

    def snapshot(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "methods": list(self.methods),
            "tasks": [c.snapshot() for c in self.task_configs],
        }


def parse_benchmark_config(d: dict, require_output: bool = False) -> BenchmarkConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    pop, done = _take(d, "benchmark config")
    version = pop("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    seed = int(pop("seed", 0))
    output_dir = pop("output_dir")
    methods = tuple(pop("methods") or METHODS)
    tasks = pop("tasks")
    done()
    if not tasks:
        raise ConfigError("tasks must be a nonempty list")
    parsed = []
    for i, entry in enumerate(tasks):
        if not isinstance(entry, dict):
            raise ConfigError(f"tasks[{i}] must be an object")
        for forbidden in ("seed", "output_dir", "methods", "schema_version"):
            if forbidden in entry:
                raise ConfigError(
                    f"tasks[{i}]: {forbidden} is set at the benchmark level")
        entry = dict(entry)
        entry["schema_version"] = SCHEMA_VERSION
        entry["seed"] = seed
        entry["methods"] = list(methods)
        parsed.append(parse_run_config(entry, ctx=f"tasks[{i}]"))
    cfg = BenchmarkConfig(seed=seed, output_dir=output_dir, methods=methods,
                          task_configs=parsed)
    if require_output and not cfg.output_dir:
        raise ConfigError("output_dir is required")
    return cfg


# -- pipeline stages ----------------------------------------------------------


def resolve_distance(cfg: RunConfig, task: Task,
                     sims: targets.SimDataset) -> DistanceConfig:
    """Fill in the distance: task default kind, data-driven mmd2 bandwidth."""
    kind = cfg.distance.kind or task.default_distance.kind
    if kind == "mse":
        return DistanceConfig("mse")
    if kind == "energy":
        return DistanceConfig("energy", exponent=cfg.distance.exponent)
    bandwidth = cfg.distance.bandwidth
    if bandwidth is None:
        if task.default_distance.kind == "mmd2" and task.default_distance.bandwidth:
            bandwidth = task.default_distance.bandwidth
        else:
            pooled = np.asarray(sims.xs, dtype=float).reshape(-1, sims.xs.shape[-1])
            bandwidth = median_heuristic_bandwidth(
                pooled, rng=derive_rng(cfg.seed, cfg.task, "bandwidth"))
    return DistanceConfig("mmd2", bandwidth=float(bandwidth))


def build_observations(cfg: RunConfig, task: Task,
                       bounds) -> dict[str, targets.ObservationSet]:
    """Four observation groups with class-tagged ids, one rng stream each."""
    mis_cfg = targets.MisspecConfig(
        n_observations=0,
        step_multiplier=cfg.observations.misspec_step_multiplier,
        max_iterations=cfg.observations.misspec_max_iterations,
    )
    groups: dict[str, targets.ObservationSet] = {}
    plan = [
        ("well_specified_seen", cfg.observations.n_well_specified, False),
        ("misspecified_seen", cfg.observations.n_misspecified, True),
        ("well_specified_unseen", cfg.observations.n_unseen_well_specified, False),
        ("misspecified_unseen", cfg.observations.n_unseen_misspecified, True),
    ]
    for key, count, misspecified in plan:
        rng = derive_rng(cfg.seed, cfg.task, "observations", key)
        if misspecified:
            obs = targets.make_misspecified_observations(
                task, bounds, replace(mis_cfg, n_observations=count), rng)
        else:
            obs = targets.well_specified_observations(task, count, rng)
        obs.ids = [f"{key}-{i}" for i in range(len(obs))]
        groups[key] = obs
    return groups


def network_arch(cfg: RunConfig, task: Task) -> nets.NetArch:
    embedding = None
    if task.n_trials > 1:
        embedding = nets.SetEmbedArch(
            point_dim=task.x_dim,
            n_layers=cfg.network.embed_n_layers,
            width=cfg.network.embed_width,
            out_dim=cfg.network.embed_out_dim,
        )
    return nets.regression_arch(
        theta_dim=task.theta_dim,
        x_dim=task.x_dim,
        hidden_dim=cfg.network.hidden_dim,
        n_hidden_layers=cfg.network.n_hidden_layers,
        residual=cfg.network.residual,
        embedding=embedding,
    )


@dataclass
class TaskAssets:
    """Everything a cell needs, prepared once per task."""

    cfg: RunConfig
    sims: targets.SimDataset
    target_set: targets.TargetSet
    observations: dict[str, targets.ObservationSet]
    distance: DistanceConfig
    net: nets.NetParams | None
    fit_history: dict | None

    def task(self) -> Task:
        return get_task(self.cfg.task)


def prepare_assets(cfg: RunConfig, train: bool | None = None,
                   log=None) -> TaskAssets:
    """Simulate, build targets and observations, and train the cost network.

    ``train=None`` trains only when the amortized method is requested.
    """
    task = get_task(cfg.task)
    say = log or (lambda msg: None)

    say(f"[{cfg.task}] simulating {cfg.n_simulations} training pairs")
    sims = targets.simulate_dataset(
        task, cfg.n_simulations, derive_rng(cfg.seed, cfg.task, "simulate"),
        seed=cfg.seed)
    bounds = task.prior_predictive_bounds(
        cfg.n_bounds_simulations, derive_rng(cfg.seed, cfg.task, "bounds"))
    observations = build_observations(cfg, task, bounds)

    noise = targets.NoiseConfig.from_bounds(
        bounds, n_augmented=cfg.noise.n_augmented,
        multiplier=cfg.noise.std_multiplier)
    seen = np.concatenate([
        observations["well_specified_seen"].xs,
        observations["misspecified_seen"].xs,
    ], axis=0)
    target_set = targets.build_target_set(
        sims, noise, seen, derive_rng(cfg.seed, cfg.task, "targets"))
    distance = resolve_distance(cfg, task, sims)

    net = None
    history = None
    if train is None:
        train = "ace" in cfg.methods
    if train:
        say(f"[{cfg.task}] training cost network "
            f"(max {cfg.fit.max_epochs} epochs, batch {cfg.fit.batch_size})")
        net, history = train_cost_network(cfg, task, sims, target_set, distance)
        say(f"[{cfg.task}] training done: best validation loss "
            f"{history['best_val_loss']:.6g} at epoch {history['best_epoch']}")
    return TaskAssets(cfg=cfg, sims=sims, target_set=target_set,
                      observations=observations, distance=distance,
                      net=net, fit_history=history)


def train_cost_network(cfg: RunConfig, task: Task, sims: targets.SimDataset,
                       target_set: targets.TargetSet,
                       distance: DistanceConfig):
    arch = network_arch(cfg, task)
    params = nets.mlp_init(arch, seed=cfg.seed)
    params.set_standardization(theta_samples=sims.thetas, x_samples=target_set.xs)
    sampler = targets.make_pair_sampler(sims, target_set, distance)
    fit_cfg = replace(cfg.fit, seed=cfg.seed)
    return nets.fit_regression(params, sims.thetas, sampler, fit_cfg)


# -- posterior sampling per method --------------------------------------------


def gt_samples(assets: TaskAssets, beta: float, obs_x: np.ndarray,
               obs_theta: np.ndarray, obs_id: str) -> sampling.PosteriorSamples:
    """Ground-truth GBI sampler for one observation.

    Closed form for the linear-Gaussian task; otherwise rejection sampling
    against the exact cost.  The mixture task uses a Gaussian proposal with
    variance 50/beta centered on the posterior mode (prior proposals are
    hopeless on its 2-D box at high beta); the remaining tasks propose
    from the prior.
    """
    cfg = assets.cfg
    task = assets.task()
    rng = derive_rng(cfg.seed, cfg.task, "gt", repr(float(beta)), obs_id)
    n = cfg.sampler.n_samples
    if cfg.task == "linear_gaussian":
        posterior = sampling.linear_gaussian_gt(beta, obs_x, task)
        return sampling.PosteriorSamples(
            samples=posterior.sample(n, rng), method="gt-analytic",
            beta=beta, observation_id=obs_id,
            diagnostics={"mean": posterior.mean.tolist(), "var": posterior.var})
    proposal = None
    if cfg.task == "gaussian_mixture":
        proposal = sampling.mode_centered_proposal(task, beta, obs_x,
                                                   assets.distance)
    return sampling.rejection_sample_gt(
        task, beta, obs_x, n, rng, proposal=proposal,
        distance=assets.distance, observation_id=obs_id)


def ace_samples(assets: TaskAssets, beta: float, obs_x: np.ndarray,
                obs_id: str) -> sampling.PosteriorSamples:
    cfg = assets.cfg
    task = assets.task()
    if assets.net is None:
        raise RuntimeError("amortized sampling requires a trained network")
    potential = sampling.Potential.from_net(assets.net, task, beta, obs_x)
    slice_cfg = sampling.SliceConfig(
        n_chains=cfg.sampler.n_chains,
        n_samples=cfg.sampler.n_samples,
        burn_in=cfg.sampler.burn_in,
        step_width=task.prior_std(),
        max_stepouts=cfg.sampler.max_stepouts,
        thin=cfg.sampler.thin,
    )
    rng = derive_rng(cfg.seed, cfg.task, "ace", repr(float(beta)), obs_id)
    out = sampling.slice_sample(potential, slice_cfg, rng, method="ace",
                                observation_id=obs_id)
    return out


def abc_samples(assets: TaskAssets, beta: float, obs_x: np.ndarray,
                obs_id: str) -> sampling.PosteriorSamples:
    cfg = assets.cfg
    rng = derive_rng(cfg.seed, cfg.task, "abc", repr(float(beta)), obs_id)
    return sampling.abc_kernel_sample(
        assets.sims, obs_x, assets.distance, beta, rng,
        min_accept=cfg.abc_min_accept, observation_id=obs_id)


def posterior_samples(assets: TaskAssets, method: str, beta: float,
                      obs_x, obs_theta, obs_id: str) -> sampling.PosteriorSamples:
    if method == "ace":
        return ace_samples(assets, beta, obs_x, obs_id)
    if method == "gt":
        return gt_samples(assets, beta, obs_x, obs_theta, obs_id)
    if method == "abc":
        return abc_samples(assets, beta, obs_x, obs_id)
    raise ValueError(f"unknown method {method!r}")


# -- cells ---------------------------------------------------------------


def cell_key(cfg: RunConfig, method: str, beta: float, obs_class: str) -> dict:
    return {
        "task": cfg.task,
        "method": method,
        "beta": beta,
        "observation_class": obs_class,
        "config": cfg.snapshot(),
    }


def run_cell(assets: TaskAssets, method: str, beta: float,
             obs_class: str) -> dict:
    """Execute one benchmark cell; exceptions become a failed-cell record."""
    cfg = assets.cfg
    cell = {
        "task": cfg.task,
        "method": method,
        "beta": beta,
        "observation_class": obs_class,
        "status": "ok",
        "fail_reason": None,
    }
    try:
        cell.update(_run_cell_inner(assets, method, beta, obs_class))
    except Exception as exc:  # cell failures must not abort the run
        cell["status"] = "failed"
        cell["fail_reason"] = f"{type(exc).__name__}: {exc}"
    return cell


def _run_cell_inner(assets: TaskAssets, method: str, beta: float,
                    obs_class: str) -> dict:
    cfg = assets.cfg
    task = assets.task()
    group = assets.observations[obs_class]
    per_obs = []
    pred_means = []
    c2sts = []
    final_betas = []
    cost_pred = []
    cost_true = []

    for i, obs_id in enumerate(group.ids):
        obs_x = group.xs[i]
        obs_theta = group.thetas[i]
        result = posterior_samples(assets, method, beta, obs_x, obs_theta, obs_id)

        pd_rng = derive_rng(cfg.seed, cfg.task, "predictive", method,
                            repr(float(beta)), obs_id)
        pd_mean, pd_std = metrics.predictive_distance(
            task, result.samples, obs_x, assets.distance, pd_rng)

        record = {
            "observation_id": obs_id,
            "n_samples": len(result),
            "predictive_mean": pd_mean,
            "predictive_std": pd_std,
            "c2st": None,
        }
        if method == "abc":
            final_betas.append(result.diagnostics["final_beta"])

        if method != "gt":
            gt = gt_samples(assets, beta, obs_x, obs_theta, obs_id)
            n_common = min(len(result), len(gt))
            # C2ST needs enough samples per class to mean anything (ABC can
            # legitimately return as few as min_accept).
            if n_common >= 100:
                c2st_rng = derive_rng(cfg.seed, cfg.task, "c2st", method,
                                      repr(float(beta)), obs_id)
                record["c2st"] = metrics.c2st(
                    result.samples[:n_common], gt.samples[:n_common],
                    metrics.C2stConfig(), c2st_rng)
                c2sts.append(record["c2st"])

        if method == "ace":
            k = min(100, len(result))
            ca = metrics.cost_accuracy(
                assets.net, task, result.samples[:k], obs_x, assets.distance)
            cost_pred.append(ca.predicted)
            cost_true.append(ca.true)

        pred_means.append(pd_mean)
        per_obs.append(record)

    out = {
        "n_observations": len(group.ids),
        "predictive_mean": float(np.mean(pred_means)),
        "predictive_std_over_obs": float(np.std(pred_means)),
        "c2st_mean": float(np.mean(c2sts)) if c2sts else None,
        "c2st_std_over_obs": float(np.std(c2sts)) if c2sts else None,
        "cost_pearson_r": None,
        "cost_rmse": None,
        "final_beta_mean": float(np.mean(final_betas)) if final_betas else None,
        "per_observation": per_obs,
    }
    if cost_pred:
        pred = np.concatenate(cost_pred)
        true = np.concatenate(cost_true)
        out["cost_rmse"] = float(np.sqrt(np.mean((pred - true) ** 2)))
        if np.std(pred) > 0 and np.std(true) > 0:
            out["cost_pearson_r"] = float(np.corrcoef(pred, true)[0, 1])
    return out


def _cell_worker(payload):
    assets, method, beta, obs_class = payload
    return run_cell(assets, method, beta, obs_class)


def run_benchmark(config: BenchmarkConfig, jobs: int = 1,
                  output_dir: str | None = None, resume: bool = False,
                  log=None) -> dict:
    """Run all cells and assemble the report.

    If ``output_dir`` is set, per-cell results are persisted under
    ``cells/<hash>.json``; with ``resume=True``, cells whose hash already
    exists are loaded instead of recomputed.  Cell hashing covers the full
    task configuration, so a config change invalidates prior cells.
    """
    say = log or (lambda msg: None)
    cells_dir = None
    out_dir = output_dir or config.output_dir
    if out_dir:
        cells_dir = Path(out_dir) / "cells"
        cells_dir.mkdir(parents=True, exist_ok=True)

    specs = []  # (cell_hash, task_cfg, method, beta, obs_class)
    for task_cfg in config.task_configs:
        for method in config.methods:
            for beta in task_cfg.betas:
                for obs_class in OBSERVATION_CLASSES:
                    h = gio.config_hash(cell_key(task_cfg, method, beta, obs_class))
                    specs.append((h, task_cfg, method, beta, obs_class))

    results: dict[str, dict] = {}
    pending: list[tuple[str, RunConfig, str, float, str]] = []
    for spec in specs:
        h = spec[0]
        path = cells_dir / f"{h}.json" if cells_dir else None
        if resume and path and path.exists():
            results[h] = gio.read_json(path)
            say(f"resume: loaded cell {spec[1].task}/{spec[2]}/beta={spec[3]}/{spec[4]}")
        else:
            pending.append(spec)

    needed_tasks = {s[1].task for s in pending}
    assets_by_task: dict[str, TaskAssets] = {}
    for task_cfg in config.task_configs:
        if task_cfg.task in needed_tasks:
            assets_by_task[task_cfg.task] = prepare_assets(task_cfg, log=say)

    payloads = [(assets_by_task[s[1].task], s[2], s[3], s[4]) for s in pending]
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            computed = list(pool.map(_cell_worker, payloads))
    else:
        computed = []
        for p in payloads:
            say(f"cell: {p[0].cfg.task}/{p[1]}/beta={p[2]}/{p[3]}")
            computed.append(_cell_worker(p))

    for spec, cell in zip(pending, computed):
        h = spec[0]
        results[h] = cell
        if cells_dir:
            gio.write_json(cells_dir / f"{h}.json", cell)

    cells = [results[s[0]] for s in specs]
    report = {
        "schema_version": SCHEMA_VERSION,
        "seed": config.seed,
        "config": config.snapshot(),
        "config_hash": gio.config_hash(config.snapshot()),
        "cells": cells,
    }
    if out_dir:
        gio.save_report(Path(out_dir) / "report.json",
                        Path(out_dir) / "report.csv", report)
    return report
