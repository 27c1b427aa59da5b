"""Command-line pipeline: gen-data, train, sample, benchmark.

Every command takes a JSON config (strictly validated, versioned) and is
reproducible from (config, seed) alone.  Exit codes: 0 success, 2 invalid
config or arguments, 3 partial success (failed benchmark cells, or training
that hit the epoch cap without converging; best-so-far artifacts are still
written), 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import benchmark as bench
from . import io as gio
from . import nets, sampling, targets
from .benchmark import ConfigError
from .rng import derive_rng
from .tasks import get_task

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3
EXIT_NUMERICAL = 4

SAMPLE_METHODS = ("ace", "gt-rejection", "gt-analytic", "abc")


def _load_run_config(args) -> bench.RunConfig:
    cfg_dict = gio.read_json(args.config)
    cfg = bench.parse_run_config(cfg_dict)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        cfg.fit = replace(cfg.fit, seed=args.seed)
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    return cfg


def _require_out(cfg) -> Path:
    if not cfg.output_dir:
        raise ConfigError("no output directory: set output_dir or pass --out")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen_data(args) -> int:
    cfg = _load_run_config(args)
    out = _require_out(cfg)
    assets = bench.prepare_assets(cfg, train=False, log=print)
    snapshot = cfg.snapshot()
    provenance = {
        "kind": "run_provenance",
        "schema_version": bench.SCHEMA_VERSION,
        "config": snapshot,
        "config_hash": gio.config_hash(snapshot),
        "resolved_distance": {
            "kind": assets.distance.kind,
            "bandwidth": assets.distance.bandwidth,
            "exponent": assets.distance.exponent,
        },
    }
    gio.save_dataset(out / "dataset.csv", assets.sims,
                     meta={"config_hash": provenance["config_hash"]})
    gio.save_target_set(out / "targets.csv", assets.target_set,
                        meta={"config_hash": provenance["config_hash"]})
    gio.save_observations(out / "observations.csv", assets.observations,
                          meta={"config_hash": provenance["config_hash"]})
    gio.write_json(out / "provenance.json", provenance)
    n = len(assets.target_set)
    print(f"wrote dataset ({len(assets.sims)} sims), target set ({n} rows), "
          f"observations to {out}")
    return EXIT_OK


def _load_data_dir(data_dir: str):
    data = Path(data_dir)
    sims = gio.load_dataset(data / "dataset.csv")
    target_set = gio.load_target_set(data / "targets.csv")
    observations = gio.load_observations(data / "observations.csv")
    provenance = gio.read_json(data / "provenance.json")
    return sims, target_set, observations, provenance


def _distance_from_provenance(provenance: dict):
    from .distances import DistanceConfig

    d = provenance["resolved_distance"]
    return DistanceConfig(kind=d["kind"], bandwidth=d["bandwidth"],
                          exponent=d["exponent"])


def cmd_train(args) -> int:
    cfg = _load_run_config(args)
    sims, target_set, _obs, provenance = _load_data_dir(args.data)
    if sims.task_name != cfg.task:
        raise ConfigError(
            f"dataset task {sims.task_name!r} does not match config task {cfg.task!r}")
    out = Path(cfg.output_dir) if cfg.output_dir else Path(args.data)
    out.mkdir(parents=True, exist_ok=True)

    task = get_task(cfg.task)
    distance = _distance_from_provenance(provenance)
    print(f"[{cfg.task}] training on {len(sims)} simulations, "
          f"{len(target_set)} targets")
    net, history = bench.train_cost_network(cfg, task, sims, target_set, distance)

    epochs_run = len(history["train_loss"])
    converged = epochs_run < cfg.fit.max_epochs
    gio.save_network(out / "network.json", net, meta={
        "task": cfg.task,
        "seed": cfg.seed,
        "config_hash": gio.config_hash(cfg.snapshot()),
        "best_epoch": history["best_epoch"],
        "best_val_loss": history["best_val_loss"],
        "epochs_run": epochs_run,
        "converged": converged,
    })
    with open(out / "training_log.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_loss", "val_loss"])
        for i, (tl, vl) in enumerate(zip(history["train_loss"],
                                         history["val_loss"])):
            w.writerow([i, repr(tl), repr(vl)])
    print(f"saved network.json (best epoch {history['best_epoch']}, "
          f"validation loss {history['best_val_loss']:.6g})")
    if not converged:
        print(f"warning: no convergence within {cfg.fit.max_epochs} epochs; "
              "best-so-far network saved", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_sample(args) -> int:
    cfg = _load_run_config(args)
    if args.method not in SAMPLE_METHODS:
        raise ConfigError(f"method must be one of {SAMPLE_METHODS}")
    if args.beta is None or args.beta <= 0:
        raise ConfigError("--beta must be a positive number")
    if args.method == "gt-analytic" and cfg.task != "linear_gaussian":
        raise ConfigError("gt-analytic is only defined for the linear_gaussian task")
    if args.method == "ace" and not (args.net or args.oracle):
        raise ConfigError("method ace needs --net FILE or --oracle")

    sims, _target_set, observations, provenance = _load_data_dir(args.data)
    task = get_task(cfg.task)
    distance = _distance_from_provenance(provenance)
    out = _require_out(cfg)
    samples_dir = out / "samples"
    samples_dir.mkdir(exist_ok=True)

    net = None
    if args.net:
        net = gio.load_network(args.net)

    selected = []
    for group in observations.values():
        for i, obs_id in enumerate(group.ids):
            if args.observation_id and obs_id != args.observation_id:
                continue
            selected.append((obs_id, group.xs[i], group.thetas[i]))
    if not selected:
        raise ConfigError(f"observation id {args.observation_id!r} not found")

    beta = float(args.beta)
    for obs_id, obs_x, obs_theta in selected:
        result = _sample_one(cfg, task, distance, sims, net, args.method,
                             args.oracle, beta, obs_x, obs_theta, obs_id)
        stem = f"{args.method}-beta{beta:g}-{obs_id}"
        gio.save_samples(samples_dir / f"{stem}.csv", result,
                         meta={"seed": cfg.seed, "task": cfg.task})
        print(f"wrote {len(result)} samples: samples/{stem}.csv")
    return EXIT_OK


def _sample_one(cfg, task, distance, sims, net, method, use_oracle, beta,
                obs_x, obs_theta, obs_id):
    if method == "ace":
        if use_oracle:
            potential = sampling.Potential.from_oracle(task, beta, obs_x, distance)
        else:
            potential = sampling.Potential.from_net(net, task, beta, obs_x)
        slice_cfg = sampling.SliceConfig(
            n_chains=cfg.sampler.n_chains,
            n_samples=cfg.sampler.n_samples,
            burn_in=cfg.sampler.burn_in,
            step_width=task.prior_std(),
            max_stepouts=cfg.sampler.max_stepouts,
            thin=cfg.sampler.thin,
        )
        rng = derive_rng(cfg.seed, cfg.task, "ace", repr(beta), obs_id)
        return sampling.slice_sample(potential, slice_cfg, rng, method="ace",
                                     observation_id=obs_id)
    if method == "gt-rejection":
        rng = derive_rng(cfg.seed, cfg.task, "gt", repr(beta), obs_id)
        proposal = None
        if cfg.task == "gaussian_mixture":
            proposal = sampling.mode_centered_proposal(task, beta, obs_x, distance)
        return sampling.rejection_sample_gt(
            task, beta, obs_x, cfg.sampler.n_samples, rng,
            proposal=proposal, distance=distance, observation_id=obs_id)
    if method == "gt-analytic":
        rng = derive_rng(cfg.seed, cfg.task, "gt", repr(beta), obs_id)
        posterior = sampling.linear_gaussian_gt(beta, obs_x, task)
        return sampling.PosteriorSamples(
            samples=posterior.sample(cfg.sampler.n_samples, rng),
            method="gt-analytic", beta=beta, observation_id=obs_id,
            diagnostics={"mean": posterior.mean.tolist(), "var": posterior.var})
    # abc
    rng = derive_rng(cfg.seed, cfg.task, "abc", repr(beta), obs_id)
    return sampling.abc_kernel_sample(sims, obs_x, distance, beta, rng,
                                      min_accept=cfg.abc_min_accept,
                                      observation_id=obs_id)


def cmd_benchmark(args) -> int:
    cfg_dict = gio.read_json(args.config)
    cfg = bench.parse_benchmark_config(cfg_dict)
    if args.seed is not None:
        cfg = bench.parse_benchmark_config(
            {**cfg_dict, "seed": args.seed})
    out_dir = args.out or cfg.output_dir
    if not out_dir:
        raise ConfigError("no output directory: set output_dir or pass --out")
    report = bench.run_benchmark(cfg, jobs=args.jobs, output_dir=out_dir,
                                 resume=args.resume, log=print)
    n_failed = sum(1 for c in report["cells"] if c["status"] != "ok")
    n_total = len(report["cells"])
    print(f"report written to {out_dir} ({n_total - n_failed}/{n_total} cells ok)")
    if n_failed == n_total:
        return EXIT_NUMERICAL
    if n_failed > 0:
        return EXIT_PARTIAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gbicost",
        description="Generalized Bayesian inference with an amortized cost network",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="simulate and write dataset, targets, observations")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="train the cost network on generated data")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True, help="directory written by gen-data")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("sample", help="draw generalized-posterior samples")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True, help="directory written by gen-data")
    p.add_argument("--method", required=True, choices=SAMPLE_METHODS)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--net", help="trained network file (method ace)")
    p.add_argument("--oracle", action="store_true",
                   help="use the exact cost oracle instead of a network")
    p.add_argument("--observation-id", help="sample a single observation")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("benchmark", help="run the full benchmark grid")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--resume", action="store_true",
                   help="skip cells already present in the output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
