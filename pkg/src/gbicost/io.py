"""On-disk formats: datasets, target pools, observations, networks, samples.

Everything is plain CSV or JSON.  JSON is always written with sorted keys
and no timestamps, and floats go through Python's shortest round-trip repr,
so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from . import nets
from .sampling import PosteriorSamples
from .targets import ObservationSet, SimDataset, TargetSet

FORMAT_VERSION = 1


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def read_json(path: str | Path):
    return json.loads(Path(path).read_text())


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def _fmt(v: float) -> str:
    return repr(float(v))


def _write_rows(writer, rows: np.ndarray) -> None:
    for row in rows:
        writer.writerow([_fmt(v) for v in row])


def _flat2(xs: np.ndarray) -> np.ndarray:
    """Flatten set-valued rows (n, k, d) to (n, k*d); pass (n, d) through."""
    return xs.reshape(xs.shape[0], -1)


def save_dataset(path: str | Path, dataset: SimDataset, meta: dict | None = None) -> None:
    """Columnar layout: header line, then theta rows, then x rows."""
    xs = np.asarray(dataset.xs)
    n_trials = xs.shape[1] if xs.ndim == 3 else 1
    x_dim = xs.shape[-1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["task", "seed", "theta_dim", "x_dim", "n_trials", "n_rows"])
        w.writerow([dataset.task_name, dataset.seed if dataset.seed is not None else "",
                    dataset.thetas.shape[1], x_dim, n_trials, len(dataset)])
        _write_rows(w, dataset.thetas)
        _write_rows(w, _flat2(xs))
    sidecar = {
        "kind": "sim_dataset",
        "format_version": FORMAT_VERSION,
        "task": dataset.task_name,
        "seed": dataset.seed,
        "n_rows": len(dataset),
    }
    if meta:
        sidecar.update(meta)
    write_json(str(path) + ".meta.json", sidecar)


def load_dataset(path: str | Path) -> SimDataset:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[:2] != ["task", "seed"]:
            raise ValueError(f"{path}: not a dataset file")
        vals = next(r)
        task_name = vals[0]
        seed = int(vals[1]) if vals[1] != "" else None
        theta_dim, x_dim, n_trials, n_rows = (int(v) for v in vals[2:6])
        rows = [[float(v) for v in row] for row in r]
    if len(rows) != 2 * n_rows:
        raise ValueError(f"{path}: expected {2*n_rows} body rows, found {len(rows)}")
    thetas = np.asarray(rows[:n_rows]).reshape(n_rows, theta_dim)
    xs = np.asarray(rows[n_rows:])
    if n_trials > 1:
        xs = xs.reshape(n_rows, n_trials, x_dim)
    else:
        xs = xs.reshape(n_rows, x_dim)
    return SimDataset(task_name=task_name, thetas=thetas, xs=xs, seed=seed)


def save_target_set(path: str | Path, targets: TargetSet, meta: dict | None = None) -> None:
    xs = np.asarray(targets.xs)
    n_trials = xs.shape[1] if xs.ndim == 3 else 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["task", "x_dim", "n_trials", "n_rows"])
        w.writerow([targets.source or "", xs.shape[-1], n_trials, len(targets)])
        flat = _flat2(xs)
        for tag, row in zip(targets.provenance, flat):
            w.writerow([tag] + [_fmt(v) for v in row])
    sidecar = {
        "kind": "target_set",
        "format_version": FORMAT_VERSION,
        "task": targets.source,
        "n_rows": len(targets),
        "counts": {
            "raw": targets.count("raw"),
            "augmented": targets.count("augmented"),
            "observation": targets.count("observation"),
        },
        "noise_std": targets.noise_std.tolist() if targets.noise_std is not None else None,
    }
    if meta:
        sidecar.update(meta)
    write_json(str(path) + ".meta.json", sidecar)


def load_target_set(path: str | Path) -> TargetSet:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[0] != "task" or header[1] != "x_dim":
            raise ValueError(f"{path}: not a target-set file")
        vals = next(r)
        source = vals[0] or None
        x_dim, n_trials, n_rows = int(vals[1]), int(vals[2]), int(vals[3])
        tags, rows = [], []
        for row in r:
            tags.append(row[0])
            rows.append([float(v) for v in row[1:]])
    xs = np.asarray(rows)
    if n_trials > 1:
        xs = xs.reshape(n_rows, n_trials, x_dim)
    sidecar_path = Path(str(path) + ".meta.json")
    noise_std = None
    if sidecar_path.exists():
        ns = read_json(sidecar_path).get("noise_std")
        noise_std = np.asarray(ns) if ns is not None else None
    return TargetSet(xs=xs, provenance=np.asarray(tags, dtype=object),
                     noise_std=noise_std, source=source)


def save_observations(path: str | Path, groups: dict[str, ObservationSet],
                      meta: dict | None = None) -> None:
    """Groups keyed by class id, e.g. 'well_specified_seen'."""
    first = next(iter(groups.values()))
    xs = np.asarray(first.xs)
    n_trials = xs.shape[1] if xs.ndim == 3 else 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta_dim", "x_dim", "n_trials"])
        w.writerow([first.thetas.shape[1], xs.shape[-1], n_trials])
        for group_id, obs in groups.items():
            flat = _flat2(np.asarray(obs.xs))
            for i in range(len(obs)):
                w.writerow([f"{group_id}-{i}", group_id]
                           + [_fmt(v) for v in obs.thetas[i]]
                           + [_fmt(v) for v in flat[i]])
    sidecar = {"kind": "observations", "format_version": FORMAT_VERSION,
               "groups": {k: len(v) for k, v in groups.items()}}
    if meta:
        sidecar.update(meta)
    write_json(str(path) + ".meta.json", sidecar)


def load_observations(path: str | Path) -> dict[str, ObservationSet]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        if next(r)[0] != "theta_dim":
            raise ValueError(f"{path}: not an observations file")
        theta_dim, x_dim, n_trials = (int(v) for v in next(r))
        by_group: dict[str, dict] = {}
        for row in r:
            obs_id, group = row[0], row[1]
            theta = [float(v) for v in row[2 : 2 + theta_dim]]
            x = [float(v) for v in row[2 + theta_dim :]]
            g = by_group.setdefault(group, {"ids": [], "thetas": [], "xs": []})
            g["ids"].append(obs_id)
            g["thetas"].append(theta)
            g["xs"].append(x)
    out = {}
    for group, g in by_group.items():
        xs = np.asarray(g["xs"])
        if n_trials > 1:
            xs = xs.reshape(len(g["ids"]), n_trials, x_dim)
        kind = "misspecified" if group.startswith("misspecified") else "well_specified"
        out[group] = ObservationSet(xs=xs, thetas=np.asarray(g["thetas"]),
                                    kind=kind, ids=g["ids"])
    return out


def save_network(path: str | Path, params: nets.NetParams,
                 meta: dict | None = None) -> None:
    d = nets.params_to_dict(params)
    if meta:
        d["meta"] = meta
    write_json(path, d)


def load_network(path: str | Path) -> nets.NetParams:
    return nets.params_from_dict(read_json(path))


def save_samples(path: str | Path, result: PosteriorSamples,
                 meta: dict | None = None) -> None:
    samples = np.asarray(result.samples)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"theta_{i+1}" for i in range(samples.shape[1])])
        _write_rows(w, samples)
    sidecar = {
        "kind": "posterior_samples",
        "format_version": FORMAT_VERSION,
        "method": result.method,
        "beta": result.beta,
        "observation_id": result.observation_id,
        "n_samples": len(result),
        "diagnostics": result.diagnostics,
    }
    if meta:
        sidecar.update(meta)
    write_json(str(path) + ".meta.json", sidecar)


def load_samples(path: str | Path) -> PosteriorSamples:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if not header or not header[0].startswith("theta_"):
            raise ValueError(f"{path}: not a samples file")
        rows = [[float(v) for v in row] for row in r]
    meta_path = Path(str(path) + ".meta.json")
    meta = read_json(meta_path) if meta_path.exists() else {}
    return PosteriorSamples(
        samples=np.asarray(rows),
        method=meta.get("method", "unknown"),
        beta=meta.get("beta", float("nan")),
        observation_id=meta.get("observation_id"),
        diagnostics=meta.get("diagnostics", {}),
    )


REPORT_CSV_COLUMNS = [
    "task", "method", "beta", "observation_class", "status", "fail_reason",
    "n_observations", "predictive_mean", "predictive_std_over_obs",
    "c2st_mean", "c2st_std_over_obs", "cost_pearson_r", "cost_rmse",
    "final_beta_mean",
]


def save_report(json_path: str | Path, csv_path: str | Path, report: dict) -> None:
    """Machine-readable JSON plus a flat, plot-ready CSV (one row per cell)."""
    write_json(json_path, report)
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_CSV_COLUMNS)
        for cell in report["cells"]:
            row = []
            for col in REPORT_CSV_COLUMNS:
                v = cell.get(col)
                if v is None:
                    row.append("")
                elif isinstance(v, float):
                    row.append(_fmt(v))
                else:
                    row.append(v)
            w.writerow(row)
