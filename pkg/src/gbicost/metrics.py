"""Posterior evaluation: predictive distance, C2ST, cost-prediction accuracy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import nets
from .distances import DistanceConfig, make_distance
from .rng import derive_rng
from .tasks import Task

__all__ = [
    "predictive_distance",
    "C2stConfig",
    "c2st",
    "CostAccuracy",
    "cost_accuracy",
]


def predictive_distance(
    task: Task,
    samples: np.ndarray,
    x_o: np.ndarray,
    distance: DistanceConfig,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Mean and std of d(sim(theta), x_o) over one fresh simulation per sample."""
    thetas = np.asarray(samples, dtype=float)
    if thetas.ndim != 2 or thetas.shape[0] == 0:
        raise ValueError("samples must be a nonempty (M, theta_dim) array")
    sims = task.simulate_batch(thetas, rng)
    _, batch_fn = make_distance(distance)
    x_tiled = np.broadcast_to(np.asarray(x_o, dtype=float), sims.shape).copy()
    dists = batch_fn(sims, x_tiled)
    return float(np.mean(dists)), float(np.std(dists))


@dataclass(frozen=True)
class C2stConfig:
    """Classifier two-sample test settings.

    A plain MLP (``n_hidden_layers`` x ``hidden_dim``) is trained with MSE
    on 0/1 labels; held-out accuracy is averaged over ``n_folds``
    cross-validation folds.  Inputs are z-scored by pooled statistics.
    """

    hidden_dim: int = 100
    n_hidden_layers: int = 2
    n_folds: int = 5
    batch_size: int = 500
    max_epochs: int = 100
    patience_epochs: int = 15
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_folds < 2:
            raise ValueError("need at least 2 folds")


def c2st(samples_a: np.ndarray, samples_b: np.ndarray,
         cfg: C2stConfig | None = None,
         rng: np.random.Generator | None = None) -> float:
    """Cross-validated accuracy of a classifier separating the two sample sets.

    0.5 means indistinguishable; 1.0 means fully separable.
    """
    cfg = cfg or C2stConfig()
    a = np.asarray(samples_a, dtype=float)
    b = np.asarray(samples_b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError("sample sets must be 2-D with equal dimensionality")
    if min(a.shape[0], b.shape[0]) < 100:
        raise ValueError("need at least 100 samples per set")

    pooled = np.concatenate([a, b], axis=0)
    labels = np.concatenate([np.zeros(a.shape[0]), np.ones(b.shape[0])])
    std = pooled.std(axis=0)
    if np.any(std == 0):
        raise ValueError("pooled data has a zero-variance dimension")
    feats = (pooled - pooled.mean(axis=0)) / std

    if rng is None:
        rng = derive_rng(cfg.seed, "c2st")
    n = feats.shape[0]
    order = rng.permutation(n)
    folds = np.array_split(order, cfg.n_folds)

    arch = nets.regression_arch(
        theta_dim=feats.shape[1], x_dim=0,
        hidden_dim=cfg.hidden_dim, n_hidden_layers=cfg.n_hidden_layers,
        residual=False)
    accuracies = []
    for k, test_idx in enumerate(folds):
        train_idx = np.concatenate([f for j, f in enumerate(folds) if j != k])
        x_train = feats[train_idx]
        y_train = labels[train_idx]

        def label_sampler(indices, n_target, _rng, y=y_train):
            return None, np.repeat(y[indices], n_target)

        fit_cfg = nets.FitConfig(
            batch_size=cfg.batch_size,
            n_target_train=1,
            n_target_val=1,
            patience_epochs=cfg.patience_epochs,
            max_epochs=cfg.max_epochs,
            learning_rate=cfg.learning_rate,
            seed=int(rng.integers(2**31)),
        )
        params = nets.mlp_init(arch, seed=int(rng.integers(2**31)))
        trained, _ = nets.fit_regression(params, x_train, label_sampler, fit_cfg)
        preds = nets.forward(trained, feats[test_idx]) > 0.5
        accuracies.append(float(np.mean(preds == (labels[test_idx] > 0.5))))
    return float(np.mean(accuracies))


@dataclass
class CostAccuracy:
    """Predicted-vs-true cost pairs with summary statistics."""

    predicted: np.ndarray
    true: np.ndarray
    pearson_r: float
    rmse: float
    degenerate: bool = False


def cost_accuracy(
    cost_source,
    task: Task,
    thetas: np.ndarray,
    x_o: np.ndarray,
    distance: DistanceConfig | None = None,
) -> CostAccuracy:
    """Compare cost predictions against the oracle on given thetas.

    ``cost_source`` is either trained NetParams or a callable
    ``(thetas, x_o, distance=None) -> (n,)``.  A constant predictor (or
    constant truth) makes the correlation undefined; that case is flagged
    rather than raising.
    """
    thetas = np.asarray(thetas, dtype=float)
    x = np.asarray(x_o, dtype=float)
    if isinstance(cost_source, nets.NetParams):
        x_tiled = np.broadcast_to(x, (thetas.shape[0],) + x.shape).copy()
        predicted = np.atleast_1d(nets.forward(cost_source, thetas, x_tiled))
    else:
        predicted = np.asarray(cost_source(thetas, x_o, distance), dtype=float)
    true = task.true_cost_batch(thetas, x_o, distance)
    rmse = float(np.sqrt(np.mean((predicted - true) ** 2)))
    if np.std(predicted) == 0 or np.std(true) == 0:
        return CostAccuracy(predicted, true, math.nan, rmse, degenerate=True)
    r = float(np.corrcoef(predicted, true)[0, 1])
    return CostAccuracy(predicted, true, r, rmse)
