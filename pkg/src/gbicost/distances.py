"""Distance functions between simulator outputs.

Three distances are supported, all symmetric and zero on identical inputs:

* ``mse``    -- squared Euclidean distance averaged over dimensions,
* ``mmd2``   -- biased (V-statistic) squared maximum mean discrepancy with a
  Gaussian kernel ``k(a, b) = exp(-|a-b|^2 / (2 gamma^2))``,
* ``energy`` -- V-statistic energy distance with exponent ``p in (0, 2)``.

The set distances accept 2-D arrays of shape ``(n_points, dim)``; plain
vectors are treated as one-point sets.  Biased estimators are used throughout
so that identical sets score exactly zero and all values are nonnegative,
which kernel-acceptance sampling relies on (acceptance probabilities <= 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DistanceConfig",
    "mse_distance",
    "mmd2_biased",
    "energy_distance",
    "median_heuristic_bandwidth",
    "mse_batch",
    "mmd2_batch",
    "energy_batch",
    "make_distance",
]


@dataclass(frozen=True)
class DistanceConfig:
    """Identifies a distance function and its parameters.

    ``bandwidth`` is the Gaussian-kernel scale gamma for ``mmd2``; ``exponent``
    is the power p for ``energy``.  The exponent is named p rather than beta
    to avoid any collision with the inverse temperature.
    """

    kind: str = "mse"
    bandwidth: float | None = None
    exponent: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("mse", "mmd2", "energy"):
            raise ValueError(f"unknown distance kind: {self.kind!r}")
        if self.kind == "mmd2" and self.bandwidth is not None and self.bandwidth <= 0:
            raise ValueError("mmd2 bandwidth must be > 0")
        if self.kind == "energy" and not 0 < self.exponent < 2:
            raise ValueError("energy exponent must lie in (0, 2)")


def mse_distance(x: np.ndarray, y: np.ndarray) -> float:
    """Squared error averaged over dimensions: ``mean((x - y)^2)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return float(np.mean((x - y) ** 2))


def _as_set(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("expected a nonempty (n_points, dim) array")
    return pts


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Direct differences: identical points give exactly 0, which matters
    # when the result is raised to a small power.
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def mmd2_biased(set_x: np.ndarray, set_y: np.ndarray, bandwidth: float) -> float:
    """Biased MMD^2 estimator with Gaussian kernel of scale ``bandwidth``.

    mean k(X, X) + mean k(Y, Y) - 2 mean k(X, Y), each mean taken over all
    ordered pairs (V-statistic).  Nonnegative, zero iff the sets are equal
    as point multisets.
    """
    if bandwidth <= 0:
        raise ValueError("bandwidth must be > 0")
    x = _as_set(set_x)
    y = _as_set(set_y)
    if x.shape[1] != y.shape[1]:
        raise ValueError("point dimensions differ")
    c = 2.0 * bandwidth**2
    kxx = np.exp(-_sq_dists(x, x) / c).mean()
    kyy = np.exp(-_sq_dists(y, y) / c).mean()
    kxy = np.exp(-_sq_dists(x, y) / c).mean()
    return float(max(kxx + kyy - 2.0 * kxy, 0.0))


def energy_distance(set_x: np.ndarray, set_y: np.ndarray, exponent: float = 1.0) -> float:
    """V-statistic energy distance with exponent ``p in (0, 2)``.

    2 mean |x_i - y_j|^p - mean |x_i - x_i'|^p - mean |y_j - y_j'|^p.
    """
    if not 0 < exponent < 2:
        raise ValueError("exponent must lie in (0, 2)")
    x = _as_set(set_x)
    y = _as_set(set_y)
    if x.shape[1] != y.shape[1]:
        raise ValueError("point dimensions differ")
    p = exponent / 2.0  # applied to squared distances
    cross = (_sq_dists(x, y) ** p).mean()
    within_x = (_sq_dists(x, x) ** p).mean()
    within_y = (_sq_dists(y, y) ** p).mean()
    return float(max(2.0 * cross - within_x - within_y, 0.0))


def median_heuristic_bandwidth(
    points: np.ndarray,
    rng: np.random.Generator | None = None,
    max_points: int = 1000,
) -> float:
    """Median pairwise Euclidean distance over a pooled subsample.

    ``points`` is an ``(n, dim)`` pool (flatten sets before calling).  When
    the pool exceeds ``max_points`` a uniform subsample is taken, so pass a
    seeded ``rng`` for reproducibility.  Raises if all points coincide.
    """
    pts = _as_set(points)
    if pts.shape[0] < 2:
        raise ValueError("need at least 2 points")
    if pts.shape[0] > max_points:
        if rng is None:
            rng = np.random.default_rng(0)
        idx = rng.choice(pts.shape[0], size=max_points, replace=False)
        pts = pts[idx]
    iu = np.triu_indices(pts.shape[0], k=1)
    dists = np.sqrt(_sq_dists(pts, pts)[iu])
    med = float(np.median(dists))
    if med <= 0.0:
        raise ValueError("all points identical; bandwidth undefined")
    return med


# -- batched variants used in the training loop and evaluation ---------------
#
# Shapes: vector batches are (B, D); set batches are (B, K, D).  Each function
# returns a length-B vector of distances between corresponding rows.


def mse_batch(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    axes = tuple(range(1, x.ndim))
    return np.mean((x - y) ** 2, axis=axes)


def _sq_dists_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, :, None, :] - b[:, None, :, :]
    return np.einsum("bijk,bijk->bij", diff, diff)


def mmd2_batch(sets_x: np.ndarray, sets_y: np.ndarray, bandwidth: float) -> np.ndarray:
    if bandwidth <= 0:
        raise ValueError("bandwidth must be > 0")
    x = np.asarray(sets_x, dtype=float)
    y = np.asarray(sets_y, dtype=float)
    c = 2.0 * bandwidth**2
    kxx = np.exp(-_sq_dists_batch(x, x) / c).mean(axis=(1, 2))
    kyy = np.exp(-_sq_dists_batch(y, y) / c).mean(axis=(1, 2))
    kxy = np.exp(-_sq_dists_batch(x, y) / c).mean(axis=(1, 2))
    return np.maximum(kxx + kyy - 2.0 * kxy, 0.0)


def energy_batch(sets_x: np.ndarray, sets_y: np.ndarray, exponent: float = 1.0) -> np.ndarray:
    if not 0 < exponent < 2:
        raise ValueError("exponent must lie in (0, 2)")
    x = np.asarray(sets_x, dtype=float)
    y = np.asarray(sets_y, dtype=float)
    p = exponent / 2.0
    cross = (_sq_dists_batch(x, y) ** p).mean(axis=(1, 2))
    wx = (_sq_dists_batch(x, x) ** p).mean(axis=(1, 2))
    wy = (_sq_dists_batch(y, y) ** p).mean(axis=(1, 2))
    return np.maximum(2.0 * cross - wx - wy, 0.0)


def make_distance(cfg: DistanceConfig):
    """Resolve a config to ``(pairwise, batched)`` callables.

    ``pairwise(x, y) -> float`` takes single outputs (vector or point set);
    ``batched(X, Y) -> (B,) array`` takes stacked outputs.  For mmd2 the
    bandwidth must already be resolved to a number.
    """
    if cfg.kind == "mse":
        return mse_distance, mse_batch
    if cfg.kind == "mmd2":
        if cfg.bandwidth is None:
            raise ValueError("mmd2 bandwidth unresolved; set it explicitly "
                             "or via median_heuristic_bandwidth")
        gamma = float(cfg.bandwidth)

        def pair_mmd(x, y):
            return mmd2_biased(x, y, gamma)

        def batch_mmd(xs, ys):
            xs = np.asarray(xs, dtype=float)
            ys = np.asarray(ys, dtype=float)
            if xs.ndim == 2:  # vectors as one-point sets
                xs = xs[:, None, :]
                ys = ys[:, None, :]
            return mmd2_batch(xs, ys, gamma)

        return pair_mmd, batch_mmd
    # energy
    p = float(cfg.exponent)

    def pair_energy(x, y):
        return energy_distance(x, y, p)

    def batch_energy(xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim == 2:
            xs = xs[:, None, :]
            ys = ys[:, None, :]
        return energy_batch(xs, ys, p)

    return pair_energy, batch_energy
