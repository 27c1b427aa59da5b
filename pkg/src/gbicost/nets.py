"""Dense regression networks with manual backprop, trained by Adam on MSE.

The trunk is a residual MLP: an affine input projection, ``n_hidden_layers``
pre-activation residual blocks ``h <- h + W2 @ relu(W1 @ relu(h) + b1) + b2``
on a constant hidden width, and an affine scalar output head.  With
``residual=False`` the trunk is a plain MLP with relu after every hidden
affine layer.

Inputs are a parameter vector ``theta`` and an optional data vector ``x``
(or a set of exchangeable points, reduced by a permutation-invariant
embedding before entering the trunk).  Both are standardized with stored
per-dimension statistics so that a saved network reproduces training-time
behaviour exactly.

Everything runs in float64 on numpy; no GPU, no autograd framework.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .rng import derive_rng

__all__ = [
    "SetEmbedArch",
    "NetArch",
    "regression_arch",
    "NetParams",
    "mlp_init",
    "forward",
    "backward",
    "AdamState",
    "adam_step",
    "FitConfig",
    "fit_regression",
]


@dataclass(frozen=True)
class SetEmbedArch:
    """Permutation-invariant embedding for sets of exchangeable points.

    Each point runs through ``n_layers`` hidden layers of ``width`` units
    (relu) and an affine projection to ``out_dim``; the per-point embeddings
    are then mean-pooled.  Pooling sums values in sorted order so the output
    is bit-for-bit invariant under any permutation of the points.
    """

    point_dim: int
    n_layers: int = 2
    width: int = 100
    out_dim: int = 20
    pooling: str = "mean"

    def __post_init__(self) -> None:
        if min(self.point_dim, self.n_layers, self.width, self.out_dim) < 1:
            raise ValueError("all embedding dimensions must be >= 1")
        if self.pooling != "mean":
            raise ValueError("only mean pooling is supported")

    def layer_widths(self) -> list[int]:
        return [self.point_dim] + [self.width] * self.n_layers + [self.out_dim]


@dataclass(frozen=True)
class NetArch:
    """Architecture of the scalar regression network.

    ``input_dim`` is the trunk input width: ``theta_dim`` plus either
    ``x_dim`` or, when an embedding is present, its ``out_dim``.  With
    ``residual=True``, ``n_hidden_layers`` counts two-layer residual blocks
    on the constant ``hidden_dim`` width.
    """

    input_dim: int
    theta_dim: int
    x_dim: int = 0
    hidden_dim: int = 64
    n_hidden_layers: int = 3
    residual: bool = True
    activation: str = "relu"
    embedding: SetEmbedArch | None = None

    def __post_init__(self) -> None:
        if min(self.input_dim, self.theta_dim, self.hidden_dim, self.n_hidden_layers) < 1:
            raise ValueError("all dimensions must be >= 1")
        if self.x_dim < 0:
            raise ValueError("x_dim must be >= 0")
        if self.activation != "relu":
            raise ValueError("only relu is supported")
        expected = self.theta_dim + (self.embedding.out_dim if self.embedding else self.x_dim)
        if self.input_dim != expected:
            raise ValueError(f"input_dim {self.input_dim} != theta_dim + data width {expected}")


def regression_arch(
    theta_dim: int,
    x_dim: int = 0,
    hidden_dim: int = 64,
    n_hidden_layers: int = 3,
    residual: bool = True,
    embedding: SetEmbedArch | None = None,
) -> NetArch:
    """Build a NetArch, computing the trunk input width."""
    data_width = embedding.out_dim if embedding else x_dim
    return NetArch(
        input_dim=theta_dim + data_width,
        theta_dim=theta_dim,
        x_dim=x_dim,
        hidden_dim=hidden_dim,
        n_hidden_layers=n_hidden_layers,
        residual=residual,
        embedding=embedding,
    )


def _param_shapes(arch: NetArch) -> list[tuple[str, tuple[int, ...]]]:
    shapes: list[tuple[str, tuple[int, ...]]] = []
    if arch.embedding is not None:
        widths = arch.embedding.layer_widths()
        for i in range(len(widths) - 1):
            shapes.append((f"emb{i}.W", (widths[i + 1], widths[i])))
            shapes.append((f"emb{i}.b", (widths[i + 1],)))
    h = arch.hidden_dim
    if arch.residual:
        shapes.append(("in.W", (h, arch.input_dim)))
        shapes.append(("in.b", (h,)))
        for i in range(arch.n_hidden_layers):
            shapes.append((f"blk{i}.W1", (h, h)))
            shapes.append((f"blk{i}.b1", (h,)))
            shapes.append((f"blk{i}.W2", (h, h)))
            shapes.append((f"blk{i}.b2", (h,)))
    else:
        prev = arch.input_dim
        for i in range(arch.n_hidden_layers):
            shapes.append((f"lay{i}.W", (h, prev)))
            shapes.append((f"lay{i}.b", (h,)))
            prev = h
    shapes.append(("out.W", (1, h)))
    shapes.append(("out.b", (1,)))
    return shapes


@dataclass
class NetParams:
    """Flat parameter vector plus the shape index and input statistics."""

    arch: NetArch
    flat: np.ndarray
    theta_mean: np.ndarray = field(default=None)  # type: ignore[assignment]
    theta_std: np.ndarray = field(default=None)  # type: ignore[assignment]
    x_mean: np.ndarray = field(default=None)  # type: ignore[assignment]
    x_std: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self._index: dict[str, tuple[slice, tuple[int, ...]]] = {}
        offset = 0
        for name, shape in _param_shapes(self.arch):
            size = int(np.prod(shape))
            self._index[name] = (slice(offset, offset + size), shape)
            offset += size
        if self.flat.shape != (offset,):
            raise ValueError(f"flat vector must have length {offset}, got {self.flat.shape}")
        point_dim = self.arch.embedding.point_dim if self.arch.embedding else self.arch.x_dim
        if self.theta_mean is None:
            self.theta_mean = np.zeros(self.arch.theta_dim)
        if self.theta_std is None:
            self.theta_std = np.ones(self.arch.theta_dim)
        if self.x_mean is None:
            self.x_mean = np.zeros(point_dim)
        if self.x_std is None:
            self.x_std = np.ones(point_dim)

    @property
    def n_params(self) -> int:
        return self.flat.size

    def get(self, name: str) -> np.ndarray:
        sl, shape = self._index[name]
        return self.flat[sl].reshape(shape)

    def copy(self) -> "NetParams":
        return NetParams(
            arch=self.arch,
            flat=self.flat.copy(),
            theta_mean=self.theta_mean.copy(),
            theta_std=self.theta_std.copy(),
            x_mean=self.x_mean.copy(),
            x_std=self.x_std.copy(),
        )

    def with_flat(self, flat: np.ndarray) -> "NetParams":
        out = self.copy()
        out.flat = np.asarray(flat, dtype=float).copy()
        return out

    def set_standardization(
        self,
        theta_samples: np.ndarray | None = None,
        x_samples: np.ndarray | None = None,
    ) -> None:
        """Set z-score statistics from raw training inputs.

        ``x_samples`` may be ``(N, x_dim)`` or ``(N, K, point_dim)``; set
        inputs are pooled over points.  Zero stds are replaced by 1 so
        constant dimensions pass through unscaled.
        """
        if theta_samples is not None:
            t = np.asarray(theta_samples, dtype=float)
            self.theta_mean = t.mean(axis=0)
            self.theta_std = _safe_std(t.reshape(-1, t.shape[-1]))
        if x_samples is not None:
            x = np.asarray(x_samples, dtype=float)
            pooled = x.reshape(-1, x.shape[-1])
            self.x_mean = pooled.mean(axis=0)
            self.x_std = _safe_std(pooled)


def _safe_std(rows: np.ndarray) -> np.ndarray:
    std = rows.std(axis=0)
    return np.where(std > 0, std, 1.0)


def mlp_init(arch: NetArch, seed: int) -> NetParams:
    """He fan-in normal weights, zero biases; deterministic given seed."""
    rng = derive_rng(seed, "mlp_init")
    chunks = []
    for name, shape in _param_shapes(arch):
        if len(shape) == 1:  # bias
            chunks.append(np.zeros(shape[0]))
        elif name.endswith(".W2"):
            # Residual blocks start as identities; greatly smooths training.
            chunks.append(np.zeros(int(np.prod(shape))))
        else:
            fan_in = shape[1]
            w = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape)
            chunks.append(w.ravel())
    return NetParams(arch=arch, flat=np.concatenate(chunks))


def _standardize_inputs(params: NetParams, theta: np.ndarray, x: np.ndarray | None):
    arch = params.arch
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 1:
        theta = theta[None, :]
    if theta.shape[1] != arch.theta_dim:
        raise ValueError(f"theta dim {theta.shape[1]} != {arch.theta_dim}")
    tz = (theta - params.theta_mean) / params.theta_std

    if arch.embedding is None and arch.x_dim == 0:
        if x is not None:
            raise ValueError("network takes no data input")
        return tz, None
    if x is None:
        raise ValueError("network requires a data input")
    x = np.asarray(x, dtype=float)
    if arch.embedding is not None:
        if x.ndim == 2:
            x = x[None, :, :]
        if x.ndim != 3 or x.shape[2] != arch.embedding.point_dim:
            raise ValueError("set input must be (B, n_points, point_dim)")
    else:
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != arch.x_dim:
            raise ValueError(f"x dim mismatch: got {x.shape}")
    if x.shape[0] != tz.shape[0]:
        raise ValueError("theta and x batch sizes differ")
    xz = (x - params.x_mean) / params.x_std
    return tz, xz


def _forward(params: NetParams, theta: np.ndarray, x: np.ndarray | None, keep: bool):
    """Shared forward pass; returns (output (B,), cache) with cache=None unless keep."""
    arch = params.arch
    tz, xz = _standardize_inputs(params, theta, x)
    cache: dict = {"tz": tz, "xz": xz} if keep else None

    if arch.embedding is not None:
        emb = arch.embedding
        h = xz  # (B, K, width)
        acts = [h]
        n_aff = len(emb.layer_widths()) - 1
        for i in range(n_aff):
            w = params.get(f"emb{i}.W")
            b = params.get(f"emb{i}.b")
            h = h @ w.T + b
            if i < n_aff - 1:
                h = np.maximum(h, 0.0)
            acts.append(h)
        # Mean pooling; summing in sorted order makes the reduction exactly
        # permutation invariant (gradient is 1/K per point either way).
        pooled = np.sort(h, axis=1).sum(axis=1) / h.shape[1]
        if keep:
            cache["emb_acts"] = acts
            cache["n_points"] = h.shape[1]
        data_part = pooled
    else:
        data_part = xz

    z = tz if data_part is None else np.concatenate([tz, data_part], axis=1)
    if keep:
        cache["z"] = z

    if arch.residual:
        h = z @ params.get("in.W").T + params.get("in.b")
        if keep:
            cache["h_in"] = h
            cache["blocks"] = []
        for i in range(arch.n_hidden_layers):
            a = np.maximum(h, 0.0)
            u = a @ params.get(f"blk{i}.W1").T + params.get(f"blk{i}.b1")
            c = np.maximum(u, 0.0)
            v = c @ params.get(f"blk{i}.W2").T + params.get(f"blk{i}.b2")
            if keep:
                cache["blocks"].append((h, a, u, c))
            h = h + v
    else:
        h = z
        if keep:
            cache["layers"] = []
        for i in range(arch.n_hidden_layers):
            pre = h @ params.get(f"lay{i}.W").T + params.get(f"lay{i}.b")
            if keep:
                cache["layers"].append((h, pre))
            h = np.maximum(pre, 0.0)

    if keep:
        cache["h_last"] = h
    y = (h @ params.get("out.W").T + params.get("out.b"))[:, 0]
    if not np.all(np.isfinite(y)):
        raise FloatingPointError("non-finite network output")
    return y, cache


def forward(params: NetParams, theta: np.ndarray, x: np.ndarray | None = None):
    """Scalar prediction(s) for parameter/data input(s).

    Accepts a single input (1-D theta, and a vector or ``(K, point_dim)``
    set for x) or a batch; returns a float or a ``(B,)`` array accordingly.
    """
    single = np.asarray(theta).ndim == 1
    y, _ = _forward(params, theta, x, keep=False)
    return float(y[0]) if single else y


def backward(
    params: NetParams,
    theta: np.ndarray,
    x: np.ndarray | None,
    labels: np.ndarray,
) -> tuple[np.ndarray, float]:
    """Gradient of the batch-mean squared error wrt the flat parameters.

    Returns ``(grad, loss)`` where ``loss = mean((f(theta, x) - labels)^2)``.
    """
    labels = np.asarray(labels, dtype=float).ravel()
    if not np.all(np.isfinite(labels)):
        raise ValueError("labels must be finite")
    y, cache = _forward(params, theta, x, keep=True)
    if y.shape != labels.shape:
        raise ValueError(f"got {y.size} predictions for {labels.size} labels")
    arch = params.arch
    batch = y.size
    resid = y - labels
    loss = float(np.mean(resid**2))

    grad = np.zeros_like(params.flat)

    def gview(name: str) -> np.ndarray:
        sl, shape = params._index[name]
        return grad[sl].reshape(shape)

    dy = (2.0 / batch) * resid  # (B,)
    h_last = cache["h_last"]
    gview("out.W")[:] = dy[None, :] @ h_last
    gview("out.b")[:] = dy.sum()
    dh = dy[:, None] * params.get("out.W")  # (B, H)

    if arch.residual:
        for i in reversed(range(arch.n_hidden_layers)):
            h_pre, a, u, c = cache["blocks"][i]
            dv = dh
            gview(f"blk{i}.W2")[:] = dv.T @ c
            gview(f"blk{i}.b2")[:] = dv.sum(axis=0)
            dc = dv @ params.get(f"blk{i}.W2")
            du = dc * (u > 0)
            gview(f"blk{i}.W1")[:] = du.T @ a
            gview(f"blk{i}.b1")[:] = du.sum(axis=0)
            da = du @ params.get(f"blk{i}.W1")
            dh = dh + da * (h_pre > 0)
        z = cache["z"]
        gview("in.W")[:] = dh.T @ z
        gview("in.b")[:] = dh.sum(axis=0)
        dz = dh @ params.get("in.W")
    else:
        for i in reversed(range(arch.n_hidden_layers)):
            inp, pre = cache["layers"][i]
            dpre = dh * (pre > 0)
            gview(f"lay{i}.W")[:] = dpre.T @ inp
            gview(f"lay{i}.b")[:] = dpre.sum(axis=0)
            dh = dpre @ params.get(f"lay{i}.W")
        dz = dh

    if arch.embedding is not None:
        emb = arch.embedding
        dpooled = dz[:, arch.theta_dim :]  # (B, out_dim)
        k = cache["n_points"]
        dpoint = np.repeat(dpooled[:, None, :], k, axis=1) / k
        acts = cache["emb_acts"]
        n_aff = len(emb.layer_widths()) - 1
        dcur = dpoint
        for i in reversed(range(n_aff)):
            pre = acts[i + 1]
            inp = acts[i]
            dpre = dcur if i == n_aff - 1 else dcur * (pre > 0)
            flat_dpre = dpre.reshape(-1, dpre.shape[-1])
            flat_inp = inp.reshape(-1, inp.shape[-1])
            gview(f"emb{i}.W")[:] = flat_dpre.T @ flat_inp
            gview(f"emb{i}.b")[:] = flat_dpre.sum(axis=0)
            dcur = dpre @ params.get(f"emb{i}.W")

    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient")
    return grad, loss


@dataclass
class AdamState:
    """First/second moment accumulators for Adam with bias correction."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None


def adam_step(state: AdamState, flat: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """One Adam update; mutates ``state``, returns the new parameter vector."""
    if flat.shape != grad.shape:
        raise ValueError("parameter and gradient lengths differ")
    if not np.all(np.isfinite(grad)):
        raise ValueError("non-finite gradient")
    if state.m is None:
        state.m = np.zeros_like(flat)
        state.v = np.zeros_like(flat)
    state.step += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1 - state.beta2) * grad**2
    m_hat = state.m / (1 - state.beta1**state.step)
    v_hat = state.v / (1 - state.beta2**state.step)
    return flat - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class FitConfig:
    """Settings for the regression fit.

    Per epoch, every training item draws ``n_target_train`` fresh targets
    from the label sampler (``n_target_val`` for the validation split), so
    the label noise is re-realized each pass.  The learning rate follows a
    fixed staircase: multiplied by ``lr_decay`` every ``lr_decay_every``
    epochs, floored at ``min_learning_rate`` (decay disabled when
    ``lr_decay_every`` is 0); late-stage decay is what pushes the fit below
    the label-noise floor of the validation loss.
    """

    batch_size: int = 500
    n_target_train: int = 2
    n_target_val: int = 5
    patience_epochs: int = 100
    max_epochs: int = 800
    val_fraction: float = 0.1
    learning_rate: float = 1e-3
    lr_decay: float = 0.5
    lr_decay_every: int = 60
    min_learning_rate: float = 5e-5
    ema_decay: float = 0.999
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must lie in (0, 1)")
        if self.patience_epochs > self.max_epochs:
            raise ValueError("patience cannot exceed max_epochs")
        if min(self.batch_size, self.n_target_train, self.n_target_val) < 1:
            raise ValueError("batch_size and target counts must be >= 1")
        if not 0 < self.lr_decay <= 1 or self.lr_decay_every < 0:
            raise ValueError("invalid learning-rate decay settings")
        if not 0 <= self.ema_decay < 1:
            raise ValueError("ema_decay must lie in [0, 1)")

    def lr_at(self, epoch: int) -> float:
        if self.lr_decay_every == 0:
            return self.learning_rate
        lr = self.learning_rate * self.lr_decay ** (epoch // self.lr_decay_every)
        return max(lr, self.min_learning_rate)


def fit_regression(params: NetParams, thetas: np.ndarray, label_sampler, cfg: FitConfig):
    """Train by minibatch Adam on mean squared error with early stopping.

    ``label_sampler(indices, n_target, rng)`` must return ``(x, labels)``
    with ``n_target`` consecutive rows per index (x may be None for nets
    without a data input).  The 90:10 train/validation split is fixed up
    front from ``cfg.seed``; training stops after ``patience_epochs`` epochs
    without a new best validation loss, or at ``max_epochs``.

    The candidate weights evaluated against the validation set each epoch
    are an exponential moving average of the Adam iterates (warmed up as
    ``min(ema_decay, (1+t)/(10+t))`` so short runs are unaffected); the
    averaging suppresses the stationary jitter that minibatch label noise
    induces at a fixed learning rate.  Returns the candidate with the best
    validation loss and the per-epoch history.
    """
    thetas = np.asarray(thetas, dtype=float)
    if thetas.ndim == 1:
        thetas = thetas[:, None]
    n = thetas.shape[0]
    if n == 0:
        raise ValueError("empty dataset")
    n_val = int(round(n * cfg.val_fraction))
    if n_val < 1 or n - n_val < 1:
        raise ValueError(f"dataset of {n} items cannot support a {cfg.val_fraction:.0%} validation split")

    rng = derive_rng(cfg.seed, "fit_regression")
    # Fixed validation pairs: targets are drawn once so that epoch-to-epoch
    # val-loss comparisons reflect the parameters, not the target redraw.
    val_t, val_x, val_labels, train_idx = _split_and_validation_pairs(
        thetas, label_sampler, cfg, rng)

    state = AdamState(lr=cfg.learning_rate)
    ema_flat = params.flat.copy()
    n_steps = 0
    best = params.copy()
    best_val = math.inf
    best_epoch = -1
    history = {"train_loss": [], "val_loss": []}

    def eval_val(candidate: np.ndarray) -> float:
        y, _ = _forward(params.with_flat(candidate), val_t, val_x, keep=False)
        return float(np.mean((y - val_labels) ** 2))

    for epoch in range(cfg.max_epochs):
        state.lr = cfg.lr_at(epoch)
        order = rng.permutation(train_idx)
        batch_losses = []
        for start in range(0, order.size, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            x, labels = label_sampler(idx, cfg.n_target_train, rng)
            t = np.repeat(thetas[idx], cfg.n_target_train, axis=0)
            grad, loss = backward(params, t, x, labels)
            params.flat = adam_step(state, params.flat, grad)
            n_steps += 1
            if cfg.ema_decay > 0:
                d = min(cfg.ema_decay, (1 + n_steps) / (10 + n_steps))
                ema_flat = d * ema_flat + (1 - d) * params.flat
            batch_losses.append(loss)
        history["train_loss"].append(float(np.mean(batch_losses)))

        candidate = ema_flat if cfg.ema_decay > 0 else params.flat
        val_loss = eval_val(candidate)
        history["val_loss"].append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best = params.with_flat(candidate)
        if epoch - best_epoch >= cfg.patience_epochs:
            break

    history["best_epoch"] = best_epoch
    history["best_val_loss"] = best_val
    return best, history


def _split_and_validation_pairs(thetas: np.ndarray, label_sampler,
                                cfg: FitConfig, rng: np.random.Generator):
    """Fixed train/val split and validation pairs, all drawn from ``rng``."""
    n = thetas.shape[0]
    n_val = int(round(n * cfg.val_fraction))
    perm = rng.permutation(n)
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    val_x, val_labels = label_sampler(val_idx, cfg.n_target_val, rng)
    val_t = np.repeat(thetas[val_idx], cfg.n_target_val, axis=0)
    return val_t, val_x, val_labels, train_idx


def validation_loss(params: NetParams, thetas: np.ndarray, label_sampler,
                    cfg: FitConfig) -> float:
    """Validation MSE of ``params`` on the split/pairs defined by ``cfg.seed``.

    Recomputing this on a reloaded network reproduces the loss recorded at
    training time exactly (the split, the target draw, and the labels are
    all deterministic functions of the config).
    """
    thetas = np.asarray(thetas, dtype=float)
    if thetas.ndim == 1:
        thetas = thetas[:, None]
    rng = derive_rng(cfg.seed, "fit_regression")
    val_t, val_x, val_labels, _ = _split_and_validation_pairs(
        thetas, label_sampler, cfg, rng)
    y, _ = _forward(params, val_t, val_x, keep=False)
    return float(np.mean((y - val_labels) ** 2))


# -- serialization ------------------------------------------------------------

FORMAT_VERSION = 1


def params_to_dict(params: NetParams) -> dict:
    """JSON-ready description: version, architecture, statistics, weights."""
    arch = params.arch
    d = {
        "format_version": FORMAT_VERSION,
        "arch": {
            "input_dim": arch.input_dim,
            "theta_dim": arch.theta_dim,
            "x_dim": arch.x_dim,
            "hidden_dim": arch.hidden_dim,
            "n_hidden_layers": arch.n_hidden_layers,
            "residual": arch.residual,
            "activation": arch.activation,
            "embedding": None,
        },
        "standardization": {
            "theta_mean": params.theta_mean.tolist(),
            "theta_std": params.theta_std.tolist(),
            "x_mean": params.x_mean.tolist(),
            "x_std": params.x_std.tolist(),
        },
        "params": params.flat.tolist(),
    }
    if arch.embedding is not None:
        e = arch.embedding
        d["arch"]["embedding"] = {
            "point_dim": e.point_dim,
            "n_layers": e.n_layers,
            "width": e.width,
            "out_dim": e.out_dim,
            "pooling": e.pooling,
        }
    return d


def params_from_dict(d: dict) -> NetParams:
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported network format version: {version!r}")
    a = d["arch"]
    embedding = None
    if a.get("embedding"):
        embedding = SetEmbedArch(**a["embedding"])
    arch = NetArch(
        input_dim=a["input_dim"],
        theta_dim=a["theta_dim"],
        x_dim=a["x_dim"],
        hidden_dim=a["hidden_dim"],
        n_hidden_layers=a["n_hidden_layers"],
        residual=a["residual"],
        activation=a.get("activation", "relu"),
        embedding=embedding,
    )
    s = d["standardization"]
    return NetParams(
        arch=arch,
        flat=np.asarray(d["params"], dtype=float),
        theta_mean=np.asarray(s["theta_mean"], dtype=float),
        theta_std=np.asarray(s["theta_std"], dtype=float),
        x_mean=np.asarray(s["x_mean"], dtype=float),
        x_std=np.asarray(s["x_std"], dtype=float),
    )
