"""Training and prediction for the operator-dynamics Neural ODE.

Training fits short sub-windows of a measured trajectory (multiple
shooting): each sample starts from an observed state and is integrated
over ``window_steps`` grid intervals; the squared distance to the
observed states is minimized with an adaptive-moment optimizer, with a
held-out window set for early stopping.  Gradients are exact reverse-mode
derivatives of the discrete solver steps.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exact import Trajectory
from .nn import (
    GradientBuffer,
    NetworkSpec,
    Parameters,
    backward,
    build_layout,
    forward,
)
from .odeint import SolverConfig, backward_sweep, integrate, solve_grid

CKPT_HEADER = "opdyn-ckpt v1"


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    window_steps: int = 1
    learning_rate: float = 1e-3
    max_epochs: int = 1000
    patience: int = 100
    validation_fraction: float = 0.1
    lr_decay: float = 1.0  # per-epoch multiplicative decay
    # soft penalty on drift of sum_i h_i^2 along each window; exact
    # Heisenberg evolution conserves it, so the penalty discourages the
    # learned field from inflating or shrinking orbits off the data
    norm_weight: float = 0.0
    # known depolarizing rate: the penalty target becomes
    # exp(-2*norm_decay*dt) * sum_i h_i(0)^2 (0 = strict conservation)
    norm_decay: float = 0.0
    # decoupled L2 pull toward small parameters; load-bearing when the
    # window data rank is far below the coefficient dimension
    weight_decay: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.window_steps < 1 or self.batch_size < 1:
            raise ValueError("window_steps and batch_size must be positive")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in (0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError("lr_decay must be in (0, 1]")
        if min(self.norm_weight, self.norm_decay, self.weight_decay) < 0:
            raise ValueError(
                "norm_weight, norm_decay and weight_decay must be nonnegative"
            )


class TrainingDiverged(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


def loss(pred: Trajectory, target: Trajectory) -> float:
    """Summed squared Euclidean distance between coefficient matrices."""
    if pred.coeffs.shape != target.coeffs.shape or not np.allclose(
        pred.times, target.times
    ):
        raise ValueError("trajectories have misaligned grids")
    if pred.basis.labels != target.basis.labels:
        raise ValueError("trajectories have different bases")
    return float(np.sum((pred.coeffs - target.coeffs) ** 2))


@dataclass
class WindowBatch:
    """A batch of training windows sharing one relative time grid.

    ``offsets`` are times relative to each window start (offsets[0] == 0),
    ``t0`` the absolute start times, ``h0`` the observed start states and
    ``targets`` the observed states at the remaining offsets.
    """

    offsets: np.ndarray  # (ws+1,)
    t0: np.ndarray       # (B,)
    h0: np.ndarray       # (B, K)
    targets: np.ndarray  # (B, ws, K)


def _batch_rollout(spec, params, batch: WindowBatch, cfg, record=None):
    def f(tau, y):
        return forward(spec, params, y, t=batch.t0 + tau)

    states = solve_grid(f, batch.h0, batch.offsets, cfg, record=record)
    resid = states[1:] - batch.targets.transpose(1, 0, 2)
    return states, resid


def _loss_terms(batch: WindowBatch, states, resid, norm_weight: float,
                norm_decay: float = 0.0):
    """Total loss and per-grid-index loss cotangents for one batch."""
    value = float(np.sum(resid ** 2))
    cotangents = {j: 2.0 * resid[j - 1] for j in range(1, len(batch.offsets))}
    if norm_weight > 0.0:
        n0 = np.sum(batch.h0 ** 2, axis=1)
        for j in range(1, len(batch.offsets)):
            target = n0 * np.exp(-2.0 * norm_decay * batch.offsets[j])
            dev = np.sum(states[j] ** 2, axis=1) - target
            value += norm_weight * float(np.sum(dev ** 2))
            cotangents[j] = cotangents[j] + (
                4.0 * norm_weight * dev[:, None] * states[j]
            )
    return value, cotangents


def batch_loss(spec, params, batch: WindowBatch, cfg,
               norm_weight: float = 0.0, norm_decay: float = 0.0) -> float:
    states, resid = _batch_rollout(spec, params, batch, cfg)
    value, _ = _loss_terms(batch, states, resid, norm_weight, norm_decay)
    return value


def gradient(spec: NetworkSpec, params: Parameters, batch: WindowBatch,
             cfg: SolverConfig, norm_weight: float = 0.0,
             norm_decay: float = 0.0):
    """Loss and its exact reverse-mode gradient for one window batch.

    Differentiates through every accepted solver step; accepted step sizes
    are treated as fixed (discrete adjoint on the realized mesh).
    """
    if batch.h0.shape[0] == 0:
        raise ValueError("empty batch")
    record = []
    states, resid = _batch_rollout(spec, params, batch, cfg, record=record)
    loss_value, cotangents = _loss_terms(batch, states, resid, norm_weight,
                                         norm_decay)
    grads = GradientBuffer(params)

    def f_with_cache(tau, y):
        caches = []
        out = forward(spec, params, y, t=batch.t0 + tau, caches=caches)
        return out, caches

    def f_vjp(caches, g):
        return backward(spec, params, caches, g, grads)

    backward_sweep(f_with_cache, f_vjp, record, cotangents, batch.h0.shape)
    return loss_value, grads.values


class Adam:
    """First-order adaptive-moment optimizer with decoupled weight decay.

    Weight decay pulls the parameters toward the smallest interpolant,
    which matters when the data rank is far below the field dimension.
    """

    def __init__(self, size: int, learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.lr = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.weight_decay = weight_decay
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, values: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad ** 2
        mhat = self.m / (1 - self.beta1 ** self.t)
        vhat = self.v / (1 - self.beta2 ** self.t)
        values -= self.lr * (mhat / (np.sqrt(vhat) + self.eps)
                             + self.weight_decay * values)


def _make_windows(traj: Trajectory, window_steps: int):
    times = traj.times
    if len(times) < window_steps + 1:
        raise ValueError("trajectory too short for one training window")
    dts = np.diff(times)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=1e-12):
        raise ValueError("training requires a uniform time grid")
    offsets = times[: window_steps + 1] - times[0]
    starts = np.arange(len(times) - window_steps)
    return offsets, starts


def _batch_from_starts(traj, offsets, starts, window_steps):
    h0 = traj.coeffs[starts]
    targets = np.stack(
        [traj.coeffs[s + 1: s + 1 + window_steps] for s in starts]
    )
    return WindowBatch(offsets, traj.times[starts], h0, targets)


def train(traj: Trajectory, spec: NetworkSpec, tconf: TrainConfig,
          solver: SolverConfig, params: Parameters | None = None,
          log_every: int = 0):
    """Fit the vector field to one trajectory.

    Returns (best parameters, history) where history rows are
    (epoch, mean train loss per window, validation loss per window).
    """
    if spec.input_dim != len(traj.basis):
        raise ValueError("network input_dim does not match trajectory basis")
    offsets, starts = _make_windows(traj, tconf.window_steps)
    rng = np.random.default_rng(tconf.seed)
    perm = rng.permutation(starts)
    n_val = max(1, int(round(tconf.validation_fraction * len(starts))))
    if n_val >= len(starts):
        raise ValueError("validation split leaves no training windows")
    val_starts, train_starts = perm[:n_val], perm[n_val:]
    val_batch = _batch_from_starts(traj, offsets, np.sort(val_starts),
                                   tconf.window_steps)
    batch_size = min(tconf.batch_size, len(train_starts))

    if params is None:
        params = init_from_spec(spec, tconf.seed)
    opt = Adam(params.size, tconf.learning_rate,
               weight_decay=tconf.weight_decay)
    history = []
    best_val = np.inf
    best_params = params.copy()
    best_epoch = 0
    for epoch in range(tconf.max_epochs):
        order = rng.permutation(train_starts)
        epoch_loss = 0.0
        for lo in range(0, len(order), batch_size):
            chunk = np.sort(order[lo:lo + batch_size])
            batch = _batch_from_starts(traj, offsets, chunk, tconf.window_steps)
            loss_value, grad = gradient(spec, params, batch, solver,
                                        tconf.norm_weight, tconf.norm_decay)
            if not np.isfinite(loss_value):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}", history
                )
            epoch_loss += loss_value
            opt.step(params.values, grad / len(chunk))
        opt.lr *= tconf.lr_decay
        train_loss = epoch_loss / len(train_starts)
        val_loss = batch_loss(spec, params, val_batch, solver,
                              tconf.norm_weight, tconf.norm_decay) / n_val
        history.append((epoch, train_loss, val_loss))
        if log_every and epoch % log_every == 0:
            print(f"epoch {epoch:5d}  train {train_loss:.3e}  val {val_loss:.3e}")
        if val_loss < best_val - 1e-15:
            best_val = val_loss
            best_params = params.copy()
            best_epoch = epoch
        elif epoch - best_epoch > tconf.patience:
            break
    return best_params, history


def init_from_spec(spec: NetworkSpec, seed: int) -> Parameters:
    from .nn import init_parameters

    return init_parameters(spec, seed)


def predict(spec: NetworkSpec, params: Parameters, h0, t0: float, grid,
            solver: SolverConfig, basis=None, meta=None) -> Trajectory:
    """Integrate the learned field from (t0, h0) and sample it on a grid."""
    grid = np.asarray(grid, dtype=float)
    if grid[0] < t0 - 1e-12:
        raise ValueError("grid starts before the initial time")

    def f(t, y):
        return forward(spec, params, y, t=t)

    h0 = np.asarray(h0, dtype=float).reshape(1, -1)
    if grid[-1] > t0:
        sol = integrate(f, h0, t0, grid[-1], solver)
        coeffs = np.stack([sol(t)[0] for t in grid])
    else:
        coeffs = np.repeat(h0, len(grid), axis=0)
    out_meta = {"t0": repr(float(t0)), "variant": spec.variant}
    if meta:
        out_meta.update(meta)
    if basis is None:
        raise ValueError("prediction needs the coefficient basis for labeling")
    return Trajectory(grid, basis, coeffs, out_meta)


def save_checkpoint(path, spec: NetworkSpec, params: Parameters,
                    meta: dict | None = None) -> None:
    """Write a bit-exact text checkpoint (parameters as C99 hex floats)."""
    lines = [CKPT_HEADER]
    lines.append(f"variant={spec.variant}")
    lines.append(f"input_dim={spec.input_dim}")
    lines.append(f"depth={spec.depth}")
    lines.append(f"hidden_width={spec.hidden_width}")
    part = spec.fan_partition or ()
    lines.append("fan_partition=" + ",".join(str(v) for v in part))
    lines.append("frequencies=" + ",".join(float(v).hex() for v in spec.frequencies))
    lines.append(f"append_time={int(spec.append_time)}")
    for key, value in (meta or {}).items():
        lines.append(f"meta.{key}={value}")
    lines.append(f"params={params.size}")
    vals = params.values
    for lo in range(0, vals.size, 8):
        lines.append(" ".join(float(v).hex() for v in vals[lo:lo + 8]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path):
    """Read a checkpoint; returns (spec, params, meta)."""
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != CKPT_HEADER:
        raise ValueError(f"{path}: not a {CKPT_HEADER} file")
    fields = {}
    meta = {}
    values = []
    n_params = None
    for line in text[1:]:
        if n_params is None:
            key, _, value = line.partition("=")
            if key == "params":
                n_params = int(value)
            elif key.startswith("meta."):
                meta[key[5:]] = value
            else:
                fields[key] = value
        else:
            values.extend(float.fromhex(tok) for tok in line.split())
    if n_params is None or len(values) != n_params:
        raise ValueError(f"{path}: parameter block truncated")
    part = tuple(int(v) for v in fields["fan_partition"].split(",") if v)
    spec = NetworkSpec(
        variant=fields["variant"],
        input_dim=int(fields["input_dim"]),
        depth=int(fields["depth"]),
        hidden_width=int(fields["hidden_width"]),
        fan_partition=part or None,
        frequencies=tuple(float.fromhex(v)
                          for v in fields["frequencies"].split(",") if v),
        append_time=bool(int(fields["append_time"])),
    )
    params = Parameters(np.array(values), build_layout(spec))
    return spec, params, meta
