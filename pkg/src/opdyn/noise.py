"""Hardware-noise surrogate for clean coefficient trajectories.

Depolarizing errors after each Trotter layer contract every traceless
coefficient by exp(-gamma*t) with gamma = -log(1-p)/dt, and statistical
sampling noise adds an independent Gaussian draw per entry.  Draws are
keyed by (seed, column label, time index) so results do not depend on
iteration order or on which columns survive truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exact import Trajectory


def gamma_from_p(p: float, dt: float) -> float:
    """Decay rate of a per-layer depolarizing error of probability p."""
    if not 0.0 <= p < 1.0:
        raise ValueError("depolarizing probability must be in [0, 1)")
    if dt <= 0:
        raise ValueError("Trotter step must be positive")
    return -math.log1p(-p) / dt


@dataclass(frozen=True)
class NoiseModel:
    depolarizing_p: float = 0.0
    trotter_dt: float = 0.1
    gaussian_sigma: float = 0.0
    mode: str = "absolute"  # or "relative": sigma scales each clean value
    seed: int = 0
    gamma: float = field(init=False)

    def __post_init__(self):
        if self.gaussian_sigma < 0:
            raise ValueError("gaussian_sigma must be nonnegative")
        if self.mode not in ("absolute", "relative"):
            raise ValueError(f"unknown noise mode {self.mode!r}")
        object.__setattr__(
            self, "gamma", gamma_from_p(self.depolarizing_p, self.trotter_dt)
        )


def _label_key(label: str) -> int:
    # Stable integer key for a Pauli label (base-4 digits, I/X/Y/Z -> 0..3).
    key = 0
    for c in label:
        key = key * 4 + "IXYZ".index(c)
    return key


def apply_noise(traj: Trajectory, model: NoiseModel) -> Trajectory:
    """Return a new trajectory with decay and Gaussian fluctuation applied."""
    decay = np.exp(-model.gamma * traj.times)
    noisy = traj.coeffs * decay[:, None]
    if model.gaussian_sigma > 0:
        for k, label in enumerate(traj.basis.labels):
            rng = np.random.default_rng((model.seed, _label_key(label)))
            draws = rng.standard_normal(len(traj.times))
            if model.mode == "relative":
                noisy[:, k] += model.gaussian_sigma * np.abs(noisy[:, k]) * draws
            else:
                noisy[:, k] += model.gaussian_sigma * draws
    meta = dict(traj.meta)
    meta["noise.p"] = repr(model.depolarizing_p)
    meta["noise.dt"] = repr(model.trotter_dt)
    meta["noise.sigma"] = repr(model.gaussian_sigma)
    meta["noise.mode"] = model.mode
    meta["noise.seed"] = str(model.seed)
    return Trajectory(traj.times, traj.basis, noisy, meta)
