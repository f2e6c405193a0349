"""Run configuration: flat ``section.key = value`` text files.

Every command resolves its configuration against the full default table,
rejects unknown keys, and echoes the resolved values for provenance.
Command-line overrides use the same ``section.key=value`` syntax.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .exact import Observable, TfimSpec
from .nn import NetworkSpec
from .noise import NoiseModel
from .odeint import SolverConfig
from .pauli import TruncationPolicy
from .training import TrainConfig


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


# key -> (parser, default)
DEFAULTS = {
    "seed": (int, 0),
    "tfim.n_sites": (int, 3),
    "tfim.coupling": (float, 1.0),
    "tfim.field": (float, 1.0),
    "tfim.sign_convention": (str, "main_text"),
    "tfim.boundary": (str, "periodic"),
    "observable": (str, "sum_x"),
    "truncation.mode": (str, "full"),
    "truncation.window_radius": (int, 0),
    "truncation.velocity": (float, None),
    "truncation.symmetry_filter": (_bool, False),
    "truncation.sweep": (_bool, False),
    "noise.p": (float, 0.0),
    "noise.dt": (float, 0.1),
    "noise.sigma": (float, 0.0),
    "noise.mode": (str, "absolute"),
    "noise.seed": (int, 0),
    "network.variant": (str, "fan"),
    "network.depth": (int, 3),
    "network.hidden_width": (int, 128),
    "network.n_sin": (int, None),
    "network.n_cos": (int, None),
    "network.freq_min": (float, 0.1),
    "network.freq_max": (float, 1000.0),
    "network.freq_count": (int, 16),
    "network.append_time": (_bool, False),
    "train.batch_size": (int, 64),
    "train.window_steps": (int, 4),
    "train.learning_rate": (float, 1e-3),
    "train.max_epochs": (int, 1000),
    "train.patience": (int, 200),
    "train.validation_fraction": (float, 0.1),
    "train.lr_decay": (float, 1.0),
    "train.norm_weight": (float, 0.0),
    "train.norm_decay": (float, 0.0),
    "train.weight_decay": (float, 0.0),
    "train.seed": (int, 0),
    "solver.rtol": (float, 1e-6),
    "solver.atol": (float, 1e-8),
    "solver.initial_step": (float, 0.05),
    "solver.max_step": (float, np.inf),
    "solver.max_steps": (int, 100_000),
    "grid.t_start": (float, 0.0),
    "grid.t_stop": (float, 5.0),
    "grid.dt": (float, 0.1),
    "predict.t0": (float, 5.0),
    "predict.t_stop": (float, 20.0),
    "predict.dt": (float, 0.1),
    "spectrum.window": (str, "rectangular"),
    "spectrum.threshold_fraction": (float, 0.05),
    "spectrum.min_resolution": (float, 0.1),
    "compare.variants": (str, "fcn,fan"),
    "io.checkpoint": (str, None),
}


class RunConfig:
    """Resolved key/value table with typed access."""

    def __init__(self, values: dict):
        self.values = values

    @classmethod
    def load(cls, path=None, overrides=()) -> "RunConfig":
        values = {k: default for k, (_, default) in DEFAULTS.items()}
        pairs = []
        if path is not None:
            for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, _, val = line.partition("=")
                pairs.append((key.strip(), val.strip()))
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            key, _, val = item.partition("=")
            pairs.append((key.strip(), val.strip()))
        for key, val in pairs:
            if key not in DEFAULTS:
                raise ConfigError(f"unknown configuration key {key!r}")
            parser = DEFAULTS[key][0]
            try:
                values[key] = parser(val)
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {val!r} ({exc})") from exc
        return cls(values)

    def __getitem__(self, key: str):
        return self.values[key]

    def echo(self) -> str:
        lines = ["# resolved configuration"]
        for key in sorted(self.values):
            value = self.values[key]
            if value is None:
                continue
            lines.append(f"{key} = {value}")
        return "\n".join(lines)

    # --- typed section builders -------------------------------------

    def tfim(self) -> TfimSpec:
        return TfimSpec(
            n_sites=self["tfim.n_sites"],
            coupling=self["tfim.coupling"],
            field=self["tfim.field"],
            sign_convention=self["tfim.sign_convention"],
            boundary=self["tfim.boundary"],
        )

    def observable(self) -> Observable:
        return Observable.from_string(self["observable"], self["tfim.n_sites"])

    def truncation(self) -> TruncationPolicy:
        return TruncationPolicy(
            mode=self["truncation.mode"],
            window_radius=self["truncation.window_radius"],
            velocity=self["truncation.velocity"],
            symmetry_filter=self["truncation.symmetry_filter"],
        )

    def noise(self) -> NoiseModel:
        return NoiseModel(
            depolarizing_p=self["noise.p"],
            trotter_dt=self["noise.dt"],
            gaussian_sigma=self["noise.sigma"],
            mode=self["noise.mode"],
            seed=self["noise.seed"],
        )

    def network(self, input_dim: int, variant: str | None = None) -> NetworkSpec:
        width = self["network.hidden_width"]
        n_sin, n_cos = self["network.n_sin"], self["network.n_cos"]
        partition = None
        if n_sin is not None or n_cos is not None:
            n_sin = n_sin or 0
            n_cos = n_cos or 0
            partition = (n_sin, n_cos, width - n_sin - n_cos)
        freqs = tuple(np.logspace(
            np.log10(self["network.freq_min"]),
            np.log10(self["network.freq_max"]),
            self["network.freq_count"],
        ))
        return NetworkSpec(
            variant=variant or self["network.variant"],
            input_dim=input_dim,
            depth=self["network.depth"],
            hidden_width=width,
            fan_partition=partition,
            frequencies=freqs,
            append_time=self["network.append_time"],
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self["train.batch_size"],
            window_steps=self["train.window_steps"],
            learning_rate=self["train.learning_rate"],
            max_epochs=self["train.max_epochs"],
            patience=self["train.patience"],
            validation_fraction=self["train.validation_fraction"],
            lr_decay=self["train.lr_decay"],
            norm_weight=self["train.norm_weight"],
            norm_decay=self["train.norm_decay"],
            weight_decay=self["train.weight_decay"],
            seed=self["train.seed"],
        )

    def solver(self) -> SolverConfig:
        return SolverConfig(
            rtol=self["solver.rtol"],
            atol=self["solver.atol"],
            initial_step=self["solver.initial_step"],
            max_step=self["solver.max_step"],
            max_steps=self["solver.max_steps"],
        )

    def generation_grid(self) -> np.ndarray:
        return _uniform_grid(self["grid.t_start"], self["grid.t_stop"], self["grid.dt"])

    def prediction_grid(self) -> np.ndarray:
        return _uniform_grid(self["predict.t0"], self["predict.t_stop"], self["predict.dt"])


def _uniform_grid(start: float, stop: float, dt: float) -> np.ndarray:
    if dt <= 0 or stop < start:
        raise ConfigError("grid needs dt > 0 and t_stop >= t_start")
    n = int(round((stop - start) / dt))
    return np.round(start + dt * np.arange(n + 1), 12)
