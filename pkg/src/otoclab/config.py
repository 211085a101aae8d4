"""Experiment configuration: TOML files with explicit defaults for every knob."""
from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .errors import ConfigError

EXPERIMENTS = {
    "spin-fp-sweep": "exponents and calibrated-window OTOC rates at the spin fixed point across J",
    "spin-line": "best-window OTOC rates along the p2 line from the fixed point into the chaotic sea",
    "spin-s-sweep": "OTOC saturation level and growth rate versus spin size at fixed J",
    "bh-fp-sweep": "exponents and OTOC rates at the homogeneous Bose-Hubbard point across theta",
    "bh-shell-sweep": "Bose-Hubbard OTOC rates on the energy shell away from the homogeneous point",
    "section-atlas": "Poincare sections and energy-drift audit around the spin fixed point",
}
SPIN_EXPERIMENTS = ("spin-fp-sweep", "spin-line", "spin-s-sweep", "section-atlas")
SCALES = ("desk", "paper")

NUMERIC_DEFAULTS = {
    "tol": 1e-10,
    "lyapunov_horizon": 1e4,
    "lyapunov_seeds": 10,
    "lyapunov_chunk": 10.0,
    "renorm_threshold": 1e6,
    "chaotic_offset": 1e-3,
    "time_points": 400,
    "time_factor": 2.0,
    "saturation_factor": 3.0,
    "plateau_window": 0.1,
    "plateau_threshold": 0.02,
    "window_starts": 20,
    "window_lengths": [0.5, 1.0, 1.5, 2.0],
    "min_samples": 10,
    "min_growth": 0.5,
    "calibration_tolerance": 0.3,
    "calibration_J": 0.217,
    "calibration_dp2": 0.3,
    "bootstrap": 1000,
    "regular_cutoff": 0.01,
    "section_n_init": 20,
    "section_t_max": 2000.0,
    "continuation_step": 0.005,
    "max_dim": 20000,
}
_INT_KNOBS = {"lyapunov_seeds", "time_points", "window_starts", "min_samples", "bootstrap",
              "section_n_init", "max_dim"}

GRID_KEYS = ("J", "theta", "delta_p2", "s", "q1_targets")
REQUIRED_GRIDS = {
    "spin-fp-sweep": ("J",),
    "spin-line": ("J", "delta_p2"),
    "spin-s-sweep": ("J", "s"),
    "bh-fp-sweep": ("theta",),
    "bh-shell-sweep": ("theta", "q1_targets"),
    "section-atlas": ("J",),
}
SPIN_MODEL_KEYS = ("b_x", "b_y", "b_z", "s")
BH_MODEL_KEYS = ("L", "N")

_J_SWEEP = [0.035, 0.065, 0.095, 0.125, 0.156, 0.186, 0.217, 0.247, 0.278]
_THETA_SWEEP = [float(x) for x in np.round(np.linspace(-1.4, -1.1, 7), 10)]


def _default_grids(experiment: str, scale: str, model: dict) -> dict:
    if experiment == "spin-fp-sweep":
        return {"J": list(_J_SWEEP)}
    if experiment == "spin-line":
        return {"J": list(_J_SWEEP), "delta_p2": [0.0, 0.05, 0.10, 0.15, 0.30]}
    if experiment == "spin-s-sweep":
        return {"J": [0.217], "s": [10.0, 15.0, 20.0] if scale == "desk" else [10.0, 20.0, 30.0, 40.0, 50.0, 60.0]}
    if experiment == "bh-fp-sweep":
        return {"theta": list(_THETA_SWEEP)}
    if experiment == "bh-shell-sweep":
        q1 = float(np.sqrt(2.0 / model["L"]))
        return {"theta": [-1.4, -1.25, -1.1],
                "q1_targets": [round(q1 - d, 12) for d in (0.0, 0.01, 0.02, 0.03)]}
    return {"J": [0.095, 0.156, 0.217, 0.278]}


def _default_model(experiment: str, scale: str) -> dict:
    if experiment in SPIN_EXPERIMENTS:
        return {"b_x": 0.05, "b_y": 0.0, "b_z": 0.05, "s": 40.0 if scale == "desk" else 60.0}
    if experiment == "bh-shell-sweep":
        return {"L": 4, "N": 30 if scale == "desk" else 40}
    return {"L": 3, "N": 60 if scale == "desk" else 100}


def _default_numerics(experiment: str) -> dict:
    out = copy.deepcopy(NUMERIC_DEFAULTS)
    if experiment == "bh-shell-sweep":
        out["lyapunov_horizon"] = 2000.0
    if experiment == "spin-s-sweep":
        # late-time OTOCs at s <= 20 fluctuate by ~10% (log-std ~0.1), so a 0.02
        # running-mean threshold never fires; the horizon reaches the final level
        out["plateau_threshold"] = 0.1
        out["saturation_factor"] = 10.0
    return out


@dataclass
class ExperimentConfig:
    experiment: str
    model: dict
    grids: dict
    numerics: dict = field(default_factory=lambda: copy.deepcopy(NUMERIC_DEFAULTS))
    seed: int = 12345
    output: str = "runs"
    scale: str = "desk"

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {sorted(EXPERIMENTS)}")
        if self.scale not in SCALES:
            raise ConfigError(f"scale must be one of {SCALES}, got {self.scale!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        allowed = SPIN_MODEL_KEYS if self.experiment in SPIN_EXPERIMENTS else BH_MODEL_KEYS
        for key in self.model:
            if key not in allowed:
                raise ConfigError(f"unknown model key {key!r} for {self.experiment}")
        for key in allowed:
            if key not in self.model:
                raise ConfigError(f"model key {key!r} missing")
            if not _is_number(self.model[key]):
                raise ConfigError(f"model key {key!r} must be numeric")
        if self.experiment in SPIN_EXPERIMENTS:
            s = self.model["s"]
            if s < 0.5 or abs(2 * s - round(2 * s)) > 1e-12:
                raise ConfigError(f"spin s must be a positive half-integer, got {s}")
        else:
            if int(self.model["L"]) != self.model["L"] or self.model["L"] < 3:
                raise ConfigError("L must be an integer >= 3")
            if int(self.model["N"]) != self.model["N"] or self.model["N"] < 1:
                raise ConfigError("N must be a positive integer")
        for key, values in self.grids.items():
            if key not in GRID_KEYS:
                raise ConfigError(f"unknown grid {key!r}")
            if not isinstance(values, list) or not all(_is_number(v) for v in values):
                raise ConfigError(f"grid {key!r} must be a list of numbers")
        for key in REQUIRED_GRIDS[self.experiment]:
            if not self.grids.get(key):
                raise ConfigError(f"grid {key!r} must be non-empty for {self.experiment}")
        for key, value in self.numerics.items():
            if key not in NUMERIC_DEFAULTS:
                raise ConfigError(f"unknown numerics key {key!r}")
            if key == "window_lengths":
                if not value or not all(_is_number(v) and v > 0 for v in value):
                    raise ConfigError("window_lengths must be a non-empty list of positive numbers")
            elif not _is_number(value) or (value <= 0 and key != "regular_cutoff"):
                raise ConfigError(f"numerics key {key!r} must be a positive number")
        return self

    def to_dict(self) -> dict:
        return {
            "experiment": {"name": self.experiment, "seed": self.seed, "output": self.output,
                           "scale": self.scale},
            "model": dict(self.model),
            "grids": {k: list(v) for k, v in self.grids.items()},
            "numerics": copy.deepcopy(self.numerics),
        }

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def save(self, path) -> None:
        Path(path).write_text(self.to_toml())

    def digest(self) -> str:
        """Hash of everything that affects results (the output directory excluded)."""
        d = self.to_dict()
        d["experiment"].pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    @property
    def is_long_running(self) -> bool:
        return self.scale == "paper"


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v)


def _normalise(experiment: str, model: dict, grids: dict, numerics: dict):
    if experiment in SPIN_EXPERIMENTS:
        model = {k: float(v) if _is_number(v) else v for k, v in model.items()}
    else:
        model = {k: int(v) if _is_number(v) and float(v).is_integer() else v for k, v in model.items()}
    grids = {k: [float(x) if _is_number(x) else x for x in v] if isinstance(v, list) else v
             for k, v in grids.items()}
    out = {}
    for k, v in numerics.items():
        if k in _INT_KNOBS and _is_number(v) and float(v).is_integer():
            out[k] = int(v)
        elif k == "window_lengths" and isinstance(v, list):
            out[k] = [float(x) if _is_number(x) else x for x in v]
        elif _is_number(v):
            out[k] = float(v)
        else:
            out[k] = v
    return model, grids, out


def default_config(experiment: str, scale: str = "desk", seed: int = 12345, output=None) -> ExperimentConfig:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    if scale not in SCALES:
        raise ConfigError(f"scale must be one of {SCALES}")
    model = _default_model(experiment, scale)
    grids = _default_grids(experiment, scale, model)
    model, grids, numerics = _normalise(experiment, model, grids, _default_numerics(experiment))
    return ExperimentConfig(experiment, model, grids, numerics, seed,
                            output or f"runs/{experiment}", scale).validate()


def from_dict(data: dict, scale=None) -> ExperimentConfig:
    """Merge a parsed config over the campaign defaults and validate it."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a table")
    unknown = set(data) - {"experiment", "model", "grids", "numerics"}
    if unknown:
        raise ConfigError(f"unknown top-level sections {sorted(unknown)}")
    head = data.get("experiment")
    if not isinstance(head, dict) or "name" not in head:
        raise ConfigError("missing [experiment] name")
    extra = set(head) - {"name", "seed", "output", "scale"}
    if extra:
        raise ConfigError(f"unknown [experiment] keys {sorted(extra)}")
    scale = scale or head.get("scale", "desk")
    base = default_config(head["name"], scale) if head["name"] in EXPERIMENTS else None
    if base is None:
        raise ConfigError(f"unknown experiment {head['name']!r}")
    for section in ("model", "grids", "numerics"):
        if section in data and not isinstance(data[section], dict):
            raise ConfigError(f"[{section}] must be a table")
    model = {**base.model, **data.get("model", {})}
    grids = {**base.grids, **data.get("grids", {})}
    numerics = {**base.numerics, **data.get("numerics", {})}
    model, grids, numerics = _normalise(head["name"], model, grids, numerics)
    cfg = ExperimentConfig(head["name"], model, grids, numerics, head.get("seed", base.seed),
                           head.get("output", base.output), scale)
    return cfg.validate()


def from_toml(text: str, scale=None) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    return from_dict(data, scale)


def load(path, scale=None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return from_toml(text, scale)


__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "NUMERIC_DEFAULTS",
    "default_config",
    "from_dict",
    "from_toml",
    "load",
]
