"""Run configuration: nested parameter blocks, strict JSON parsing, built-in presets.

Schema (every key optional; unknown keys are rejected)::

    {
      "seed": 0,                       # master seed, int >= 0
      "workers": 1,                    # cap on concurrent SCMS workers
      "spline":   {"q": 5, "J": [9, 9]},          # J = null -> selected from "select"
      "prior":    {"mean": 0.0, "scale": 1.0},    # theta0 = mean * 1, Lambda0 = scale * I
      "select":   {"j_min": 7, "j_max": 15, "diagonal": true},
      "scms":     {"step_a": 0.02, "tol_eps": 1e-6, "tau": 2.0,
                   "max_iter": 5000, "seed_grid": 50},
      "credible": {"gamma": 0.1, "rho": 1.2, "samples": 200, "grid_n": 64,
                   "c_over_eta": null},           # null -> estimated from the mean surface
      "simulate": {"n": 2000, "noise_sd": 0.1},
      "data":     {"columns": ["x1", "x2", "y"], "header": true, "rescale": true}
    }
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .ridge import ScmsConfig


@dataclass
class SplineBlock:
    q: int = 5
    J: Optional[list] = field(default_factory=lambda: [9, 9])

    def validate(self):
        if not isinstance(self.q, int) or self.q < 1:
            raise ConfigError("spline.q must be an integer >= 1")
        if self.J is not None:
            if not (isinstance(self.J, list) and len(self.J) == 2 and all(isinstance(j, int) for j in self.J)):
                raise ConfigError("spline.J must be null or a pair of integers")
            if min(self.J) < self.q:
                raise ConfigError(f"spline.J entries must be >= q = {self.q}")


@dataclass
class PriorBlock:
    mean: float = 0.0
    scale: float = 1.0

    def validate(self):
        if not self.scale > 0:
            raise ConfigError("prior.scale must be > 0")


@dataclass
class SelectBlock:
    j_min: int = 7
    j_max: int = 15
    diagonal: bool = True

    def validate(self):
        if not (isinstance(self.j_min, int) and isinstance(self.j_max, int) and 1 <= self.j_min <= self.j_max):
            raise ConfigError("select needs integers 1 <= j_min <= j_max")

    def candidates(self) -> list:
        js = range(self.j_min, self.j_max + 1)
        if self.diagonal:
            return [(j, j) for j in js]
        return [(a, b) for a in js for b in js]


@dataclass
class ScmsBlock:
    step_a: float = 0.02
    tol_eps: float = 1e-6
    tau: float = 2.0
    max_iter: int = 5000
    seed_grid: int = 50

    def validate(self):
        if not self.step_a > 0 or not self.tol_eps > 0:
            raise ConfigError("scms.step_a and scms.tol_eps must be > 0")
        if not (isinstance(self.max_iter, int) and self.max_iter >= 1):
            raise ConfigError("scms.max_iter must be an integer >= 1")
        if not (isinstance(self.seed_grid, int) and self.seed_grid >= 1):
            raise ConfigError("scms.seed_grid must be an integer >= 1")

    def to_scms_config(self) -> ScmsConfig:
        return ScmsConfig(self.step_a, self.tol_eps, self.tau, self.max_iter, self.seed_grid)


@dataclass
class CredibleBlock:
    gamma: float = 0.1
    rho: float = 1.2
    samples: int = 200
    grid_n: int = 64
    c_over_eta: Optional[float] = None

    def validate(self):
        if not 0 < self.gamma < 0.5:
            raise ConfigError("credible.gamma must lie in (0, 0.5)")
        if not self.rho > 0:
            raise ConfigError("credible.rho must be > 0")
        if not (isinstance(self.samples, int) and self.samples >= 20):
            raise ConfigError("credible.samples must be an integer >= 20")
        if not (isinstance(self.grid_n, int) and self.grid_n >= 2):
            raise ConfigError("credible.grid_n must be an integer >= 2")
        if self.c_over_eta is not None and (isinstance(self.c_over_eta, bool)
                                            or not isinstance(self.c_over_eta, (int, float))
                                            or not self.c_over_eta > 0):
            raise ConfigError("credible.c_over_eta must be null or > 0")


@dataclass
class SimulateBlock:
    n: int = 2000
    noise_sd: float = 0.1

    def validate(self):
        if not (isinstance(self.n, int) and self.n >= 1):
            raise ConfigError("simulate.n must be an integer >= 1")
        if not self.noise_sd >= 0:
            raise ConfigError("simulate.noise_sd must be >= 0")


@dataclass
class DataBlock:
    columns: list = field(default_factory=lambda: ["x1", "x2", "y"])
    header: bool = True
    rescale: bool = True

    def validate(self):
        if not (isinstance(self.columns, list) and len(self.columns) == 3):
            raise ConfigError("data.columns must list exactly three columns")
        if not self.header and not all(isinstance(c, int) for c in self.columns):
            raise ConfigError("data.columns must be integer positions when header is false")


@dataclass
class RunConfig:
    seed: int = 0
    workers: int = 1
    spline: SplineBlock = field(default_factory=SplineBlock)
    prior: PriorBlock = field(default_factory=PriorBlock)
    select: SelectBlock = field(default_factory=SelectBlock)
    scms: ScmsBlock = field(default_factory=ScmsBlock)
    credible: CredibleBlock = field(default_factory=CredibleBlock)
    simulate: SimulateBlock = field(default_factory=SimulateBlock)
    data: DataBlock = field(default_factory=DataBlock)

    def validate(self) -> "RunConfig":
        if not (isinstance(self.seed, int) and self.seed >= 0):
            raise ConfigError("seed must be an integer >= 0")
        if not (isinstance(self.workers, int) and self.workers >= 1):
            raise ConfigError("workers must be an integer >= 1")
        for f in fields(self):
            v = getattr(self, f.name)
            if is_dataclass(v):
                v.validate()
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def merged(self, overrides: dict) -> "RunConfig":
        """A copy with ``overrides`` (same shape as the file schema) applied."""
        out = copy.deepcopy(self)
        _apply(out, overrides, "")
        return out.validate()

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return cls().merged(d)


_FLOAT_OK = (int, float)


def _apply(obj, d, prefix):
    if not isinstance(d, dict):
        raise ConfigError(f"{prefix or 'config'} must be an object")
    known = {f.name: f for f in fields(obj)}
    for key, val in d.items():
        path = f"{prefix}{key}"
        if key not in known:
            raise ConfigError(f"unknown config key {path!r}")
        cur = getattr(obj, key)
        if is_dataclass(cur):
            _apply(cur, val, path + ".")
            continue
        if isinstance(cur, bool) and not isinstance(val, bool):
            raise ConfigError(f"{path} must be a boolean")
        if isinstance(cur, float) and (isinstance(val, bool) or not isinstance(val, _FLOAT_OK)):
            raise ConfigError(f"{path} must be a number")
        if isinstance(cur, float):
            val = float(val)
        if isinstance(cur, int) and not isinstance(cur, bool) and (isinstance(val, bool) or not isinstance(val, int)):
            raise ConfigError(f"{path} must be an integer")
        setattr(obj, key, val)


PRESETS = {
    "paper-sim": {
        "spline": {"q": 5, "J": [9, 9]},
        "select": {"j_min": 7, "j_max": 15, "diagonal": True},
        "scms": {"step_a": 0.02, "tol_eps": 1e-6, "tau": 2.0},
        "credible": {"gamma": 0.1, "rho": 1.2, "samples": 200},
        "simulate": {"n": 2000, "noise_sd": 0.1},
    },
    "paper-quake": {
        "spline": {"q": 4, "J": [32, 32]},
        "scms": {"step_a": 5e-6, "tol_eps": 1e-6, "tau": 3.0},
        "credible": {"gamma": 0.1, "rho": 1.2, "samples": 200},
        "data": {"rescale": True},
    },
}


def load_config(path=None, preset: str | None = None) -> RunConfig:
    """Defaults, then the preset, then the config file."""
    cfg = RunConfig()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        cfg = cfg.merged(PRESETS[preset])
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        cfg = cfg.merged(d)
    return cfg.validate()
