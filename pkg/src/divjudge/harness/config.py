"""Experiment configuration and its per-experiment defaults."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..discriminator import DiscriminatorConfig
from ..errors import ConfigError

EXPERIMENTS = ("exp1", "exp2", "exp3", "sweep", "compare")
OUT_ENV = "DIVJUDGE_OUT"
DEFAULT_OUT = "divjudge-results"

SAMPLE_GRID = [20, 200, 2000]
N_GRID = list(range(10, 151, 10))
SWEEP_SEPARATIONS = [5.0 * i / 9 for i in range(10)]

_DEFAULTS = {
    "exp1": {"d": 10, "M_grid": SAMPLE_GRID, "L_grid": SAMPLE_GRID},
    "exp2": {"d": 2, "M_grid": SAMPLE_GRID, "L_grid": SAMPLE_GRID},
    "exp3": {"d": 2, "M_grid": [2000], "L_grid": [2000], "N_grid": N_GRID},
    "sweep": {"d": 4, "M_grid": [2000], "L_grid": [2000], "separations": SWEEP_SEPARATIONS},
    "compare": {"M_grid": [7500], "L_grid": [1000]},
}


@dataclass
class ExperimentConfig:
    """One run's parameters. Lists left as None take the experiment's
    defaults."""

    experiment: str
    d: int | None = None
    M_grid: list | None = None
    L_grid: list | None = None
    N_grid: list | None = None
    separations: list | None = None
    n_seeds: int = 5
    master_seed: int = 0
    mc_oracle_L: int = 100_000
    target_kl: float = 1.035
    discriminator: dict = field(default_factory=dict)
    em: dict = field(default_factory=dict)
    workers: int = 1
    out_dir: str | None = None
    real: str | None = None
    synthetic: str | None = None
    missing_tokens: list = field(default_factory=lambda: ["", "?"])

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        for k, v in _DEFAULTS[self.experiment].items():
            if getattr(self, k) is None:
                setattr(self, k, list(v) if isinstance(v, list) else v)
        for name in ("M_grid", "L_grid", "N_grid", "separations"):
            grid = getattr(self, name)
            if grid is not None:
                if not grid:
                    raise ConfigError(f"{name} must be non-empty")
                if name != "separations" and min(grid) < 1:
                    raise ConfigError(f"{name} entries must be positive")
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1")
        if self.mc_oracle_L < 1 or self.workers < 1:
            raise ConfigError("mc_oracle_L and workers must be positive")
        try:
            self.disc_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad discriminator settings: {exc}") from exc

    def disc_config(self) -> DiscriminatorConfig:
        return DiscriminatorConfig(**self.discriminator)

    def resolved_out_dir(self) -> Path:
        return Path(self.out_dir or os.environ.get(OUT_ENV) or DEFAULT_OUT)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("out_dir")
        d.pop("workers")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**d)


def load_config_file(path) -> dict:
    """Read a JSON object of ExperimentConfig keys."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data
