"""
Run configuration for the command line and the figure presets.

A run is described by a frozen :class:`RunConfig`. Values are resolved from
the defaults, then an optional JSON file, then command line flags.
"""

__all__ = [
    "SweepSpec",
    "RunConfig",
    "THREADS_ENV",
    "load_config_file",
    "resolve_config",
    "dump_config",
    "thread_count",
    "default_t_max",
]

import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from . import DIMERSIM_BASE
from .core import ConfigError, SystemParams

logger = logging.getLogger(__name__)

THREADS_ENV = "DIMERSIM_THREADS"

SweepName = Literal["epsilon", "v", "gamma", "g"]


class SweepSpec(BaseModel):
    """Linear sweep of one physical parameter."""

    model_config = ConfigDict(frozen=True)

    name: SweepName
    start: float
    stop: float
    count: int

    @field_validator("count")
    @classmethod
    def _enough_points(cls, value: int) -> int:
        if value < 2:
            raise ValueError(f"a sweep needs at least 2 points, got {value}")
        return value

    @model_validator(mode="after")
    def _finite_range(self) -> "SweepSpec":
        if not (math.isfinite(self.start) and math.isfinite(self.stop)):
            raise ValueError("sweep range must be finite")
        return self

    @classmethod
    def parse(cls, text: str) -> "SweepSpec":
        """Parse ``name:start:stop:count``."""
        parts = text.split(":")
        if len(parts) != 4:
            raise ConfigError(f"sweep must look like name:start:stop:count, got {text!r}")
        name, start, stop, count = parts
        try:
            return cls(name=name, start=float(start), stop=float(stop), count=int(count))
        except (ValueError, ValidationError) as err:
            raise ConfigError(f"invalid sweep {text!r}: {err}") from err

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)

    def __str__(self) -> str:
        return f"{self.name}:{self.start}:{self.stop}:{self.count}"


class RunConfig(BaseModel):
    """Everything needed to reproduce one command line run."""

    model_config = ConfigDict(frozen=True)

    command: str
    params: SystemParams = SystemParams()
    theta0: float = 0.0
    phi0: float = 0.0
    t_max: Optional[float] = None
    n_times: int = 501
    sweep: Optional[SweepSpec] = None
    grid: Tuple[int, int] = (20, 20)
    formulation: str = "bloch"
    meanfield_energies: bool = False
    out_dir: Optional[str] = None
    threads: Optional[int] = None
    rtol: float = 1e-9
    atol: float = 1e-10

    @field_validator("n_times")
    @classmethod
    def _enough_times(cls, value: int) -> int:
        if value < 2:
            raise ValueError(f"n_times must be at least 2, got {value}")
        return value

    @field_validator("t_max")
    @classmethod
    def _positive_time(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not (value > 0 and math.isfinite(value)):
            raise ValueError(f"t_max must be positive and finite, got {value}")
        return value

    @field_validator("grid")
    @classmethod
    def _grid_size(cls, value: Tuple[int, int]) -> Tuple[int, int]:
        if min(value) < 1:
            raise ValueError(f"grid dimensions must be positive, got {value}")
        return value

    @field_validator("threads")
    @classmethod
    def _threads(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value < 1:
            raise ValueError(f"threads must be positive, got {value}")
        return value

    @field_validator("rtol", "atol")
    @classmethod
    def _tolerance(cls, value: float) -> float:
        if not value > 0:
            raise ValueError(f"tolerances must be positive, got {value}")
        return value

    def output_dir(self) -> Path:
        """Output directory; defaults to the ``runs`` folder of the data directory."""
        if self.out_dir is not None:
            path = Path(self.out_dir)
            path.mkdir(parents=True, exist_ok=True)
            return path
        return DIMERSIM_BASE.join("runs")

    def time_grid(self) -> np.ndarray:
        t_max = self.t_max if self.t_max is not None else default_t_max(self.params.gamma)
        return np.linspace(0.0, t_max, self.n_times)


def default_t_max(gamma: float) -> float:
    """min(50 / gamma, 1e4), the horizon for half-life searches."""
    if gamma <= 0:
        return 1e4
    return min(50.0 / gamma, 1e4)


def thread_count(config: Optional[RunConfig] = None) -> Optional[int]:
    """Worker threads: the environment variable wins over the configuration."""
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        if value < 1:
            raise ConfigError(f"{THREADS_ENV} must be positive, got {value}")
        return value
    return None if config is None else config.threads


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a JSON configuration file."""
    try:
        with open(path, "r") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config file {path}: {err}") from err
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    return data


def _merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def resolve_config(command: str, file_data: Optional[Dict[str, Any]] = None,
                   overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Combine defaults, file contents and flag overrides into a validated config.

    Raises
    ------
    ConfigError
        If the combined values do not validate.
    """
    data: Dict[str, Any] = {"command": command}
    if file_data:
        data = _merge(data, file_data)
        data["command"] = command
    if overrides:
        data = _merge(data, overrides)
    if isinstance(data.get("sweep"), str):
        data["sweep"] = SweepSpec.parse(data["sweep"])
    try:
        return RunConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(str(err)) from err


def dump_config(config: RunConfig, path: Union[str, Path]) -> None:
    """Write the resolved configuration as JSON with sorted keys."""
    with open(path, "w") as fh:
        json.dump(config.model_dump(mode="json"), fh, indent=2, sort_keys=True)
        fh.write("\n")
    logger.info(f"Configuration written to {path}")
