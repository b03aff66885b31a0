"""
Run settings.

Settings come from three places, later ones winning: field defaults, a flat
``key=value`` file (keys mirror the CLI flags, dashes or underscores), and
the command line. ``--paper-scale`` switches the replication defaults from
desk scale to the published study's sizes.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Mapping

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from tailgini.errors import ConfigError
from tailgini.estimators import DEFAULT_ALPHA, DEFAULT_ALPHA1, DEFAULT_ALPHA2

logger = logging.getLogger(__name__)

DESK_SCALE = {"m": 200, "oracle_reps": 50, "oracle_size": 200_000}
PAPER_SCALE = {"m": 2000, "oracle_reps": 200, "oracle_size": 1_000_000}

_LIST_KEYS = {"p"}
_ALIASES = {"size": "oracle_size", "replications": "m"}


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    alpha: float = DEFAULT_ALPHA
    alpha1: float = DEFAULT_ALPHA1
    alpha2: float = DEFAULT_ALPHA2
    p: tuple[float, ...] = (0.01, 0.001)
    n: int = Field(default=5000, ge=2)
    m: int | None = Field(default=None, ge=1)
    oracle_reps: int | None = Field(default=None, ge=1)
    oracle_size: int | None = Field(default=None, ge=2)
    seed: int = Field(default=20240101, ge=0)
    model: str = "model1a"
    out: Path = Path("results")
    paper_scale: bool = False
    true_values: Path | None = None
    null_reps: int = Field(default=999, ge=200)
    level: float = Field(default=0.05, gt=0.0, lt=1.0)
    workers: int | None = Field(default=None, ge=1)
    log_level: str | None = None

    @field_validator("alpha", "alpha1", "alpha2")
    @classmethod
    def _fraction_in_range(cls, value: float) -> float:
        if not 0.0 < value <= 0.5:
            raise ValueError(f"tail fraction {value} must lie in (0, 0.5]")
        return value

    @field_validator("p", mode="before")
    @classmethod
    def _split_levels(cls, value: Any) -> Any:
        if isinstance(value, str):
            return tuple(float(part) for part in value.replace(";", ",").split(",") if part.strip())
        if isinstance(value, (int, float)):
            return (float(value),)
        return value

    @model_validator(mode="after")
    def _levels_below_alpha(self) -> "RunConfig":
        if not self.p:
            raise ValueError("at least one extreme level p is required")
        for level in self.p:
            if not 0.0 < level <= self.alpha:
                raise ValueError(f"extreme level p={level} must lie in (0, alpha={self.alpha}]")
        return self

    def _scaled(self, name: str) -> int:
        value = getattr(self, name)
        if value is not None:
            return value
        return (PAPER_SCALE if self.paper_scale else DESK_SCALE)[name]

    @property
    def replications(self) -> int:
        return self._scaled("m")

    @property
    def reps(self) -> int:
        return self._scaled("oracle_reps")

    @property
    def size(self) -> int:
        return self._scaled("oracle_size")


def _normalise_key(key: str) -> str:
    key = key.strip().lower().lstrip("-").replace("-", "_")
    return _ALIASES.get(key, key)


def read_config_file(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    values = {_normalise_key(k): v for k, v in dotenv_values(path).items() if v is not None}
    logger.debug("read %d setting(s) from %s", len(values), path)
    return values


def load_run_config(config_file: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Merge a config file with CLI overrides (``None`` values mean "not given")."""
    values: dict[str, Any] = read_config_file(config_file) if config_file else {}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        key = _normalise_key(key)
        if key in _LIST_KEYS and isinstance(value, list):
            value = tuple(value)
        values[key] = value
    try:
        return RunConfig(**values)
    except ValidationError as exc:
        problems = "; ".join(f"{'.'.join(str(p) for p in e['loc']) or 'config'}: {e['msg']}" for e in exc.errors())
        raise ConfigError(problems) from exc
