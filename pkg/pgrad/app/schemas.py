from __future__ import annotations
import math
from pathlib import Path
from typing import Any, Literal, Mapping, Optional

from dotenv import dotenv_values
from pydantic import Field, field_validator

from ..errors import ConfigError
from ..schemas import SolverConfig

DEFAULT_EPSILONS = (1e-2, 1e-3, 1e-4, 1e-5)
# interior box for the PDE residual at unit scale: r range, then θ half-width about π/4
DEFAULT_RESIDUAL_BOX = (0.45, 0.9, math.pi / 4 - 0.3, math.pi / 4 + 0.3)


class RunConfig(SolverConfig):
    output_dir: Path = Path("out")
    epsilons: tuple[float, ...] = DEFAULT_EPSILONS
    n_r: int = Field(default=97, ge=3, le=4097)
    n_theta: int = Field(default=97, ge=3, le=4097)
    residual_method: Literal["linear", "cubic"] = "cubic"
    residual_box: tuple[float, float, float, float] = DEFAULT_RESIDUAL_BOX
    # checks that divide by p skip nodes below this pressure (relative to p1)
    check_p_min: float = Field(default=1e-3, ge=0.0, lt=1.0)
    delta: float = Field(default=math.pi / 36, gt=0.0, lt=math.pi / 4)
    decay_theta: float = Field(default=math.pi / 4, gt=0.0, lt=math.pi / 2)
    p1: float = Field(default=1.0, gt=0.0)
    plots: bool = True
    figure_size: float = Field(default=6.0, gt=0.0, le=50.0)

    @field_validator("epsilons", mode="before")
    @classmethod
    def split_epsilons(cls, v: Any) -> Any:
        if isinstance(v, str):
            return tuple(float(x) for x in v.split(",") if x.strip())
        return v

    @field_validator("epsilons")
    @classmethod
    def descending_levels(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if len(v) < 2:
            raise ValueError("need at least two levels")
        if any(not 0.0 < e < 1.0 for e in v):
            raise ValueError("every level must lie in (0, 1)")
        return tuple(sorted(set(v), reverse=True))

    @field_validator("residual_box", mode="before")
    @classmethod
    def split_box(cls, v: Any) -> Any:
        if isinstance(v, str):
            return tuple(float(x) for x in v.split(","))
        return v

    def solver_config(self) -> SolverConfig:
        return SolverConfig(**{k: getattr(self, k) for k in SolverConfig.model_fields})


def _key(name: str) -> str:
    return name.strip().lower().replace("-", "_")


def load_run_config(
    path: Optional[Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """Merge a flat key = value file with command-line overrides and validate.

    Unknown keys are rejected by the model.
    """
    values: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        for k, v in dotenv_values(path).items():
            if v is None:
                raise ConfigError(f"config key {k!r} in {path} has no value")
            values[_key(k)] = v
    for k, v in (overrides or {}).items():
        if v is not None:
            values[_key(k)] = v
    return RunConfig.model_validate(values)
