from __future__ import annotations
import math

from pydantic import BaseModel, ConfigDict, Field


class SolverConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_seeds: int = Field(default=65, ge=2)
    # lower seeds span [theta_min, pi/4]; the upper arc mirrors them
    theta_min: float = Field(default=math.pi / 128, gt=0.0, lt=math.pi / 4)
    # first/last seed spacing; 1.0 is uniform in theta
    cluster_ratio: float = Field(default=1.0, ge=1.0, le=1e3)
    corrector_tol: float = Field(default=1e-12, gt=0.0)
    max_corrector_iters: int = Field(default=50, ge=1)
    p_floor: float = Field(default=1e-12, gt=0.0)
    sonic_margin: float = Field(default=1e-12, gt=0.0)
    param_switch_lambda: float = Field(default=0.1, ge=0.0)
    workers: int = Field(default=1, ge=1)
