"""
Experiment configuration: one JSON document describing environment,
parameterization, methods and the (method x eta x m x seed) grid.
"""
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, Field, root_validator, validator

from spmalab.models.config import (
    FA_METHODS,
    TABULAR_METHODS,
    AdvantageMode,
    ArmijoConfig,
    Method,
    StateMode,
)

DEFAULT_ETA_GRID = [0.3, 0.5, 0.7, 0.9, 1.0]
DEFAULT_INNER_M = [5, 25, 50]


class CliffWorldEnv(BaseModel):
    kind: Literal["cliff_world"]
    gamma: float = Field(0.9, ge=0, lt=1)

    class Config:
        extra = "forbid"


class FrozenLakeEnv(BaseModel):
    kind: Literal["frozen_lake"]
    gamma: float = Field(0.99, ge=0, lt=1)
    slippery: bool = False

    class Config:
        extra = "forbid"


class BanditEnv(BaseModel):
    kind: Literal["bandit"]
    num_arms: int = Field(..., ge=2)
    min_gap: float = Field(..., gt=0, le=1)
    seed: int = 0

    class Config:
        extra = "forbid"

    @property
    def gamma(self) -> float:
        return 0.0


Environment = Union[CliffWorldEnv, FrozenLakeEnv, BanditEnv]


class TileCodingParams(BaseModel):
    num_tilings: int = Field(2, ge=1)
    tile_size: int = Field(2, ge=1)

    class Config:
        extra = "forbid"


class Parameterization(BaseModel):
    kind: Literal["tabular", "linear"] = "tabular"
    features: Literal["one_hot", "tile_coding"] = "one_hot"
    tile_coding: TileCodingParams = Field(default_factory=TileCodingParams)

    class Config:
        extra = "forbid"


class ExperimentConfig(BaseModel):
    """Validated experiment description. Unknown keys are rejected at every level."""
    environment: Environment
    parameterization: Parameterization = Field(default_factory=Parameterization)
    methods: List[Method]
    eta_grid: List[float] = Field(default_factory=lambda: list(DEFAULT_ETA_GRID))
    scale_eta: bool = Field(True, description="Multiply SPMA/MDPO/TRPO etas by (1 - gamma) on MDPs")
    inner_m: List[int] = Field(default_factory=lambda: list(DEFAULT_INNER_M))
    outer_T: int = Field(..., ge=0)
    seeds: List[int] = Field(default_factory=lambda: [0])
    advantage_mode: AdvantageMode = Field(default_factory=AdvantageMode)
    state_mode: StateMode = Field(default_factory=StateMode)
    armijo: ArmijoConfig = Field(default_factory=ArmijoConfig)
    estimate_surrogate_gap: bool = False
    precondition: bool = Field(True, description="Diagonal scaling of inner-loop gradients")
    output_dir: Optional[str] = None

    class Config:
        extra = "forbid"

    @validator("methods", "eta_grid", "seeds", "inner_m")
    def not_empty(cls, v):
        if not v:
            raise ValueError("must not be empty")
        return v

    @validator("eta_grid", each_item=True)
    def positive_eta(cls, v):
        if v <= 0:
            raise ValueError("step sizes must be positive")
        return v

    @validator("inner_m", each_item=True)
    def positive_m(cls, v):
        if v < 1:
            raise ValueError("inner iterations must be >= 1")
        return v

    @root_validator(skip_on_failure=True)
    def methods_fit(cls, values):
        env = values["environment"]
        linear = values["parameterization"].kind == "linear"
        allowed = FA_METHODS if linear else TABULAR_METHODS
        for method in values["methods"]:
            if method not in allowed:
                raise ValueError(f"{method.value} is not available for a {values['parameterization'].kind} parameterization")
            if method == Method.SPMA_BANDIT_GAP and env.kind != "bandit":
                raise ValueError("SPMA_bandit_gap needs a bandit environment")
        if env.kind == "bandit" and linear:
            raise ValueError("bandit environments are tabular only")
        if linear and values["parameterization"].features == "tile_coding" and env.kind == "bandit":
            raise ValueError("tile coding needs a grid environment")
        return values

    @root_validator(skip_on_failure=True)
    def etas_admissible(cls, values):
        env = values["environment"]
        for method in values["methods"]:
            for eta in values["eta_grid"]:
                step = effective_eta(method, eta, env.gamma, values["scale_eta"])
                if method == Method.SPMA and env.kind != "bandit" and step > 1.0 - env.gamma:
                    raise ValueError(f"SPMA step size {step} exceeds 1 - gamma = {1.0 - env.gamma}")
                if method == Method.SPMA and env.kind == "bandit" and step > 1.0:
                    raise ValueError(f"SPMA bandit step size {step} exceeds 1")
        return values


SCALED_METHODS = {Method.SPMA, Method.MDPO, Method.TRPO_REGULARIZED}


def effective_eta(method: Method, eta: float, gamma: float, scale: bool) -> float:
    """Grid value -> step size actually used; SPMA-style steps on MDPs shrink by (1 - gamma)."""
    if scale and gamma > 0 and method in SCALED_METHODS:
        return eta * (1.0 - gamma)
    return eta
