"""
Run configuration schemas, validated with pydantic.
"""
from enum import Enum
from typing import Any, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, root_validator, validator

from spmalab.models.mdp import Logits, Policy


class Method(str, Enum):
    SPMA = "SPMA"
    NPG = "NPG"
    SPG = "SPG"
    MDPO = "MDPO"
    MDPO_TABULAR = "MDPO_tabular"
    SPMA_BANDIT_GAP = "SPMA_bandit_gap"
    TRPO_REGULARIZED = "TRPO_regularized"


TABULAR_METHODS = {
    Method.SPMA,
    Method.NPG,
    Method.SPG,
    Method.MDPO_TABULAR,
    Method.SPMA_BANDIT_GAP,
}
FA_METHODS = {Method.SPMA, Method.MDPO, Method.SPG, Method.TRPO_REGULARIZED}

Cell = Tuple[int, int]
DEFAULT_MAX_STEP_FRACTION = 0.999


class TabularRunConfig(BaseModel):
    """Configuration of a tabular run driven by exact advantages."""
    method: Method
    step_size: float = Field(..., ge=0, description="Outer step size eta")
    iterations: int = Field(..., ge=0, description="Number of updates T")
    init: Any = Field("uniform", description="'uniform', a Policy or Logits")
    max_step_fraction: float = Field(DEFAULT_MAX_STEP_FRACTION, gt=0, le=1, description="SPMA on MDPs needs eta <= fraction * (1 - gamma)")

    class Config:
        extra = "forbid"
        arbitrary_types_allowed = True

    @validator("method")
    def method_is_tabular(cls, v):
        if v not in TABULAR_METHODS:
            raise ValueError(f"{v.value} has no tabular update")
        return v

    @validator("init")
    def init_kind(cls, v):
        if isinstance(v, str) and v == "uniform":
            return v
        if isinstance(v, (Policy, Logits)):
            return v
        raise ValueError("init must be 'uniform', a Policy or Logits")

    @root_validator(skip_on_failure=True)
    def positive_step(cls, values):
        if values["method"] != Method.SPMA_BANDIT_GAP and values["step_size"] <= 0:
            raise ValueError("step_size must be positive")
        return values


class ArmijoConfig(BaseModel):
    init_step: float = Field(1.0, gt=0)
    shrink_factor: float = Field(0.5, gt=0, lt=1)
    sufficient_decrease_c: float = Field(1e-4, gt=0, lt=1)
    max_backtracks: int = Field(50, ge=0)
    warm_start_factor: float = Field(1.8, ge=1, description="Next search starts at factor * accepted step")
    grad_tol: float = Field(0.0, ge=0, description="Gradient norm treated as converged")

    class Config:
        extra = "forbid"


class AdvantageMode(BaseModel):
    kind: Literal["exact", "noisy"] = "exact"
    epsilon_approx: float = Field(0.0, ge=0, description="Sup-norm advantage error")
    seed: int = 0

    class Config:
        extra = "forbid"


class StateMode(BaseModel):
    kind: Literal["exact_occupancy", "sampled"] = "exact_occupancy"
    n_states: int = Field(512, ge=1)
    seed: int = 0

    class Config:
        extra = "forbid"


class FaRunConfig(BaseModel):
    """Configuration of a log-linear (Algorithm 1 style) run."""
    outer_step_size: float = Field(..., ge=0)
    inner_iters: int = Field(..., ge=1)
    outer_iters: int = Field(..., ge=0)
    advantage_mode: AdvantageMode = Field(default_factory=AdvantageMode)
    state_mode: StateMode = Field(default_factory=StateMode)
    armijo: ArmijoConfig = Field(default_factory=ArmijoConfig)
    estimate_surrogate_gap: bool = Field(True, description="Long-run minimization of the ideal surrogate per iteration")
    gap_iters: int = Field(2000, ge=1)
    gap_restarts: int = Field(3, ge=1)
    precondition: bool = Field(True, description="Balanced state weights for one-hot features, capped diag(X^T W X) scaling otherwise")
    seed: int = 0

    class Config:
        extra = "forbid"

    def check_admissible(self, gamma: float) -> Optional[str]:
        if self.outer_step_size > (1.0 - gamma) * (1.0 + 1e-12):
            return f"outer_step_size {self.outer_step_size} exceeds 1 - gamma = {1.0 - gamma}"
        return None


class GridSpec(BaseModel):
    """Grid-world layout; cells are (row, col)."""
    rows: int = Field(..., gt=0)
    cols: int = Field(..., gt=0)
    cliff_cells: List[Cell] = Field(default_factory=list)
    hole_cells: List[Cell] = Field(default_factory=list)
    start: Cell
    goal: Cell
    slip_prob: float = Field(0.0, ge=0, le=1, description="Mass moved to the two perpendicular directions")

    class Config:
        extra = "forbid"

    @root_validator(skip_on_failure=True)
    def cells_consistent(cls, values):
        rows, cols = values["rows"], values["cols"]
        cells = values["cliff_cells"] + values["hole_cells"] + [values["start"], values["goal"]]
        for r, c in cells:
            if not (0 <= r < rows and 0 <= c < cols):
                raise ValueError(f"cell {(r, c)} outside a {rows}x{cols} grid")
        hazards = set(map(tuple, values["cliff_cells"])) | set(map(tuple, values["hole_cells"]))
        for name in ("start", "goal"):
            if tuple(values[name]) in hazards:
                raise ValueError(f"{name} lies on a hazard cell")
        return values

    def index(self, cell: Cell) -> int:
        return cell[0] * self.cols + cell[1]

    @property
    def num_cells(self) -> int:
        return self.rows * self.cols
