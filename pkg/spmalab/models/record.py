"""
Per-iteration diagnostics and bound-check reports.
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

CSV_COLUMNS = (
    "t",
    "j_value",
    "subopt_inf",
    "subopt_rho",
    "c_t",
    "min_gap",
    "alpha_t",
    "surrogate_final",
    "surrogate_gap",
    "bound_ok",
)


@dataclass(eq=False)
class IterationRecord:
    """
    Diagnostics of pi_t. `policy` and `values` travel with the record for the
    checks but are not part of the CSV schema.
    """

    t: int
    j_value: float
    subopt_inf: float
    subopt_rho: float
    c_t: Optional[float] = None
    min_gap: Optional[float] = None
    alpha_t: float = 1.0
    surrogate_final: Optional[float] = None
    surrogate_gap: Optional[float] = None
    bound_ok: Optional[bool] = None
    method: str = ""
    policy: Optional[np.ndarray] = field(default=None, repr=False)
    values: Optional[np.ndarray] = field(default=None, repr=False)

    def row(self) -> dict:
        return {name: getattr(self, name) for name in CSV_COLUMNS}


@dataclass
class CheckRow:
    label: str
    measured: float
    bound: float
    ok: bool


@dataclass
class CheckReport:
    """Outcome of one bound check. Descriptive reports never fail."""

    name: str
    passed: bool
    rows: List[CheckRow] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    descriptive: bool = False

    @property
    def failures(self) -> List[CheckRow]:
        return [r for r in self.rows if not r.ok]

    @property
    def worst_margin(self) -> float:
        """max(measured - bound) over rows; <= 0 when every row holds."""
        if not self.rows:
            return float("-inf")
        return max(r.measured - r.bound for r in self.rows)
