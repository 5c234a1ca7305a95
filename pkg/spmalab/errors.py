"""
Domain errors. Every error carries a human-readable `detail`, and run drivers
attach the iteration at which it was raised.
"""
from typing import Optional, Tuple


class LabError(Exception):
    """Base class for every error raised by spmalab."""

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail
        self.iteration: Optional[int] = None

    def at_iteration(self, t: int) -> "LabError":
        self.iteration = t
        return self

    def __str__(self) -> str:
        if self.iteration is None:
            return self.detail
        return f"iteration {self.iteration}: {self.detail}"


class InvalidMdp(LabError):
    def __init__(self, field: str, index: Optional[Tuple[int, ...]], detail: str):
        super().__init__(f"{field}{list(index) if index is not None else ''}: {detail}")
        self.field = field
        self.index = index


class InvalidPolicy(LabError):
    pass


class SingularSystem(LabError):
    pass


class StepSizeTooLarge(LabError):
    pass


class InconsistentAdvantage(LabError):
    pass


class LogitPolicyMismatch(LabError):
    pass


class InvalidTarget(LabError):
    pass


class LineSearchExhausted(LabError):
    """Raised when no backtracked step satisfies sufficient decrease."""

    def __init__(self, detail: str, last_step: float = 0.0):
        super().__init__(detail)
        self.last_step = last_step


class InfeasibleGap(LabError):
    pass


class ConfigError(LabError):
    def __init__(self, field: str, detail: str):
        super().__init__(f"{field}: {detail}" if field else detail)
        self.field = field


class ReportIoError(LabError):
    pass
