"""
Multi-armed bandit instance.
"""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class BanditInstance:
    """K arms with deterministic rewards r(a) in [0, 1]."""

    rewards: np.ndarray

    def __post_init__(self):
        r = np.array(self.rewards, dtype=float, copy=True).ravel()
        if r.size < 1:
            raise ValueError("a bandit needs at least one arm")
        if r.min() < 0.0 or r.max() > 1.0:
            raise ValueError("bandit rewards must lie in [0, 1]")
        r.setflags(write=False)
        object.__setattr__(self, "rewards", r)

    @property
    def num_arms(self) -> int:
        return self.rewards.size

    @property
    def optimal_arm(self) -> int:
        return int(np.argmax(self.rewards))

    @property
    def min_gap(self) -> float:
        """Delta_min = r(a*) - max_{a != a*} r(a); 0 for a single arm."""
        if self.num_arms == 1:
            return 0.0
        best = self.optimal_arm
        others = np.delete(self.rewards, best)
        return float(self.rewards[best] - others.max())

    def gap(self, a: int, b: int) -> float:
        return float(self.rewards[a] - self.rewards[b])
