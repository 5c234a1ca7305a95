"""
Finite MDP value objects.

Arrays are copied on construction and marked read-only so instances can be
shared between threads.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from spmalab.errors import InvalidPolicy
from spmalab.settings import PROB_TOL, ROW_SUM_TOL


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def softmax_rows(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax with per-row max subtraction."""
    z = np.asarray(z, dtype=float)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax_rows(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """M = (S, A, P, r, rho, gamma) with P indexed as P[s, a, s']."""

    transition: np.ndarray
    reward: np.ndarray
    initial_dist: np.ndarray
    discount: float
    name: str = "mdp"

    def __post_init__(self):
        object.__setattr__(self, "transition", _frozen(self.transition))
        object.__setattr__(self, "reward", _frozen(self.reward))
        object.__setattr__(self, "initial_dist", _frozen(self.initial_dist))
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def horizon(self) -> float:
        """1 / (1 - gamma), the bound on |V| and |A|."""
        return 1.0 / (1.0 - self.discount)


@dataclass(frozen=True, eq=False)
class Policy:
    """Row-stochastic table pi[s, a]."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float, copy=True)
        if probs.ndim == 1:
            probs = probs[None, :]
        if probs.ndim != 2 or probs.shape[1] == 0:
            raise InvalidPolicy(f"expected a (S, A) table, got shape {probs.shape}")
        if not np.all(np.isfinite(probs)):
            raise InvalidPolicy("non-finite probability")
        low = probs.min()
        if low < -PROB_TOL:
            s, a = np.unravel_index(np.argmin(probs), probs.shape)
            raise InvalidPolicy(f"negative probability {low:.3e} at state {s}, action {a}")
        probs = np.maximum(probs, 0.0)
        row_err = np.abs(probs.sum(axis=1) - 1.0)
        if row_err.max() > ROW_SUM_TOL:
            s = int(np.argmax(row_err))
            raise InvalidPolicy(f"row {s} sums to {probs[s].sum():.12f}")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, num_states: int, num_actions: int) -> "Policy":
        return cls(np.full((num_states, num_actions), 1.0 / num_actions))

    @classmethod
    def from_logits(cls, logits: "Logits") -> "Policy":
        return cls(softmax_rows(logits.z))

    @property
    def num_states(self) -> int:
        return self.probs.shape[0]

    @property
    def num_actions(self) -> int:
        return self.probs.shape[1]


@dataclass(frozen=True, eq=False)
class Logits:
    """Unconstrained logits z[s, a]; pi(.|s) = softmax(z[s, .])."""

    z: np.ndarray

    def __post_init__(self):
        z = np.array(self.z, dtype=float, copy=True)
        if z.ndim == 1:
            z = z[None, :]
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @classmethod
    def from_policy(cls, policy: Policy) -> "Logits":
        if policy.probs.min() <= 0.0:
            raise InvalidPolicy("logits need a policy with full support")
        return cls(np.log(policy.probs))


@dataclass(frozen=True, eq=False)
class EvalResult:
    """Exact V, Q and A = Q - V of a fixed policy."""

    v: np.ndarray
    q: np.ndarray
    adv: np.ndarray

    def __post_init__(self):
        for name in ("v", "q", "adv"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


@dataclass(frozen=True, eq=False)
class Occupancy:
    """Discounted state-occupancy measure d^pi."""

    d: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "d", _frozen(self.d))


@dataclass(frozen=True, eq=False)
class OptimalSolution:
    v: np.ndarray
    q: np.ndarray
    policy: Policy
    iterations: int = 0
    residual: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "v", _frozen(self.v))
        object.__setattr__(self, "q", _frozen(self.q))
