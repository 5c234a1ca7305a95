"""
Log-linear policy parameterization: features, parameters and the
per-iteration surrogate problem.
"""
from dataclasses import dataclass

import numpy as np

from spmalab.errors import InvalidTarget
from spmalab.settings import PROB_TOL, ROW_SUM_TOL


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Feature matrix X of shape (S*A, d); row s*A + a holds x(s, a)."""

    x: np.ndarray
    num_states: int
    num_actions: int

    def __post_init__(self):
        x = np.array(self.x, dtype=float, copy=True)
        if x.ndim != 2 or x.shape[1] < 1:
            raise ValueError(f"feature matrix must be 2-D with d >= 1, got {x.shape}")
        if x.shape[0] != self.num_states * self.num_actions:
            raise ValueError(
                f"feature matrix has {x.shape[0]} rows, expected {self.num_states * self.num_actions}"
            )
        if not np.all(np.isfinite(x)):
            raise ValueError("feature matrix has non-finite entries")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def row(self, s: int, a: int) -> np.ndarray:
        return self.x[s * self.num_actions + a]

    def logits(self, theta: np.ndarray) -> np.ndarray:
        """z_theta(s, a) = <x(s, a), theta> as an (S, A) table."""
        return (self.x @ theta).reshape(self.num_states, self.num_actions)

    def pullback(self, per_sa: np.ndarray) -> np.ndarray:
        """X^T vec(g) for an (S, A) table g; the chain rule through z_theta."""
        return self.x.T @ np.asarray(per_sa, dtype=float).reshape(-1)

    @property
    def state_separable(self) -> bool:
        """True when every feature is non-zero in at most one state (e.g. one-hot)."""
        touched = np.abs(self.x).reshape(self.num_states, self.num_actions, -1).sum(axis=1) > 0.0
        return bool(np.all(touched.sum(axis=0) <= 1))


@dataclass(frozen=True, eq=False)
class LinearPolicyParams:
    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float, copy=True).ravel()
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta has non-finite entries")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def zeros(cls, dim: int) -> "LinearPolicyParams":
        return cls(np.zeros(dim))


@dataclass(frozen=True, eq=False)
class SurrogateProblem:
    """
    Weighted soft-label classification problem solved at each outer iteration.

    Rows of `targets` are only meaningful where `state_weights` is positive.
    """

    state_weights: np.ndarray
    targets: np.ndarray
    features: FeatureMap

    def __post_init__(self):
        w = np.array(self.state_weights, dtype=float, copy=True)
        p = np.array(self.targets, dtype=float, copy=True)
        if w.shape != (self.features.num_states,):
            raise ValueError(f"state weights have shape {w.shape}")
        if p.shape != (self.features.num_states, self.features.num_actions):
            raise ValueError(f"targets have shape {p.shape}")
        if w.min() < 0.0 or abs(w.sum() - 1.0) > ROW_SUM_TOL:
            raise ValueError("state weights must be a probability vector")
        active = w > 0.0
        rows = p[active]
        if rows.size and (rows.min() < -PROB_TOL or np.abs(rows.sum(axis=1) - 1.0).max() > ROW_SUM_TOL):
            raise InvalidTarget("target rows with positive weight must be probability rows")
        p[active] = np.maximum(rows, 0.0)
        w.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "state_weights", w)
        object.__setattr__(self, "targets", p)

    @property
    def active_states(self) -> np.ndarray:
        return np.flatnonzero(self.state_weights > 0.0)
