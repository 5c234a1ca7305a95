"""
Backtracking (Armijo) line search and the gradient-descent inner loop.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from spmalab.errors import LineSearchExhausted
from spmalab.models.config import ArmijoConfig
from spmalab.models.features import FeatureMap, LinearPolicyParams, SurrogateProblem
from spmalab.services.surrogate_service import spma_surrogate

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], float]
ValueAndGrad = Callable[[np.ndarray], Tuple[float, np.ndarray]]


def armijo_search(
    objective: Objective,
    theta: np.ndarray,
    grad: np.ndarray,
    cfg: ArmijoConfig,
    value: Optional[float] = None,
    init_step: Optional[float] = None,
    direction: Optional[np.ndarray] = None,
) -> float:
    """
    Largest zeta = init * shrink^k, k = 0..max_backtracks, with

        f(theta - zeta D) <= f(theta) - c zeta <g, D>

    where D defaults to g (plain gradient step).

    Raises:
        LineSearchExhausted: if no tested step qualifies; the caller keeps theta
    """
    if direction is None:
        direction = grad
    f0 = objective(theta) if value is None else value
    slope = float(grad @ direction)
    step = cfg.init_step if init_step is None else init_step
    for _ in range(cfg.max_backtracks + 1):
        candidate = objective(theta - step * direction)
        if np.isfinite(candidate) and candidate <= f0 - cfg.sufficient_decrease_c * step * slope:
            return step
        step *= cfg.shrink_factor
    raise LineSearchExhausted(
        f"no step in {cfg.max_backtracks + 1} backtracks gave sufficient decrease", last_step=step
    )


@dataclass
class Conditioning:
    """
    How an inner loop descends: `weights` replace the state weights of the
    surrogate, `scale` divides the gradient and `max_step` caps each search.
    """

    weights: np.ndarray
    scale: Optional[np.ndarray] = None
    max_step: Optional[float] = None


def condition(features: FeatureMap, state_weights: np.ndarray) -> Conditioning:
    """
    State-separable features decouple the surrogate into one problem per state,
    so every active state gets equal weight and the minimizer does not move.
    Otherwise the gradient is scaled by diag(X^T W X) and steps are capped at
    2 / L, with L a Gershgorin bound on the scaled curvature (softmax curvature
    is at most 1/2).
    """
    w = np.asarray(state_weights, dtype=float)
    if features.state_separable:
        active = w > 0.0
        return Conditioning(weights=active / max(int(active.sum()), 1))
    w_sa = np.repeat(w, features.num_actions)
    gram = features.x.T @ (w_sa[:, None] * features.x)
    diag = np.diag(gram).copy()
    touched = diag > 0.0
    if not touched.any():
        return Conditioning(weights=w)
    rows = np.abs(gram[touched]).sum(axis=1) / diag[touched]
    scale = np.where(touched, diag, 1.0)
    return Conditioning(weights=w, scale=scale, max_step=2.0 / (0.5 * float(rows.max())))


@dataclass
class InnerLoopResult:
    theta: np.ndarray
    values: List[float] = field(default_factory=list)
    steps: List[float] = field(default_factory=list)
    stopped_early: bool = False


def minimize_armijo(
    value_and_grad: ValueAndGrad,
    theta0: np.ndarray,
    m: int,
    cfg: ArmijoConfig,
    scale: Optional[np.ndarray] = None,
    max_step: Optional[float] = None,
) -> InnerLoopResult:
    """
    m steps of gradient descent, each step size chosen by armijo_search and the
    next search warm-started at warm_start_factor times the accepted step.
    With a positive `scale` the direction is g / scale; `max_step` caps every
    search start.
    """
    theta = np.array(theta0, dtype=float, copy=True)
    value, grad = value_and_grad(theta)
    result = InnerLoopResult(theta=theta, values=[value])
    cap = np.inf if max_step is None else max_step
    init = min(cfg.init_step, cap)

    def objective(x: np.ndarray) -> float:
        return value_and_grad(x)[0]

    for k in range(m):
        direction = grad if scale is None else grad / scale
        if np.linalg.norm(direction) <= cfg.grad_tol:
            result.stopped_early = True
            break
        try:
            step = armijo_search(objective, theta, grad, cfg, value=value, init_step=init, direction=direction)
        except LineSearchExhausted:
            logger.debug("line search exhausted at inner step %d; keeping the iterate", k)
            result.stopped_early = True
            break
        theta = theta - step * direction
        value, grad = value_and_grad(theta)
        result.values.append(value)
        result.steps.append(step)
        init = min(cfg.warm_start_factor * step, cap)
    result.theta = theta
    return result


def inner_loop_minimize(
    prob: SurrogateProblem,
    theta0: np.ndarray,
    m: int,
    cfg: ArmijoConfig,
    precondition: bool = False,
) -> InnerLoopResult:
    """
    Armijo descent on spma_surrogate; m = 0 returns theta0. With `precondition`
    the descent runs under `condition`; `values[-1]` is always the surrogate
    of `prob` itself.
    """
    if m < 0:
        raise ValueError("m must be non-negative")
    if not precondition:
        return minimize_armijo(lambda th: spma_surrogate(LinearPolicyParams(th), prob), theta0, m, cfg)
    cond = condition(prob.features, prob.state_weights)
    solved = SurrogateProblem(state_weights=cond.weights, targets=prob.targets, features=prob.features)
    run = minimize_armijo(
        lambda th: spma_surrogate(LinearPolicyParams(th), solved),
        theta0,
        m,
        cfg,
        scale=cond.scale,
        max_step=cond.max_step,
    )
    if not np.array_equal(cond.weights, prob.state_weights):
        run.values[-1] = spma_surrogate(LinearPolicyParams(run.theta), prob)[0]
    return run
