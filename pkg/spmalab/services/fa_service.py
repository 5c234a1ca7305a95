"""
Log-linear run drivers: SPMA (Algorithm 1), MDPO, regularized TRPO and softmax
policy gradient with Armijo steps.
"""
import logging
from typing import List, Optional, Tuple

import numpy as np

from spmalab.errors import ConfigError, LabError, LineSearchExhausted
from spmalab.models.config import FaRunConfig, Method
from spmalab.models.features import FeatureMap, LinearPolicyParams, SurrogateProblem
from spmalab.models.mdp import EvalResult, OptimalSolution, Policy, TabularMdp
from spmalab.models.record import IterationRecord
from spmalab.services.mdp_service import expected_return, occupancy, policy_evaluate, solve_optimal, validate_mdp
from spmalab.services.optim_service import Conditioning, armijo_search, condition, inner_loop_minimize, minimize_armijo
from spmalab.services.sampling_service import empirical_weights, noisy_advantage, sample_states
from spmalab.services.surrogate_service import (
    log_linear_policy,
    mdpo_surrogate,
    spma_surrogate,
    spma_target,
    surrogate_offset,
    trpo_surrogate,
)
from spmalab.services.tabular_service import make_record

logger = logging.getLogger(__name__)


def _policy(mdp: TabularMdp, features: FeatureMap, theta: np.ndarray) -> Policy:
    return log_linear_policy(features, LinearPolicyParams(theta), mdp.num_states, mdp.num_actions)


def _advantages(mdp: TabularMdp, ev: EvalResult, cfg: FaRunConfig, t: int) -> np.ndarray:
    mode = cfg.advantage_mode
    if mode.kind == "exact":
        return ev.adv
    return noisy_advantage(ev.adv, mode.epsilon_approx, mdp.discount, seed=[mode.seed, t])


def _state_weights(mdp: TabularMdp, policy: Policy, cfg: FaRunConfig, t: int) -> Tuple[np.ndarray, np.ndarray]:
    """(weights the surrogate is built from, exact occupancy)."""
    exact = occupancy(mdp, policy).d
    exact = exact / exact.sum()
    mode = cfg.state_mode
    if mode.kind == "exact_occupancy":
        return exact, exact
    states = sample_states(mdp, policy, mode.n_states, seed=[mode.seed, t])
    return empirical_weights(states, mdp.num_states), exact


def estimate_surrogate_gap(
    ideal: SurrogateProblem,
    theta_next: np.ndarray,
    cfg: FaRunConfig,
    t: int,
) -> float:
    """
    eps_stat + eps_bias proxy in KL terms:
    |l~(theta_{t+1}) - min l~| + max(min l~, 0), with min l~ estimated by long
    Armijo runs from theta_{t+1}, zero and a seeded random start.
    """
    offset = surrogate_offset(ideal)
    reached = spma_surrogate(LinearPolicyParams(theta_next), ideal)[0] + offset
    rng = np.random.default_rng([cfg.seed, t])
    starts = [theta_next, np.zeros_like(theta_next)]
    while len(starts) < cfg.gap_restarts:
        starts.append(rng.normal(size=theta_next.shape))
    best = reached
    for start in starts[: cfg.gap_restarts]:
        run = inner_loop_minimize(ideal, start, cfg.gap_iters, cfg.armijo, precondition=cfg.precondition)
        best = min(best, run.values[-1] + offset)
    return abs(reached - best) + max(best, 0.0)


def _check_fa(mdp: TabularMdp, features: FeatureMap, cfg: FaRunConfig, method: Method) -> None:
    validate_mdp(mdp)
    if (features.num_states, features.num_actions) != (mdp.num_states, mdp.num_actions):
        raise ConfigError("features", "feature map does not match the MDP")
    if method != Method.SPG:
        problem = cfg.check_admissible(mdp.discount)
        if problem:
            raise ConfigError("outer_step_size", problem)


def _run_surrogate_loop(
    mdp: TabularMdp,
    features: FeatureMap,
    cfg: FaRunConfig,
    method: Method,
    optimal: Optional[OptimalSolution],
) -> List[IterationRecord]:
    _check_fa(mdp, features, cfg, method)
    optimal = optimal or solve_optimal(mdp)
    eta = cfg.outer_step_size
    theta = np.zeros(features.dim)
    records: List[IterationRecord] = []

    logger.info("🚀 %s-FA on %s: eta=%g, m=%d, T=%d, d=%d", method.value, mdp.name, eta, cfg.inner_iters, cfg.outer_iters, features.dim)
    for t in range(cfg.outer_iters + 1):
        policy = _policy(mdp, features, theta)
        ev = policy_evaluate(mdp, policy)
        record = make_record(t, mdp, policy, ev.q, ev.v, optimal, eta, method.value)
        records.append(record)
        if t == cfg.outer_iters:
            break
        try:
            adv = _advantages(mdp, ev, cfg, t)
            weights, exact = _state_weights(mdp, policy, cfg, t)
            theta, final, gap = _fit(method, mdp, features, cfg, theta, policy, adv, weights, exact, t)
        except LabError as e:
            raise e.at_iteration(t)
        record.surrogate_final = final
        record.surrogate_gap = gap
        logger.debug("t=%d J=%.8f surrogate=%s", t, record.j_value, final)

    logger.info("✅ %s-FA finished: J=%.6f, subopt_rho=%.3e", method.value, records[-1].j_value, records[-1].subopt_rho)
    return records


def _fit(
    method: Method,
    mdp: TabularMdp,
    features: FeatureMap,
    cfg: FaRunConfig,
    theta: np.ndarray,
    policy: Policy,
    adv: np.ndarray,
    weights: np.ndarray,
    exact: np.ndarray,
    t: int,
) -> Tuple[np.ndarray, float, Optional[float]]:
    """One outer iteration: returns (theta_{t+1}, final surrogate value, gap proxy)."""
    eta = cfg.outer_step_size
    if method == Method.SPMA:
        targets = spma_target(policy, adv, eta)
        prob = SurrogateProblem(state_weights=weights, targets=targets, features=features)
        run = inner_loop_minimize(prob, theta, cfg.inner_iters, cfg.armijo, precondition=cfg.precondition)
        final = run.values[-1] + surrogate_offset(prob)
        gap = None
        if cfg.estimate_surrogate_gap:
            ideal = SurrogateProblem(state_weights=exact, targets=targets, features=features)
            gap = estimate_surrogate_gap(ideal, run.theta, cfg, t)
        return run.theta, final, gap

    surrogate = mdpo_surrogate if method == Method.MDPO else trpo_surrogate
    cond = condition(features, weights) if cfg.precondition else Conditioning(weights=weights)
    run = minimize_armijo(
        lambda th: surrogate(LinearPolicyParams(th), policy, adv, eta, cond.weights, features),
        theta,
        cfg.inner_iters,
        cfg.armijo,
        scale=cond.scale,
        max_step=cond.max_step,
    )
    final = surrogate(LinearPolicyParams(run.theta), policy, adv, eta, weights, features)[0]
    return run.theta, final, None


def run_spma_fa(
    mdp: TabularMdp,
    features: FeatureMap,
    cfg: FaRunConfig,
    optimal: Optional[OptimalSolution] = None,
) -> List[IterationRecord]:
    """
    Per outer iteration: build pi_{t+1/2} targets from exact or sampled states
    and exact or noisy advantages, run m Armijo-GD steps from theta_t, and
    take theta_{t+1} = omega_m.
    """
    return _run_surrogate_loop(mdp, features, cfg, Method.SPMA, optimal)


def run_mdpo_fa(
    mdp: TabularMdp,
    features: FeatureMap,
    cfg: FaRunConfig,
    optimal: Optional[OptimalSolution] = None,
) -> List[IterationRecord]:
    return _run_surrogate_loop(mdp, features, cfg, Method.MDPO, optimal)


def run_trpo_fa(
    mdp: TabularMdp,
    features: FeatureMap,
    cfg: FaRunConfig,
    optimal: Optional[OptimalSolution] = None,
) -> List[IterationRecord]:
    return _run_surrogate_loop(mdp, features, cfg, Method.TRPO_REGULARIZED, optimal)


def policy_return(mdp: TabularMdp, features: FeatureMap, theta: np.ndarray) -> float:
    """J(theta) evaluated exactly."""
    return expected_return(mdp, policy_evaluate(mdp, _policy(mdp, features, theta)).v)


def policy_gradient(mdp: TabularMdp, features: FeatureMap, params: LinearPolicyParams) -> Tuple[float, np.ndarray]:
    """
    (J, grad J) with grad J = 1/(1-gamma) sum_s d(s) sum_a pi(a|s) A(s, a) x(s, a);
    the score's mean term drops out because advantages are zero-mean under pi.
    """
    policy = _policy(mdp, features, params.theta)
    ev = policy_evaluate(mdp, policy)
    d = occupancy(mdp, policy).d
    per_sa = d[:, None] * policy.probs * ev.adv / (1.0 - mdp.discount)
    return expected_return(mdp, ev.v), features.pullback(per_sa)


def run_spg_fa(
    mdp: TabularMdp,
    features: FeatureMap,
    cfg: FaRunConfig,
    optimal: Optional[OptimalSolution] = None,
) -> List[IterationRecord]:
    """Gradient ascent on exact J(theta), each step size set by Armijo on -J."""
    _check_fa(mdp, features, cfg, Method.SPG)
    optimal = optimal or solve_optimal(mdp)
    theta = np.zeros(features.dim)
    init = cfg.armijo.init_step
    records: List[IterationRecord] = []

    def neg_return(x: np.ndarray) -> float:
        return -policy_return(mdp, features, x)

    logger.info("🚀 SPG-FA on %s: T=%d, d=%d", mdp.name, cfg.outer_iters, features.dim)
    for t in range(cfg.outer_iters + 1):
        policy = _policy(mdp, features, theta)
        ev = policy_evaluate(mdp, policy)
        records.append(make_record(t, mdp, policy, ev.q, ev.v, optimal, 0.0, Method.SPG.value))
        if t == cfg.outer_iters:
            break
        j_value, grad = policy_gradient(mdp, features, LinearPolicyParams(theta))
        if not np.any(grad):
            continue
        try:
            step = armijo_search(neg_return, theta, -grad, cfg.armijo, value=-j_value, init_step=init)
        except LineSearchExhausted:
            logger.warning("⚠️ SPG line search exhausted at t=%d; keeping theta", t)
            continue
        theta = theta + step * grad
        init = cfg.armijo.warm_start_factor * step

    logger.info("✅ SPG-FA finished: J=%.6f, subopt_rho=%.3e", records[-1].j_value, records[-1].subopt_rho)
    return records


FA_RUNNERS = {
    Method.SPMA: run_spma_fa,
    Method.MDPO: run_mdpo_fa,
    Method.TRPO_REGULARIZED: run_trpo_fa,
    Method.SPG: run_spg_fa,
}
