"""
Closed-form tabular policy updates and the exact-advantage run driver.
"""
import logging
from typing import List, Optional, Tuple

import numpy as np

from spmalab.errors import (
    ConfigError,
    InconsistentAdvantage,
    LabError,
    LogitPolicyMismatch,
    StepSizeTooLarge,
)
from spmalab.models.config import Method, TabularRunConfig
from spmalab.models.mdp import Logits, OptimalSolution, Policy, TabularMdp, softmax_rows
from spmalab.models.record import IterationRecord
from spmalab.services.diagnostics_service import contraction_factor, gap_quantities
from spmalab.services.mdp_service import expected_return, policy_evaluate, solve_optimal, validate_mdp
from spmalab.settings import ADV_MEAN_TOL, BOUND_SLACK, PROB_TOL, TIE_TOL

logger = logging.getLogger(__name__)

LOGIT_MATCH_TOL = 1e-9


def _as_policy(probs: np.ndarray, what: str) -> Policy:
    low = probs.min()
    if low < -PROB_TOL:
        s, a = np.unravel_index(np.argmin(probs), probs.shape)
        raise StepSizeTooLarge(f"{what} produced probability {low:.3e} at state {s}, action {a}")
    return Policy(probs)


def _bandit_probs(p: np.ndarray, r: np.ndarray, eta: float) -> np.ndarray:
    new = p * (1.0 + eta * (r - p @ r))
    if new.min() < -PROB_TOL:
        a = int(np.argmin(new))
        raise StepSizeTooLarge(f"SPMA bandit step produced probability {new[a]:.3e} at action {a}")
    return new


def _bandit_gap_probs(p: np.ndarray, signs: np.ndarray) -> np.ndarray:
    return p * (1.0 + signs @ p)


def spma_bandit_step(policy: Policy, rewards: np.ndarray, eta: float) -> Policy:
    """pi'(a) = pi(a) (1 + eta (r(a) - <pi, r>))."""
    return Policy(_bandit_probs(policy.probs[0], np.asarray(rewards, dtype=float), eta))


def spma_bandit_gap_step(policy: Policy, rewards: np.ndarray) -> Policy:
    """
    Gap-dependent step sizes eta(a, a') = 1 / |Delta(a, a')|:

        pi'(a) = pi(a) [1 + sum_{a' != a} pi(a') sign(r(a) - r(a'))]

    with sign(0) = 0 so tied arms contribute nothing.
    """
    r = np.asarray(rewards, dtype=float)
    signs = np.sign(r[:, None] - r[None, :])
    return _as_policy(_bandit_gap_probs(policy.probs[0], signs)[None, :], "gap-dependent SPMA step")


def _check_zero_mean(policy: Policy, adv: np.ndarray) -> None:
    mean = np.einsum("sa,sa->s", policy.probs, adv)
    worst = int(np.argmax(np.abs(mean)))
    if abs(mean[worst]) > ADV_MEAN_TOL:
        raise InconsistentAdvantage(
            f"sum_a pi(a|s) A(s, a) = {mean[worst]:.3e} at state {worst}; advantages must be zero-mean"
        )


def spma_step(policy: Policy, adv: np.ndarray, eta: float) -> Policy:
    """pi'(a|s) = pi(a|s) (1 + eta A(s, a)); no normalization needed."""
    adv = np.asarray(adv, dtype=float)
    _check_zero_mean(policy, adv)
    return _as_policy(policy.probs * (1.0 + eta * adv), "SPMA step")


def npg_step(policy: Policy, adv: np.ndarray, eta: float) -> Policy:
    """pi'(a|s) proportional to pi(a|s) exp(eta A(s, a))."""
    scaled = eta * np.asarray(adv, dtype=float)
    weights = policy.probs * np.exp(scaled - scaled.max(axis=1, keepdims=True))
    return Policy(weights / weights.sum(axis=1, keepdims=True))


# Tabular MDPO / policy mirror descent has the same closed form as NPG.
mdpo_tabular_step = npg_step


def spg_step(logits: Logits, policy: Policy, adv: np.ndarray, eta: float) -> Tuple[Logits, Policy]:
    """z'(s, a) = z(s, a) + eta pi(a|s) A(s, a); pi' = softmax(z')."""
    gap = np.abs(softmax_rows(logits.z) - policy.probs).max()
    if gap > LOGIT_MATCH_TOL:
        raise LogitPolicyMismatch(f"softmax(z) differs from pi by {gap:.3e}")
    z_new = logits.z + eta * policy.probs * np.asarray(adv, dtype=float)
    return Logits(z_new), Policy(softmax_rows(z_new))


def _initial_state(mdp: TabularMdp, cfg: TabularRunConfig) -> Tuple[Policy, Optional[Logits]]:
    shape = (mdp.num_states, mdp.num_actions)
    if isinstance(cfg.init, Logits):
        logits = cfg.init
        policy = Policy.from_logits(logits)
    elif isinstance(cfg.init, Policy):
        policy = cfg.init
        logits = Logits.from_policy(policy) if cfg.method == Method.SPG else None
    else:
        policy = Policy.uniform(*shape)
        logits = Logits(np.zeros(shape))
    if policy.probs.shape != shape:
        raise ConfigError("init", f"initial policy shape {policy.probs.shape} does not match {shape}")
    return policy, logits


def check_step_size(mdp: TabularMdp, cfg: TabularRunConfig) -> None:
    """SPMA on MDPs needs eta <= max_step_fraction * (1 - gamma); bandits need eta <= 1."""
    if cfg.method != Method.SPMA:
        return
    limit = 1.0 if mdp.discount == 0.0 else cfg.max_step_fraction * (1.0 - mdp.discount)
    if cfg.step_size > limit:
        raise ConfigError("step_size", f"SPMA step size {cfg.step_size} exceeds the admissible {limit:.6g}")


def make_record(
    t: int,
    mdp: TabularMdp,
    policy: Policy,
    q: np.ndarray,
    v: np.ndarray,
    optimal: OptimalSolution,
    eta: float,
    method: str,
) -> IterationRecord:
    gaps = gap_quantities(policy.probs, q)
    j_value = expected_return(mdp, v)
    return IterationRecord(
        t=t,
        j_value=j_value,
        subopt_inf=float(np.max(np.abs(optimal.v - v))),
        subopt_rho=expected_return(mdp, optimal.v) - j_value,
        c_t=gaps.c_t,
        min_gap=gaps.min_gap,
        alpha_t=contraction_factor(gaps.c_t, eta, mdp.discount),
        method=method,
        policy=policy.probs,
        values=np.array(v),
    )


def _run_bandit(mdp: TabularMdp, cfg: TabularRunConfig, policy: Policy) -> List[IterationRecord]:
    """Single state with gamma = 0: V = <pi, r> and Q = r, so nothing is solved."""
    r = mdp.reward[0]
    best = float(r.max())
    tied = r >= best - TIE_TOL
    delta = None if tied.all() else best - float(r[~tied].max())
    signs = np.sign(r[:, None] - r[None, :])
    eta = cfg.step_size
    spma = cfg.method == Method.SPMA
    p = policy.probs[0]
    records: List[IterationRecord] = []
    for t in range(cfg.iterations + 1):
        j_value = float(p @ r)
        subopt = best - j_value
        c_t = None if delta is None else float(p[tied].sum()) * delta
        record = IterationRecord(
            t=t,
            j_value=j_value,
            subopt_inf=subopt,
            subopt_rho=subopt,
            c_t=c_t,
            min_gap=delta,
            alpha_t=contraction_factor(c_t, eta, 0.0),
            method=cfg.method.value,
            policy=p[None, :],
            values=np.array([j_value]),
        )
        if spma:
            record.bound_ok = not records or subopt <= records[-1].alpha_t * records[-1].subopt_inf + BOUND_SLACK
        records.append(record)
        if t == cfg.iterations:
            break
        try:
            p = _bandit_probs(p, r, eta) if spma else _bandit_gap_probs(p, signs)
        except LabError as e:
            raise e.at_iteration(t)
    return records


def run_tabular(
    mdp: TabularMdp,
    cfg: TabularRunConfig,
    optimal: Optional[OptimalSolution] = None,
) -> List[IterationRecord]:
    """
    Iterate evaluate -> step -> record for cfg.iterations updates.

    Returns T + 1 records, one per evaluated policy pi_0 .. pi_T. For SPMA each
    record's bound_ok states whether the contraction from the previous
    iteration held.
    """
    validate_mdp(mdp)
    check_step_size(mdp, cfg)
    if cfg.method == Method.SPMA_BANDIT_GAP and mdp.num_states != 1:
        raise ConfigError("method", "SPMA_bandit_gap needs a single-state (bandit) problem")
    policy, logits = _initial_state(mdp, cfg)
    eta = cfg.step_size
    method = cfg.method.value

    logger.info("🚀 %s on %s: eta=%g, T=%d", method, mdp.name, eta, cfg.iterations)
    if mdp.num_states == 1 and mdp.discount == 0.0 and cfg.method in (Method.SPMA, Method.SPMA_BANDIT_GAP):
        trace = _run_bandit(mdp, cfg, policy)
        logger.info("✅ %s finished: J=%.6f, subopt=%.3e", method, trace[-1].j_value, trace[-1].subopt_inf)
        return trace

    optimal = optimal or solve_optimal(mdp)
    records: List[IterationRecord] = []
    for t in range(cfg.iterations + 1):
        ev = policy_evaluate(mdp, policy)
        record = make_record(t, mdp, policy, ev.q, ev.v, optimal, eta, method)
        if cfg.method == Method.SPMA:
            if records:
                prev = records[-1]
                record.bound_ok = record.subopt_inf <= prev.alpha_t * prev.subopt_inf + BOUND_SLACK
            else:
                record.bound_ok = True
        records.append(record)
        logger.debug("t=%d J=%.12f subopt_inf=%.3e", t, record.j_value, record.subopt_inf)
        if t == cfg.iterations:
            break
        try:
            if cfg.method == Method.SPMA:
                policy = spma_step(policy, ev.adv, eta)
            elif cfg.method in (Method.NPG, Method.MDPO_TABULAR):
                policy = npg_step(policy, ev.adv, eta)
            elif cfg.method == Method.SPG:
                logits, policy = spg_step(logits, policy, ev.adv, eta)
            else:
                policy = spma_bandit_gap_step(policy, mdp.reward[0])
        except LabError as e:
            raise e.at_iteration(t)

    logger.info("✅ %s finished: J=%.6f, subopt_inf=%.3e", method, records[-1].j_value, records[-1].subopt_inf)
    return records


def iterations_to_reach(records: List[IterationRecord], threshold: float) -> Optional[int]:
    """First t with subopt_inf <= threshold, or None."""
    for rec in records:
        if rec.subopt_inf <= threshold:
            return rec.t
    return None


def iterations_to_threshold(
    mdp: TabularMdp,
    method: Method,
    eta: float,
    threshold: float,
    max_iters: int,
    optimal: Optional[OptimalSolution] = None,
) -> Optional[int]:
    """
    First t with ||V* - V_t||_inf <= threshold from the uniform policy, or None
    if max_iters updates do not get there. Keeps no per-iteration records.
    """
    optimal = optimal or solve_optimal(mdp)
    policy = Policy.uniform(mdp.num_states, mdp.num_actions)
    logits = Logits(np.zeros((mdp.num_states, mdp.num_actions)))
    for t in range(max_iters + 1):
        ev = policy_evaluate(mdp, policy)
        if np.max(np.abs(optimal.v - ev.v)) <= threshold:
            return t
        if t == max_iters:
            break
        try:
            if method == Method.SPMA:
                policy = spma_step(policy, ev.adv, eta)
            elif method == Method.SPG:
                logits, policy = spg_step(logits, policy, ev.adv, eta)
            else:
                policy = npg_step(policy, ev.adv, eta)
        except LabError as e:
            raise e.at_iteration(t)
    return None
