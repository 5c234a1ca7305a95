"""
Log-linear policies and the per-iteration surrogates they are fitted to.

Every surrogate returns (value, gradient w.r.t. theta). Gradients are formed
per (s, a) in logit space and pulled back through X once, so the reduction
order is fixed.
"""
from typing import Tuple

import numpy as np

from spmalab.errors import InvalidTarget
from spmalab.models.features import FeatureMap, LinearPolicyParams, SurrogateProblem
from spmalab.models.mdp import Policy, log_softmax_rows, softmax_rows
from spmalab.settings import PROB_TOL, ROW_SUM_TOL

TINY = np.finfo(float).tiny


def _check_features(features: FeatureMap, num_states: int, num_actions: int) -> None:
    if (features.num_states, features.num_actions) != (num_states, num_actions):
        raise ValueError(
            f"features describe {(features.num_states, features.num_actions)}, expected {(num_states, num_actions)}"
        )


def log_linear_policy(features: FeatureMap, params: LinearPolicyParams, num_states: int, num_actions: int) -> Policy:
    """pi(a|s) = softmax_a <x(s, a), theta>."""
    _check_features(features, num_states, num_actions)
    return Policy(softmax_rows(features.logits(params.theta)))


def spma_target(policy: Policy, adv: np.ndarray, eta: float) -> np.ndarray:
    """
    pi_{t+1/2}(.|s) = pi_t(.|s) (1 + eta A(s, .)).

    Rows are renormalized; with exact advantages this is a no-op to rounding,
    with noisy advantages it restores the probability rows the noise breaks.

    Raises:
        InvalidTarget: if any entry is below -1e-12
    """
    target = policy.probs * (1.0 + eta * np.asarray(adv, dtype=float))
    low = target.min()
    if low < -PROB_TOL:
        s, a = np.unravel_index(np.argmin(target), target.shape)
        raise InvalidTarget(f"target probability {low:.3e} at state {s}, action {a}; step size too large")
    target = np.maximum(target, 0.0)
    sums = target.sum(axis=1, keepdims=True)
    if np.any(sums <= 0.0):
        raise InvalidTarget("target row with no mass")
    if np.abs(sums - 1.0).max() > ROW_SUM_TOL:
        target = target / sums
    return target


def spma_surrogate(params: LinearPolicyParams, prob: SurrogateProblem) -> Tuple[float, np.ndarray]:
    """
    Weighted cross-entropy sum_s w(s) H(p(s, .), q_theta(s, .)) and its gradient
    sum_s w(s) sum_a (q - p) x(s, a). Differs from the KL form by a
    theta-independent constant (see surrogate_offset).
    """
    features = prob.features
    active = prob.active_states
    w = prob.state_weights[active][:, None]
    p = prob.targets[active]
    z = features.logits(params.theta)[active]
    log_q = log_softmax_rows(z)
    value = float(-(w * np.where(p > 0.0, p * log_q, 0.0)).sum())
    per_sa = np.zeros((features.num_states, features.num_actions))
    per_sa[active] = w * (np.exp(log_q) - p)
    return value, features.pullback(per_sa)


def surrogate_offset(prob: SurrogateProblem) -> float:
    """sum_s w(s) sum_a p log p: add to the cross-entropy value to get the KL value."""
    active = prob.active_states
    w = prob.state_weights[active][:, None]
    p = prob.targets[active]
    plogp = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    return float((w * plogp).sum())


def _weights_and_logs(policy: Policy, w: np.ndarray, features: FeatureMap):
    w = np.asarray(w, dtype=float)
    _check_features(features, policy.num_states, policy.num_actions)
    if w.shape != (policy.num_states,):
        raise ValueError(f"state weights have shape {w.shape}")
    active = np.flatnonzero(w > 0.0)
    log_pi = np.log(np.maximum(policy.probs[active], TINY))
    return w, active, log_pi


def mdpo_surrogate(
    params: LinearPolicyParams,
    policy: Policy,
    adv: np.ndarray,
    eta: float,
    w: np.ndarray,
    features: FeatureMap,
) -> Tuple[float, np.ndarray]:
    """
    sum_s w(s) [KL(q_theta(.|s) || pi_t(.|s)) - eta <q_theta(.|s), A(s, .)>].

    Per state the logit gradient is q (g - <q, g>) with g = log q - log pi_t - eta A.
    Non-convex in theta.
    """
    w, active, log_pi = _weights_and_logs(policy, w, features)
    a = np.asarray(adv, dtype=float)[active]
    log_q = log_softmax_rows(features.logits(params.theta)[active])
    q = np.exp(log_q)
    g = log_q - log_pi - eta * a
    ws = w[active][:, None]
    value = float((ws * q * g).sum())
    per_sa = np.zeros((features.num_states, features.num_actions))
    per_sa[active] = ws * q * (g - (q * g).sum(axis=1, keepdims=True))
    return value, features.pullback(per_sa)


def trpo_surrogate(
    params: LinearPolicyParams,
    policy: Policy,
    adv: np.ndarray,
    eta: float,
    w: np.ndarray,
    features: FeatureMap,
) -> Tuple[float, np.ndarray]:
    """
    Regularized TRPO: sum_s w(s) [KL(pi_t(.|s) || q_theta(.|s)) - eta <q_theta(.|s), A(s, .)>].
    """
    w, active, log_pi = _weights_and_logs(policy, w, features)
    pi = policy.probs[active]
    a = np.asarray(adv, dtype=float)[active]
    log_q = log_softmax_rows(features.logits(params.theta)[active])
    q = np.exp(log_q)
    ws = w[active][:, None]
    kl = np.where(pi > 0.0, pi * (log_pi - log_q), 0.0)
    value = float((ws * (kl - eta * q * a)).sum())
    linear = q * (a - (q * a).sum(axis=1, keepdims=True))
    per_sa = np.zeros((features.num_states, features.num_actions))
    per_sa[active] = ws * ((q - pi) - eta * linear)
    return value, features.pullback(per_sa)
