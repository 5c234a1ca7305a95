"""
Exact finite-MDP machinery: validation, policy evaluation, occupancy measures
and the optimal-value oracle.
"""
import logging
from typing import Tuple

import numpy as np
import scipy.linalg

from spmalab.errors import InvalidMdp, InvalidPolicy, SingularSystem
from spmalab.models.mdp import EvalResult, Occupancy, OptimalSolution, Policy, TabularMdp
from spmalab.settings import PROB_TOL, TIE_TOL

logger = logging.getLogger(__name__)


def validate_mdp(mdp: TabularMdp) -> None:
    """
    Check every TabularMdp invariant.

    Raises:
        InvalidMdp: naming the first violated field and index
    """
    P, r, rho, gamma = mdp.transition, mdp.reward, mdp.initial_dist, mdp.discount

    if P.ndim != 3 or P.shape[0] != P.shape[2] or P.shape[0] < 1 or P.shape[1] < 1:
        raise InvalidMdp("transition", None, f"expected shape (S, A, S), got {P.shape}")
    S, A = P.shape[0], P.shape[1]
    if r.shape != (S, A):
        raise InvalidMdp("reward", None, f"expected shape {(S, A)}, got {r.shape}")
    if rho.shape != (S,):
        raise InvalidMdp("initial_dist", None, f"expected shape {(S,)}, got {rho.shape}")
    if not 0.0 <= gamma < 1.0:
        raise InvalidMdp("discount", None, f"gamma = {gamma} outside [0, 1)")

    bad = np.argwhere(~np.isfinite(P) | (P < 0.0))
    if bad.size:
        idx = tuple(int(i) for i in bad[0])
        raise InvalidMdp("transition", idx, f"entry {P[idx]} is not a probability")
    row_err = np.abs(P.sum(axis=2) - 1.0)
    bad = np.argwhere(row_err > PROB_TOL)
    if bad.size:
        idx = tuple(int(i) for i in bad[0])
        raise InvalidMdp("transition", idx, f"row sums to {P[idx].sum():.15f}")

    bad = np.argwhere(~np.isfinite(r) | (r < 0.0) | (r > 1.0))
    if bad.size:
        idx = tuple(int(i) for i in bad[0])
        raise InvalidMdp("reward", idx, f"reward {r[idx]} outside [0, 1]")

    bad = np.argwhere(~np.isfinite(rho) | (rho < 0.0))
    if bad.size:
        idx = (int(bad[0][0]),)
        raise InvalidMdp("initial_dist", idx, f"entry {rho[idx]} is not a probability")
    if abs(rho.sum() - 1.0) > PROB_TOL:
        raise InvalidMdp("initial_dist", None, f"sums to {rho.sum():.15f}")


def _check_policy(mdp: TabularMdp, policy: Policy) -> None:
    if policy.probs.shape != (mdp.num_states, mdp.num_actions):
        raise InvalidPolicy(
            f"policy shape {policy.probs.shape} does not match MDP {(mdp.num_states, mdp.num_actions)}"
        )


def induced_chain(mdp: TabularMdp, policy: Policy) -> Tuple[np.ndarray, np.ndarray]:
    """P_pi(s, s') and r_pi(s) of the Markov chain a policy induces."""
    _check_policy(mdp, policy)
    p_pi = np.einsum("sa,sat->st", policy.probs, mdp.transition)
    r_pi = np.einsum("sa,sa->s", policy.probs, mdp.reward)
    return p_pi, r_pi


def q_from_v(mdp: TabularMdp, v: np.ndarray) -> np.ndarray:
    return mdp.reward + mdp.discount * np.einsum("sat,t->sa", mdp.transition, v)


def policy_evaluate(mdp: TabularMdp, policy: Policy) -> EvalResult:
    """
    Solve (I - gamma P_pi) V = r_pi with a dense LU factorization.

    Raises:
        SingularSystem: if the solve fails (impossible for gamma < 1)
    """
    p_pi, r_pi = induced_chain(mdp, policy)
    if mdp.discount == 0.0:
        v = r_pi
    else:
        system = np.eye(mdp.num_states) - mdp.discount * p_pi
        try:
            v = scipy.linalg.solve(system, r_pi, check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise SingularSystem(f"policy evaluation solve failed: {e}")
    q = q_from_v(mdp, v)
    return EvalResult(v=v, q=q, adv=q - v[:, None])


def occupancy(mdp: TabularMdp, policy: Policy) -> Occupancy:
    """
    d^T = (1 - gamma) rho^T (I - gamma P_pi)^{-1}.

    Raises:
        SingularSystem: if the solve fails or returns an entry below -PROB_TOL
    """
    p_pi, _ = induced_chain(mdp, policy)
    if mdp.discount == 0.0:
        return Occupancy(d=mdp.initial_dist.copy())
    system = np.eye(mdp.num_states) - mdp.discount * p_pi.T
    try:
        d = (1.0 - mdp.discount) * scipy.linalg.solve(system, mdp.initial_dist)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise SingularSystem(f"occupancy solve failed: {e}")
    low = float(d.min())
    if low < -PROB_TOL:
        s = int(np.argmin(d))
        raise SingularSystem(f"occupancy solve returned d({s}) = {low:.3e}")
    # round-off only
    return Occupancy(d=np.maximum(d, 0.0))


def expected_return(mdp: TabularMdp, v: np.ndarray) -> float:
    """J = <rho, v>."""
    v = np.asarray(v, dtype=float)
    if v.shape != (mdp.num_states,):
        raise ValueError(f"value vector has shape {v.shape}, expected ({mdp.num_states},)")
    return float(mdp.initial_dist @ v)


def bellman_optimality(mdp: TabularMdp, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(T v, Q) where T v(s) = max_a [r(s, a) + gamma <P(.|s, a), v>]."""
    q = q_from_v(mdp, v)
    return q.max(axis=1), q


def greedy_policy(q: np.ndarray, tie_tol: float = TIE_TOL) -> Policy:
    """Uniform over every action within tie_tol of the row maximum."""
    best = q >= q.max(axis=1, keepdims=True) - tie_tol
    return Policy(best / best.sum(axis=1, keepdims=True))


def value_iteration(mdp: TabularMdp, tol: float) -> Tuple[np.ndarray, Policy]:
    """
    Iterate V <- T V from zero until ||T V - V||_inf <= tol.

    Returns:
        (V, greedy policy w.r.t. V with ties spread uniformly)
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    v = np.zeros(mdp.num_states)
    iterations = 0
    while True:
        tv, q = bellman_optimality(mdp, v)
        iterations += 1
        if np.max(np.abs(tv - v)) <= tol:
            break
        v = tv
    logger.debug("value iteration converged in %d sweeps", iterations)
    return v, greedy_policy(q)


def solve_optimal(mdp: TabularMdp, tol: float = 1e-10, max_polish: int = 100) -> OptimalSolution:
    """
    V* to linear-solve precision: value iteration, then policy-iteration
    polishing until the greedy support stops changing.
    """
    v, policy = value_iteration(mdp, tol)
    support = policy.probs > 0.0
    polish = 0
    for polish in range(1, max_polish + 1):
        ev = policy_evaluate(mdp, policy)
        v = ev.v
        policy = greedy_policy(ev.q)
        new_support = policy.probs > 0.0
        if np.array_equal(new_support, support):
            break
        support = new_support
    else:
        logger.warning("⚠️ optimal-value polishing did not stabilize after %d rounds", max_polish)
    tv, q = bellman_optimality(mdp, v)
    residual = float(np.max(np.abs(tv - v)))
    return OptimalSolution(v=v, q=q, policy=policy, iterations=polish, residual=residual)


def value_difference(mdp: TabularMdp, pi: Policy, pi_new: Policy) -> Tuple[float, float]:
    """
    Both sides of J(pi') - J(pi) = 1/(1-gamma) sum_s d^{pi'}(s) sum_a pi'(a|s) A^pi(s, a).
    """
    ev = policy_evaluate(mdp, pi)
    ev_new = policy_evaluate(mdp, pi_new)
    d_new = occupancy(mdp, pi_new).d
    lhs = expected_return(mdp, ev_new.v) - expected_return(mdp, ev.v)
    rhs = float(d_new @ np.einsum("sa,sa->s", pi_new.probs, ev.adv)) / (1.0 - mdp.discount)
    return lhs, rhs
