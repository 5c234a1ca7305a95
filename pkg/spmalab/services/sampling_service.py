"""
Sampling from the occupancy measure and the noisy-advantage oracle.
"""
from typing import Union

import numpy as np

from spmalab.models.mdp import Policy, TabularMdp
from spmalab.services.mdp_service import induced_chain

Seed = Union[int, list, tuple, np.random.SeedSequence]


def _search_table(probs: np.ndarray) -> np.ndarray:
    """
    Row r of a (R, C) probability table becomes r + cdf(r, .) in one flat sorted
    array, so a single searchsorted draws from every row at once.
    """
    cdf = np.minimum(np.cumsum(probs, axis=1), 1.0)
    cdf[:, -1] = 1.0
    return (cdf + np.arange(cdf.shape[0])[:, None]).ravel()


def _draw(table: np.ndarray, width: int, rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw from row `rows[i]` with uniform `u[i]`."""
    idx = np.searchsorted(table, rows + u, side="right") - rows * width
    return np.minimum(idx, width - 1)


def sample_states(mdp: TabularMdp, policy: Policy, n: int, seed: Seed) -> np.ndarray:
    """
    n i.i.d. draws from d^pi: start at s ~ rho, take L ~ Geometric(1 - gamma) - 1
    transitions of the chain P_pi and emit the state reached. Chains are sorted
    by length so the ones still moving form a prefix.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    S = mdp.num_states
    p_pi, _ = induced_chain(mdp, policy)
    chain = _search_table(p_pi)

    states = _draw(_search_table(mdp.initial_dist[None, :]), S, np.zeros(n, dtype=np.int64), rng.random(n))
    lengths = rng.geometric(1.0 - mdp.discount, size=n) - 1
    order = np.argsort(-lengths, kind="stable")
    states, lengths = states[order], lengths[order]
    moving = int(np.count_nonzero(lengths > 0))
    step = 0
    while moving:
        states[:moving] = _draw(chain, S, states[:moving], rng.random(moving))
        step += 1
        while moving and lengths[moving - 1] <= step:
            moving -= 1
    out = np.empty(n, dtype=np.int64)
    out[order] = states
    return out


def empirical_weights(states: np.ndarray, num_states: int) -> np.ndarray:
    """Uniform weight over the sampled multiset."""
    counts = np.bincount(states, minlength=num_states).astype(float)
    return counts / counts.sum()


def noisy_advantage(adv: np.ndarray, epsilon_approx: float, gamma: float, seed: Seed) -> np.ndarray:
    """
    A_hat = clip(A + U[-eps, eps], -1/(1-gamma), 1/(1-gamma)). Clipping can only
    shrink the error because |A| <= 1/(1-gamma).
    """
    if epsilon_approx < 0:
        raise ValueError("epsilon_approx must be non-negative")
    adv = np.asarray(adv, dtype=float)
    bound = 1.0 / (1.0 - gamma)
    if epsilon_approx == 0.0:
        return adv.copy()
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-epsilon_approx, epsilon_approx, size=adv.shape)
    return np.clip(adv + noise, -bound, bound)
