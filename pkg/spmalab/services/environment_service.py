"""
Benchmark problems and feature maps.
"""
import math
from typing import Optional

import numpy as np

from spmalab.errors import InfeasibleGap
from spmalab.models.bandit import BanditInstance
from spmalab.models.config import GridSpec
from spmalab.models.features import FeatureMap
from spmalab.models.mdp import TabularMdp

UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
MOVES = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}
PERPENDICULAR = {UP: (LEFT, RIGHT), DOWN: (LEFT, RIGHT), LEFT: (UP, DOWN), RIGHT: (UP, DOWN)}

DEFAULT_CLIFF_GAMMA = 0.9
DEFAULT_FROZEN_LAKE_GAMMA = 0.99


def cliff_world_grid() -> GridSpec:
    """4x12 layout: start bottom-left, goal bottom-right, cliff in between."""
    return GridSpec(
        rows=4,
        cols=12,
        cliff_cells=[(3, c) for c in range(1, 11)],
        start=(3, 0),
        goal=(3, 11),
    )


def frozen_lake_grid(slippery: bool = False) -> GridSpec:
    """
    SFFF
    FHFH
    FFFH
    HFFG
    """
    return GridSpec(
        rows=4,
        cols=4,
        hole_cells=[(1, 1), (1, 3), (2, 3), (3, 0)],
        start=(0, 0),
        goal=(3, 3),
        slip_prob=2.0 / 3.0 if slippery else 0.0,
    )


def _step(grid: GridSpec, cell, action: int):
    dr, dc = MOVES[action]
    r, c = cell[0] + dr, cell[1] + dc
    if 0 <= r < grid.rows and 0 <= c < grid.cols:
        return (r, c)
    return tuple(cell)


def grid_mdp(grid: GridSpec, gamma: float, goal_reward_per_step: bool, name: str) -> TabularMdp:
    """
    Shared builder for grid worlds with actions up/down/left/right.

    Entering a cliff cell sends the agent back to start with reward 0; holes
    and the goal are absorbing. Entering the goal pays 1; with
    `goal_reward_per_step` the goal also pays 1 on every later step.
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma = {gamma} outside [0, 1)")
    S, A = grid.num_cells, 4
    cliffs = set(map(tuple, grid.cliff_cells))
    holes = set(map(tuple, grid.hole_cells))
    start, goal = tuple(grid.start), tuple(grid.goal)
    s_start, s_goal = grid.index(start), grid.index(goal)

    P = np.zeros((S, A, S))
    R = np.zeros((S, A))
    for row in range(grid.rows):
        for col in range(grid.cols):
            cell = (row, col)
            s = grid.index(cell)
            for a in range(A):
                if cell == goal:
                    P[s, a, s] = 1.0
                    R[s, a] = 1.0 if goal_reward_per_step else 0.0
                    continue
                if cell in holes:
                    P[s, a, s] = 1.0
                    continue
                if cell in cliffs:
                    P[s, a, s_start] = 1.0
                    continue
                slip = grid.slip_prob / 2.0
                outcomes = [(a, 1.0 - grid.slip_prob)] + [(b, slip) for b in PERPENDICULAR[a]]
                for direction, prob in outcomes:
                    if prob == 0.0:
                        continue
                    nxt = _step(grid, cell, direction)
                    if nxt in cliffs:
                        nxt = start
                    s_next = grid.index(nxt)
                    P[s, a, s_next] += prob
                    if s_next == s_goal:
                        R[s, a] += prob

    rho = np.zeros(S)
    rho[s_start] = 1.0
    return TabularMdp(transition=P, reward=np.clip(R, 0.0, 1.0), initial_dist=rho, discount=gamma, name=name)


def cliff_world(gamma: float = DEFAULT_CLIFF_GAMMA) -> TabularMdp:
    return grid_mdp(cliff_world_grid(), gamma, goal_reward_per_step=True, name="cliff_world")


def frozen_lake(gamma: float = DEFAULT_FROZEN_LAKE_GAMMA, slippery: bool = False) -> TabularMdp:
    return grid_mdp(frozen_lake_grid(slippery), gamma, goal_reward_per_step=False, name="frozen_lake")


def two_state_chain(gamma: float = 0.5, initial: Optional[np.ndarray] = None) -> TabularMdp:
    """
    a0 stays put with reward 0; a1 moves to the other state, paying 1 from s0 only.
    """
    P = np.zeros((2, 2, 2))
    P[0, 0, 0] = P[1, 0, 1] = 1.0
    P[0, 1, 1] = P[1, 1, 0] = 1.0
    R = np.array([[0.0, 1.0], [0.0, 0.0]])
    rho = np.array([1.0, 0.0]) if initial is None else np.asarray(initial, dtype=float)
    return TabularMdp(transition=P, reward=R, initial_dist=rho, discount=gamma, name="two_state_chain")


def random_mdp(
    num_states: int,
    num_actions: int,
    gamma: float,
    seed: int,
    uniform_initial: bool = False,
) -> TabularMdp:
    """Dirichlet transitions, U[0, 1] rewards, Dirichlet (or uniform) rho."""
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(num_states), size=(num_states, num_actions))
    P /= P.sum(axis=2, keepdims=True)
    R = rng.uniform(0.0, 1.0, size=(num_states, num_actions))
    if uniform_initial:
        rho = np.full(num_states, 1.0 / num_states)
    else:
        rho = rng.dirichlet(np.ones(num_states))
        rho /= rho.sum()
    return TabularMdp(transition=P, reward=R, initial_dist=rho, discount=gamma, name=f"random_{seed}")


def random_bandit(num_arms: int, min_gap: float, seed: int) -> BanditInstance:
    """
    K rewards in [0, 1] with a unique best arm at least min_gap above every other.

    Raises:
        InfeasibleGap: if K < 2, min_gap <= 0 or (K - 1) * min_gap > 1
    """
    if num_arms < 2:
        raise InfeasibleGap(f"need at least 2 arms, got {num_arms}")
    if min_gap <= 0:
        raise InfeasibleGap(f"min_gap must be positive, got {min_gap}")
    if (num_arms - 1) * min_gap > 1.0 + 1e-12:
        raise InfeasibleGap(f"{num_arms} arms cannot be spaced {min_gap} apart inside [0, 1]")
    rng = np.random.default_rng(seed)
    best = min(1.0, rng.uniform(min_gap, 1.0))
    others = rng.uniform(0.0, best - min_gap, size=num_arms - 1)
    rewards = np.empty(num_arms)
    a_star = int(rng.integers(num_arms))
    rewards[a_star] = best
    rewards[np.arange(num_arms) != a_star] = others
    return BanditInstance(rewards=rewards)


def bandit_as_mdp(instance: BanditInstance) -> TabularMdp:
    """Single state, gamma = 0: V = <pi, r> and A(a) = r(a) - <pi, r>."""
    K = instance.num_arms
    return TabularMdp(
        transition=np.ones((1, K, 1)),
        reward=instance.rewards[None, :],
        initial_dist=np.ones(1),
        discount=0.0,
        name="bandit",
    )


def one_hot_features(num_states: int, num_actions: int) -> FeatureMap:
    return FeatureMap(x=np.eye(num_states * num_actions), num_states=num_states, num_actions=num_actions)


def tile_coding(grid: GridSpec, num_actions: int, num_tilings: int, tile_size: int) -> FeatureMap:
    """
    Binary (tiling, tile, action) indicators. Tiling i is shifted by
    floor(i * tile_size / num_tilings) cells along both axes; cells pushed past
    the last tile fold into it.
    """
    if num_tilings < 1 or tile_size < 1:
        raise ValueError("num_tilings and tile_size must be >= 1")
    tiles_r = math.ceil(grid.rows / tile_size)
    tiles_c = math.ceil(grid.cols / tile_size)
    per_tiling = tiles_r * tiles_c * num_actions
    S = grid.num_cells
    x = np.zeros((S * num_actions, num_tilings * per_tiling))
    for i in range(num_tilings):
        offset = (i * tile_size) // num_tilings
        for row in range(grid.rows):
            for col in range(grid.cols):
                s = grid.index((row, col))
                tr = min((row + offset) // tile_size, tiles_r - 1)
                tc = min((col + offset) // tile_size, tiles_c - 1)
                base = i * per_tiling + (tr * tiles_c + tc) * num_actions
                for a in range(num_actions):
                    x[s * num_actions + a, base + a] = 1.0
    return FeatureMap(x=x, num_states=S, num_actions=num_actions)
