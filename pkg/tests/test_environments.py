import numpy as np
import pytest

from spmalab.errors import InfeasibleGap
from spmalab.models.config import GridSpec
from spmalab.models.mdp import Policy
from spmalab.services.environment_service import (
    DOWN,
    RIGHT,
    UP,
    bandit_as_mdp,
    cliff_world,
    cliff_world_grid,
    frozen_lake,
    frozen_lake_grid,
    one_hot_features,
    random_bandit,
    random_mdp,
    tile_coding,
)
from spmalab.services.mdp_service import policy_evaluate, solve_optimal, validate_mdp


class TestCliffWorld:
    def test_valid(self):
        mdp = cliff_world()
        validate_mdp(mdp)
        assert (mdp.num_states, mdp.num_actions) == (48, 4)
        assert mdp.discount == 0.9

    def test_stepping_into_cliff_returns_to_start(self):
        grid = cliff_world_grid()
        mdp = cliff_world()
        start = grid.index(grid.start)
        assert mdp.transition[start, RIGHT, start] == 1.0

    def test_goal_is_absorbing_and_rewarding(self):
        grid = cliff_world_grid()
        mdp = cliff_world()
        goal = grid.index(grid.goal)
        np.testing.assert_allclose(mdp.transition[goal, :, goal], 1.0)
        np.testing.assert_allclose(mdp.reward[goal], 1.0)
        above_goal = grid.index((2, 11))
        assert mdp.reward[above_goal, DOWN] == 1.0

    def test_optimal_value_positive_at_start(self):
        mdp = cliff_world()
        opt = solve_optimal(mdp)
        assert opt.v[cliff_world_grid().index((3, 0))] > 0.0


class TestFrozenLake:
    def test_deterministic_valid(self):
        mdp = frozen_lake()
        validate_mdp(mdp)
        assert (mdp.num_states, mdp.num_actions) == (16, 4)
        assert mdp.discount == 0.99

    def test_holes_absorb_without_reward(self):
        grid = frozen_lake_grid()
        mdp = frozen_lake()
        hole = grid.index((1, 1))
        np.testing.assert_allclose(mdp.transition[hole, :, hole], 1.0)
        np.testing.assert_allclose(mdp.reward[hole], 0.0)

    def test_slippery_moves_sideways(self):
        grid = frozen_lake_grid(slippery=True)
        mdp = frozen_lake(slippery=True)
        validate_mdp(mdp)
        s = grid.index((2, 1))
        row = mdp.transition[s, DOWN]
        assert row[grid.index((3, 1))] == pytest.approx(1.0 / 3.0)
        assert row[grid.index((2, 0))] == pytest.approx(1.0 / 3.0)
        assert row[grid.index((2, 2))] == pytest.approx(1.0 / 3.0)

    def test_wall_bump_stays(self):
        grid = frozen_lake_grid()
        mdp = frozen_lake()
        s = grid.index((0, 0))
        assert mdp.transition[s, UP, s] == 1.0


class TestGridSpec:
    def test_start_on_hazard_rejected(self):
        with pytest.raises(ValueError):
            GridSpec(rows=2, cols=2, hole_cells=[(0, 0)], start=(0, 0), goal=(1, 1))

    def test_cell_outside_grid_rejected(self):
        with pytest.raises(ValueError):
            GridSpec(rows=2, cols=2, start=(0, 0), goal=(2, 2))


class TestRandomProblems:
    def test_random_mdp_is_valid_and_seeded(self):
        a = random_mdp(6, 3, 0.9, seed=1)
        b = random_mdp(6, 3, 0.9, seed=1)
        validate_mdp(a)
        np.testing.assert_array_equal(a.transition, b.transition)

    def test_uniform_initial(self):
        mdp = random_mdp(4, 2, 0.5, seed=2, uniform_initial=True)
        np.testing.assert_allclose(mdp.initial_dist, 0.25)

    @pytest.mark.parametrize("K,gap", [(2, 0.5), (5, 0.2), (10, 0.05)])
    def test_bandit_gap_respected(self, K, gap):
        for seed in range(20):
            instance = random_bandit(K, gap, seed)
            assert instance.num_arms == K
            assert instance.min_gap >= gap - 1e-12
            assert 0.0 <= instance.rewards.min() and instance.rewards.max() <= 1.0

    def test_infeasible_gap(self):
        with pytest.raises(InfeasibleGap):
            random_bandit(5, 0.3, seed=0)
        with pytest.raises(InfeasibleGap):
            random_bandit(1, 0.1, seed=0)

    def test_bandit_as_mdp_values(self):
        instance = random_bandit(4, 0.1, seed=3)
        mdp = bandit_as_mdp(instance)
        validate_mdp(mdp)
        ev = policy_evaluate(mdp, Policy.uniform(1, 4))
        np.testing.assert_allclose(ev.v, [instance.rewards.mean()])
        np.testing.assert_allclose(ev.adv[0], instance.rewards - instance.rewards.mean())


class TestFeatures:
    def test_one_hot_is_identity(self):
        features = one_hot_features(3, 2)
        theta = np.arange(6.0)
        np.testing.assert_array_equal(features.logits(theta), theta.reshape(3, 2))

    def test_tile_coding_shape_and_activity(self):
        grid = cliff_world_grid()
        features = tile_coding(grid, 4, num_tilings=2, tile_size=2)
        assert features.num_states == 48
        # 2 tilings x (2 x 6 tiles) x 4 actions
        assert features.dim == 2 * 12 * 4
        np.testing.assert_allclose(features.x.sum(axis=1), 2.0)

    def test_tile_coding_shares_tiles(self):
        grid = cliff_world_grid()
        features = tile_coding(grid, 4, num_tilings=1, tile_size=2)
        np.testing.assert_array_equal(features.row(grid.index((0, 0)), 1), features.row(grid.index((1, 1)), 1))
        assert not np.array_equal(features.row(grid.index((0, 0)), 1), features.row(grid.index((0, 0)), 2))
