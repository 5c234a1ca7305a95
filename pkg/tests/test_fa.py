import numpy as np
import pytest

from spmalab.errors import ConfigError, InvalidMdp
from spmalab.models.config import AdvantageMode, FaRunConfig, Method, StateMode, TabularRunConfig
from spmalab.models.features import FeatureMap, LinearPolicyParams, SurrogateProblem
from spmalab.models.mdp import Logits, Policy, TabularMdp
from spmalab.services.diagnostics_service import check_tabular_equivalence
from spmalab.services.environment_service import cliff_world, one_hot_features, random_mdp, two_state_chain
from spmalab.services.fa_service import (
    FA_RUNNERS,
    policy_gradient,
    policy_return,
    run_mdpo_fa,
    run_spg_fa,
    run_spma_fa,
    run_trpo_fa,
)
from spmalab.services.mdp_service import occupancy, policy_evaluate
from spmalab.services.optim_service import inner_loop_minimize
from spmalab.services.tabular_service import run_tabular, spma_step


def make_mdp():
    return random_mdp(5, 3, 0.9, seed=7, uniform_initial=True)


def with_bad_reward(mdp):
    reward = mdp.reward.copy()
    reward[0, 0] = -0.5
    return TabularMdp(transition=mdp.transition, reward=reward, initial_dist=mdp.initial_dist, discount=mdp.discount)


def uniform_support(mdp):
    return np.flatnonzero(occupancy(mdp, Policy.uniform(mdp.num_states, mdp.num_actions)).d > 0.0)


def make_cfg(**overrides):
    values = dict(outer_step_size=0.09, inner_iters=50, outer_iters=5, estimate_surrogate_gap=False)
    values.update(overrides)
    return FaRunConfig(**values)


class TestPolicyGradient:
    def test_matches_finite_difference(self):
        rng = np.random.default_rng(0)
        mdp = random_mdp(4, 3, 0.8, seed=1)
        features = FeatureMap(x=rng.normal(size=(12, 4)), num_states=4, num_actions=3)
        theta = rng.normal(size=4)
        j_value, grad = policy_gradient(mdp, features, LinearPolicyParams(theta))
        assert j_value == pytest.approx(policy_return(mdp, features, theta))
        h = 1e-6
        fd = np.array([
            (policy_return(mdp, features, theta + h * e) - policy_return(mdp, features, theta - h * e)) / (2 * h)
            for e in np.eye(4)
        ])
        assert np.linalg.norm(grad - fd) <= 1e-4 * np.linalg.norm(fd)


class TestSpmaFa:
    def test_tracks_tabular_with_one_hot_features(self):
        mdp = random_mdp(5, 3, 0.5, seed=7, uniform_initial=True)
        features = one_hot_features(5, 3)
        fa = run_spma_fa(mdp, features, make_cfg(outer_step_size=0.2, inner_iters=300))
        tab = run_tabular(mdp, TabularRunConfig(method=Method.SPMA, step_size=0.2, iterations=5))
        report = check_tabular_equivalence(fa, tab, tol=1e-4)
        assert report.passed, report.rows

    def test_tracks_tabular_on_cliff_world_support(self):
        mdp = cliff_world(0.9)
        features = one_hot_features(mdp.num_states, mdp.num_actions)
        fa = run_spma_fa(mdp, features, make_cfg(outer_step_size=0.09, inner_iters=300, outer_iters=3))
        tab = run_tabular(mdp, TabularRunConfig(method=Method.SPMA, step_size=0.09, iterations=3))
        support = uniform_support(mdp)
        assert support.size == mdp.num_states - 10
        report = check_tabular_equivalence(fa, tab, tol=1e-3, states=support)
        assert report.passed, report.rows

    def test_inner_loop_fits_states_with_tiny_occupancy(self):
        mdp = cliff_world(0.9)
        pi = Policy.uniform(mdp.num_states, mdp.num_actions)
        d = occupancy(mdp, pi).d
        target = spma_step(pi, policy_evaluate(mdp, pi).adv, 0.09).probs
        support = np.flatnonzero(d > 0.0)
        assert d[support].min() < 1e-8
        prob = SurrogateProblem(state_weights=d, targets=target, features=one_hot_features(mdp.num_states, mdp.num_actions))
        theta = inner_loop_minimize(prob, np.zeros(prob.features.dim), 300, make_cfg().armijo, precondition=True).theta
        fitted = Policy.from_logits(Logits(prob.features.logits(theta))).probs
        assert np.abs(fitted[support] - target[support]).max() < 1e-4

    def test_invalid_mdp_rejected(self):
        with pytest.raises(InvalidMdp):
            run_spma_fa(with_bad_reward(make_mdp()), one_hot_features(5, 3), make_cfg())

    def test_records_surrogate_values(self):
        records = run_spma_fa(make_mdp(), one_hot_features(5, 3), make_cfg())
        assert len(records) == 6
        assert all(r.surrogate_final is not None for r in records[:-1])
        assert records[-1].surrogate_final is None
        # the KL value is non-negative
        assert all(r.surrogate_final >= -1e-12 for r in records[:-1])

    def test_surrogate_gap_estimate(self):
        cfg = make_cfg(outer_iters=2, estimate_surrogate_gap=True, gap_iters=200, gap_restarts=2)
        records = run_spma_fa(make_mdp(), one_hot_features(5, 3), cfg)
        assert all(r.surrogate_gap is not None and r.surrogate_gap >= 0.0 for r in records[:-1])

    def test_step_size_must_be_admissible(self):
        with pytest.raises(ConfigError):
            run_spma_fa(make_mdp(), one_hot_features(5, 3), make_cfg(outer_step_size=0.5))

    def test_feature_shape_must_match(self):
        with pytest.raises(ConfigError):
            run_spma_fa(make_mdp(), one_hot_features(4, 3), make_cfg())

    def test_sampled_states_are_seeded(self):
        cfg = make_cfg(state_mode=StateMode(kind="sampled", n_states=64, seed=3))
        a = run_spma_fa(make_mdp(), one_hot_features(5, 3), cfg)
        b = run_spma_fa(make_mdp(), one_hot_features(5, 3), cfg)
        assert [r.j_value for r in a] == [r.j_value for r in b]

    def test_noise_free_noisy_mode_matches_exact(self):
        exact = run_spma_fa(make_mdp(), one_hot_features(5, 3), make_cfg())
        noisy = run_spma_fa(make_mdp(), one_hot_features(5, 3), make_cfg(advantage_mode=AdvantageMode(kind="noisy", epsilon_approx=0.0)))
        assert [r.j_value for r in exact] == [r.j_value for r in noisy]

    def test_noisy_run_still_improves(self):
        cfg = make_cfg(outer_iters=10, advantage_mode=AdvantageMode(kind="noisy", epsilon_approx=0.1, seed=1))
        records = run_spma_fa(make_mdp(), one_hot_features(5, 3), cfg)
        assert records[-1].j_value > records[0].j_value


class TestOtherFaMethods:
    @pytest.mark.parametrize("runner", [run_mdpo_fa, run_trpo_fa])
    def test_mirror_methods_improve(self, runner):
        records = runner(make_mdp(), one_hot_features(5, 3), make_cfg(outer_iters=10))
        assert records[-1].j_value > records[0].j_value
        assert records[-1].surrogate_gap is None

    def test_spg_improves(self):
        records = run_spg_fa(two_state_chain(0.5), one_hot_features(2, 2), make_cfg(outer_iters=10))
        js = [r.j_value for r in records]
        assert all(b >= a - 1e-12 for a, b in zip(js, js[1:]))
        assert js[-1] > js[0]
        assert records[0].method == "SPG"

    def test_one_hot_mdpo_tracks_tabular_npg(self):
        mdp = make_mdp()
        fa = run_mdpo_fa(mdp, one_hot_features(5, 3), make_cfg(outer_step_size=0.05, inner_iters=500, outer_iters=10))
        tab = run_tabular(mdp, TabularRunConfig(method=Method.NPG, step_size=0.05, iterations=10))
        report = check_tabular_equivalence(fa, tab, tol=1e-6)
        assert report.passed, report.rows

    def test_spg_rejects_invalid_mdp(self):
        with pytest.raises(InvalidMdp):
            run_spg_fa(with_bad_reward(two_state_chain(0.5)), one_hot_features(2, 2), make_cfg())

    def test_runner_table(self):
        assert set(FA_RUNNERS) == {Method.SPMA, Method.MDPO, Method.TRPO_REGULARIZED, Method.SPG}
