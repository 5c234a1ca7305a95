import numpy as np
import pytest

from spmalab.models.mdp import Policy
from spmalab.services.environment_service import frozen_lake, two_state_chain
from spmalab.services.mdp_service import occupancy
from spmalab.services.sampling_service import empirical_weights, noisy_advantage, sample_states


class TestSampleStates:
    @pytest.mark.parametrize("mdp", [two_state_chain(0.5), frozen_lake(0.9)], ids=["chain", "frozen_lake"])
    def test_frequencies_match_occupancy(self, mdp):
        n = 100_000
        policy = Policy.uniform(mdp.num_states, mdp.num_actions)
        d = occupancy(mdp, policy).d
        freq = empirical_weights(sample_states(mdp, policy, n, seed=0), mdp.num_states)
        assert np.all(np.abs(freq - d) <= 5.0 * np.sqrt(d * (1 - d) / n) + 1e-12)

    def test_seeded(self):
        mdp = two_state_chain(0.5)
        policy = Policy.uniform(2, 2)
        np.testing.assert_array_equal(sample_states(mdp, policy, 100, seed=3), sample_states(mdp, policy, 100, seed=3))

    def test_zero_discount_samples_rho(self):
        mdp = two_state_chain(0.0)
        states = sample_states(mdp, Policy.uniform(2, 2), 1000, seed=1)
        assert np.all(states == 0)

    def test_zero_discount_follows_initial_distribution(self):
        mdp = two_state_chain(0.0, initial=np.array([0.3, 0.7]))
        freq = empirical_weights(sample_states(mdp, Policy.uniform(2, 2), 50_000, seed=2), 2)
        np.testing.assert_allclose(freq, [0.3, 0.7], atol=0.01)

    def test_needs_positive_n(self):
        with pytest.raises(ValueError):
            sample_states(two_state_chain(), Policy.uniform(2, 2), 0, seed=0)


class TestNoisyAdvantage:
    def test_zero_noise_is_exact(self):
        adv = np.array([[0.5, -0.5]])
        np.testing.assert_array_equal(noisy_advantage(adv, 0.0, 0.9, seed=0), adv)

    def test_error_bounded_and_clipped(self):
        rng = np.random.default_rng(0)
        adv = rng.uniform(-10, 10, size=(5, 3))
        noisy = noisy_advantage(adv, 0.5, 0.9, seed=1)
        assert np.all(np.abs(noisy) <= 10.0 + 1e-12)
        assert np.all(np.abs(noisy - adv) <= 0.5 + 1e-12)

    def test_negative_epsilon(self):
        with pytest.raises(ValueError):
            noisy_advantage(np.zeros((1, 2)), -0.1, 0.9, seed=0)
