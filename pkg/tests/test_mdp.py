import math

import numpy as np
import pytest

from bltlsynth.bltl import parse_formula, to_sequential
from bltlsynth.dynamics import NoiseModel
from bltlsynth.mdp import (DUMMY_ACTION, EMPTY_HISTORY, PathSampler, enabled_actions,
                           episode_rng, history_key_string, parse_history_key,
                           successors, transition_prob)
from bltlsynth.synthesis import Policy, uniform_policy

from conftest import simple_env


@pytest.fixture
def small_spec():
    return to_sequential(parse_formula("!u U[<=4] a"), "u")


@pytest.fixture
def small_env():
    return simple_env([("a", (0.8, -1.0, 1.6, 1.0)), ("u", (3.0, -1.0, 4.0, 1.0))])


class TestEnabledActions:
    def test_full_set_below_horizon(self, demo_params):
        assert enabled_actions(EMPTY_HISTORY, demo_params, 9) == [0, 1, 2]

    def test_dummy_at_horizon(self, demo_params):
        state = ((0, 1, 1),) * 9
        assert enabled_actions(state, demo_params, 9) == [DUMMY_ACTION]

    def test_full_set_just_below_horizon(self, demo_params):
        state = ((0, 1, 1),) * 8
        assert enabled_actions(state, demo_params, 9) == [0, 1, 2]

    def test_overlong_history_rejected(self, demo_params):
        with pytest.raises(ValueError):
            enabled_actions(((0, 1, 1),) * 10, demo_params, 9)


class TestTransitionProb:
    def test_extension_probability_is_product(self, demo_noise):
        nm = NoiseModel.symmetric(-0.01, 0.005, 2, (0.3, 0.7))
        state = ((1, 1, 1),)
        nxt = state + ((0, 1, 2),)
        assert transition_prob(state, 0, nxt, nm, 9) == pytest.approx(0.3 * 0.7)

    def test_dummy_self_loop(self, demo_noise):
        state = ((0, 1, 1),) * 9
        assert transition_prob(state, DUMMY_ACTION, state, demo_noise, 9) == 1.0
        assert transition_prob(state, 0, state, demo_noise, 9) == 0.0

    def test_non_extension_is_zero(self, demo_noise):
        state = ((1, 1, 1),)
        other = ((2, 1, 1), (0, 1, 1))
        assert transition_prob(state, 0, other, demo_noise, 9) == 0.0

    def test_wrong_action_is_zero(self, demo_noise):
        state = EMPTY_HISTORY
        nxt = ((1, 2, 2),)
        assert transition_prob(state, 0, nxt, demo_noise, 9) == 0.0
        assert transition_prob(state, 1, nxt, demo_noise, 9) > 0.0


class TestSuccessors:
    def test_nine_extensions(self, demo_params, demo_noise):
        succ = successors(EMPTY_HISTORY, 1, demo_noise, demo_params, 9)
        assert len(succ) == 9
        assert all(len(s) == 1 and s[-1][0] == 1 for s, _ in succ)

    def test_probabilities_sum_to_one(self, demo_params, demo_noise):
        succ = successors(EMPTY_HISTORY, 0, demo_noise, demo_params, 9)
        assert abs(sum(p for _, p in succ) - 1.0) <= 1e-12

    def test_uniform_tiles_give_equal_probabilities(self, demo_params):
        nm = NoiseModel.symmetric(-0.01, 0.005, 3, (1 / 3, 1 / 3, 1 / 3))
        succ = successors(EMPTY_HISTORY, 2, nm, demo_params, 9)
        assert all(p == pytest.approx(1 / 9) for _, p in succ)

    def test_not_enabled_rejected(self, demo_params, demo_noise):
        with pytest.raises(ValueError, match="not enabled"):
            successors(EMPTY_HISTORY, DUMMY_ACTION, demo_noise, demo_params, 9)
        with pytest.raises(ValueError, match="not enabled"):
            successors(((0, 1, 1),) * 9, 0, demo_noise, demo_params, 9)

    def test_consistent_with_transition_prob(self, demo_params, demo_noise):
        state = ((2, 3, 1),)
        for nxt, p in successors(state, 1, demo_noise, demo_params, 9):
            assert transition_prob(state, 1, nxt, demo_noise, 9) == pytest.approx(p)


class TestHistoryKeys:
    def test_round_trip(self):
        history = ((0, 1, 2), (2, 3, 1), (1, 2, 2))
        assert parse_history_key(history_key_string(history)) == history

    def test_empty_history(self):
        assert history_key_string(EMPTY_HISTORY) == ""
        assert parse_history_key("") == EMPTY_HISTORY


class TestPathSampler:
    def test_replay_determinism(self, small_env, small_spec, demo_params, demo_noise):
        sampler = PathSampler(small_env, small_spec, demo_params, demo_noise, 3)
        policy = uniform_policy(3)
        a = sampler.sample_path(policy, episode_rng(42, 0, 1, 5))
        b = sampler.sample_path(policy, episode_rng(42, 0, 1, 5))
        assert a.state == b.state
        assert a.trace == b.trace
        assert a.satisfied == b.satisfied
        c = sampler.sample_path(policy, episode_rng(42, 0, 1, 6))
        assert c.state != a.state or c.trace != a.trace

    def test_zero_noise_deterministic_policy_single_path(self, small_env, small_spec,
                                                         demo_params, zero_noise):
        sampler = PathSampler(small_env, small_spec, demo_params, zero_noise, 3)
        det = Policy(n_actions=3, rows={}, deterministic=True)
        paths = {sampler.sample_path(det, episode_rng(1, 0, 0, i)).state
                 for i in range(5)}
        assert len(paths) == 1
        assert paths.pop() == ((0, 1, 1),) * 3

    def test_path_sample_invariants(self, small_env, small_spec, demo_params, demo_noise):
        from bltlsynth.bltl import check_sequential
        sampler = PathSampler(small_env, small_spec, demo_params, demo_noise, 4)
        for i in range(10):
            path = sampler.sample_path(uniform_policy(3), episode_rng(9, 0, 0, i))
            assert len(path.state) == 4
            assert abs(sum(t for _, t in path.trace) - 4 * demo_params.dt) < 1e-9
            assert path.satisfied == check_sequential(list(path.trace), small_spec)

    def test_tile_frequencies_match_transition_probs(self, small_env, small_spec,
                                                     demo_params):
        nm = NoiseModel.symmetric(-0.01, 0.005, 3, (0.2, 0.5, 0.3))
        sampler = PathSampler(small_env, small_spec, demo_params, nm, 1)
        det = Policy(n_actions=3, rows={}, deterministic=True)
        rng = np.random.default_rng(123)
        n = 100_000
        counts: dict = {}
        for _ in range(n):
            hist = sampler.sample_history(det, rng)
            counts[hist[0]] = counts.get(hist[0], 0) + 1
        for nxt, p in successors(EMPTY_HISTORY, 0, nm, demo_params, 1):
            freq = counts.get(nxt[0], 0) / n
            sigma = math.sqrt(p * (1 - p) / n)
            assert abs(freq - p) < 3 * sigma

    def test_horizon_validated(self, small_env, small_spec, demo_params, demo_noise):
        with pytest.raises(ValueError):
            PathSampler(small_env, small_spec, demo_params, demo_noise, 0)
