import numpy as np
import pytest

from lifelab.agents import (HebbianCAPolicy, NeuralCAPolicy, TogglePolicy,
                            load_genome, make_agent, save_genome)
from lifelab.environment import EnvConfig, ToggleEnv
from lifelab.errors import LengthMismatch, ShapeMismatch
from lifelab.rules import parse_rule_string

CFG = EnvConfig(obs_h=32, obs_w=32, act_h=16, act_w=16,
                rule=parse_rule_string("B3/S23"))


def random_obs_stream(rng, n=12, config=CFG):
    return [(rng.random((config.batch_n, 1, config.obs_h, config.obs_w)) < 0.3)
            .astype(np.uint8) for _ in range(n)]


class TestToggle:

    def test_fires_pattern_once(self, rng):
        agent = TogglePolicy(CFG, seed=1)
        obs = np.zeros((1, 1, 32, 32), np.uint8)
        first = agent.act(obs)
        assert first.sum() > 0
        assert np.array_equal(first[0, 0], agent.pattern())
        for _ in range(3):
            assert agent.act(obs).sum() == 0

    def test_all_negative_params_emit_nothing(self):
        agent = TogglePolicy(CFG)
        agent.set_params(np.full(agent.num_params(), -5.0))
        obs = np.zeros((1, 1, 32, 32), np.uint8)
        assert agent.act(obs).sum() == 0

    def test_param_length_is_action_cell_count(self):
        default = TogglePolicy(EnvConfig())
        assert default.num_params() == 64 * 64
        assert TogglePolicy(CFG).num_params() == 256

    def test_reset_rearms_the_pattern(self, rng):
        agent = TogglePolicy(CFG, seed=1)
        obs = np.zeros((1, 1, 32, 32), np.uint8)
        first = agent.act(obs)
        agent.act(obs)
        agent.reset_policy()
        assert np.array_equal(agent.act(obs), first)


class TestNeuralCA:

    def test_zero_weights_emit_nothing(self):
        agent = NeuralCAPolicy(CFG)
        agent.set_params(np.zeros(agent.num_params()))
        obs = np.zeros((1, 1, 32, 32), np.uint8)
        # sigmoid(0) = 0.5 is not strictly above the 0.5 threshold
        assert agent.act(obs).sum() == 0

    def test_deterministic_replay(self, rng):
        stream = random_obs_stream(rng)
        agent = NeuralCAPolicy(CFG, seed=3)
        params = rng.normal(0, 0.4, agent.num_params())
        agent.set_params(params)
        first = [agent.act(o).copy() for o in stream]
        agent.reset_policy()
        second = [agent.act(o).copy() for o in stream]
        for a, b in zip(first, second):
            assert np.array_equal(a, b)

    def test_equal_params_equal_behavior(self, rng):
        stream = random_obs_stream(rng)
        params = rng.normal(0, 0.4, NeuralCAPolicy(CFG).num_params())
        a = NeuralCAPolicy(CFG, seed=1)
        b = NeuralCAPolicy(CFG, seed=2)
        a.set_params(params)
        b.set_params(params)
        for obs in stream:
            assert np.array_equal(a.act(obs), b.act(obs))

    def test_get_set_round_trip(self, rng):
        agent = NeuralCAPolicy(CFG, seed=3)
        vec = rng.normal(size=agent.num_params())
        agent.set_params(vec)
        assert np.array_equal(agent.get_params(), vec)

    def test_rejects_wrong_length(self):
        agent = NeuralCAPolicy(CFG)
        with pytest.raises(LengthMismatch):
            agent.set_params(np.zeros(agent.num_params() + 1))

    def test_rejects_wrong_obs_shape(self):
        agent = NeuralCAPolicy(CFG)
        with pytest.raises(ShapeMismatch):
            agent.act(np.zeros((1, 1, 16, 16), np.uint8))

    def test_action_shape_and_batch(self, rng):
        cfg = EnvConfig(obs_h=32, obs_w=32, act_h=16, act_w=16, batch_n=3)
        agent = NeuralCAPolicy(cfg, seed=0)
        obs = (rng.random((3, 1, 32, 32)) < 0.3).astype(np.uint8)
        act = agent.act(obs)
        assert act.shape == (3, 1, 16, 16)
        assert set(np.unique(act)) <= {0, 1}


class TestHebbianCA:

    def test_zero_plasticity_equals_plain_ca(self, rng):
        plain = NeuralCAPolicy(CFG, seed=7)
        plastic = HebbianCAPolicy(CFG, seed=7)
        base = rng.normal(0, 0.4, plain.num_params())
        plain.set_params(base)
        plastic.set_params(np.concatenate([
            base, np.zeros(plastic.num_params() - base.size)]))
        for obs in random_obs_stream(rng, n=20):
            assert np.array_equal(plain.act(obs), plastic.act(obs))

    def test_plastic_weights_stay_bounded(self, rng):
        agent = HebbianCAPolicy(CFG, seed=7, w_max=3.0)
        params = rng.normal(0, 2.0, agent.num_params())
        agent.set_params(params)
        for obs in random_obs_stream(rng, n=30):
            agent.act(obs)
            for layer in agent._conv_layers():
                assert np.abs(layer.w).max() <= 3.0 + 1e-12

    def test_weights_drift_with_nonzero_plasticity(self, rng):
        agent = HebbianCAPolicy(CFG, seed=7)
        base = rng.normal(0, 0.4, NeuralCAPolicy(CFG).num_params())
        coeffs = rng.normal(0, 0.5, agent.num_params() - base.size)
        agent.set_params(np.concatenate([base, coeffs]))
        w_before = agent.conv_a.w.copy()
        agent.act(random_obs_stream(rng, n=1)[0])
        assert not np.array_equal(agent.conv_a.w, w_before)

    def test_reset_restores_evolved_initial_weights(self, rng):
        agent = HebbianCAPolicy(CFG, seed=7)
        vec = rng.normal(0, 0.5, agent.num_params())
        agent.set_params(vec)
        stream = random_obs_stream(rng, n=25)
        first = [agent.act(o).copy() for o in stream]
        agent.reset_policy()
        second = [agent.act(o).copy() for o in stream]
        for a, b in zip(first, second):
            assert np.array_equal(a, b)
        assert np.array_equal(agent.get_params(), vec)

    def test_all_ones_reset_action_is_reachable(self):
        # a policy whose head bias is huge toggles everything, which the
        # environment treats as a reset request
        agent = NeuralCAPolicy(CFG, seed=0)
        params = np.zeros(agent.num_params())
        params[-1] = 50.0   # head bias
        agent.set_params(params)
        env = ToggleEnv(CFG)
        obs = env.reset()
        action = agent.act(obs)
        assert action.all()
        _, _, _, info = env.step(action)
        assert info["reset_flags"][0]


def test_make_agent_families():
    assert make_agent("toggle", CFG).family == "toggle"
    assert make_agent("neural_ca", CFG).family == "neural_ca"
    assert make_agent("hebbian_ca", CFG).family == "hebbian_ca"
    with pytest.raises(ValueError):
        make_agent("nope", CFG)


@pytest.mark.parametrize("family", ["toggle", "neural_ca", "hebbian_ca"])
def test_genome_serialization_round_trip(tmp_path, rng, family):
    agent = make_agent(family, CFG, seed=2)
    vec = rng.normal(size=agent.num_params())
    agent.set_params(vec)
    path = str(tmp_path / "genome.f64")
    save_genome(path, agent)
    loaded = load_genome(path, CFG)
    assert loaded.family == family
    assert np.array_equal(loaded.get_params(), vec)
    obs = np.zeros((1, 1, 32, 32), np.uint8)
    assert np.array_equal(loaded.act(obs), agent_fresh_act(agent, vec, obs))


def agent_fresh_act(agent, vec, obs):
    agent.set_params(vec)
    agent.reset_policy()
    return agent.act(obs)


def test_genome_is_self_describing(tmp_path, rng):
    agent = make_agent("toggle", CFG, seed=2)
    agent.set_params(rng.normal(size=agent.num_params()))
    path = str(tmp_path / "genome.f64")
    save_genome(path, agent)
    loaded = load_genome(path)   # no env config supplied
    assert loaded.config.obs_h == CFG.obs_h
    assert loaded.config.act_h == CFG.act_h
    assert np.array_equal(loaded.get_params(), agent.get_params())


def test_genome_geometry_cross_check(tmp_path):
    agent = make_agent("toggle", CFG, seed=2)
    path = str(tmp_path / "genome.f64")
    save_genome(path, agent)
    wrong = EnvConfig(obs_h=32, obs_w=32, act_h=8, act_w=8)
    with pytest.raises(ShapeMismatch):
        load_genome(path, wrong)
