import json
from types import SimpleNamespace

import numpy as np
import pytest

from src.arena.actions import PASS_ACTION, AgentAction
from src.arena.protocol import MoveTag
from src.errors import ConfigError
from src.policy.params import HcnParams, PolicyShape
from src.training.buffer import RolloutBuffer, Transition, normalize_advantages
from src.training.curriculum import Curriculum, PromotionRule, curriculum_advance, default_stages
from src.training.gae import compute_gae
from src.training.pool import POOL_MANIFEST, OpponentPool, PoolConfig
from src.training.ppo import PpoConfig, PpoStats, clipped_surrogate, make_optimizer, ppo_update, surrogate_objective
from src.training.rollouts import collect_rollouts
from src.training.trainer import POLICY_FILE, STATE_FILE, TRAIN_LOG, Trainer
from src.training.workers import RolloutWorkers, split_count

# admits every stage-1 scenario (two agents, one issue, five values)
TINY = PolicyShape(d=4, heads=2, d_m=4, max_agents=2, max_issues=1, max_values=5, history=3)


def step(reward, value=0.0, done=False, log_prob=0.0):
    return Transition(policy_input=None, action=PASS_ACTION, log_prob=log_prob, value=value, reward=reward,
                      done=done)


class ScriptedLearner:
    """Passes except in the scripted rounds; stands in for a learner seat"""

    def __init__(self, script):
        self.script = script
        self.last_decision = None

    def reset(self, scenario, agent_id):
        pass

    def act(self, observation, env):
        action = self.script.get(env.state.round, PASS_ACTION)
        self.last_decision = SimpleNamespace(policy_input=None, action=action, log_prob=0.0, value=0.0)
        return action


@pytest.fixture
def stage_one():
    return default_stages()[0]


@pytest.fixture
def tiny_params():
    return HcnParams.initialize(TINY, seed=0)


class TestGae:
    def test_undiscounted_returns(self):
        adv, ret = compute_gae([1, 1, 1], [0, 0, 0], [False, False, True], gamma=1.0, lam=1.0)
        np.testing.assert_allclose(adv, [3, 2, 1])
        np.testing.assert_allclose(ret, [3, 2, 1])

    def test_zero_gamma_is_one_step_error(self):
        adv, ret = compute_gae([1.0, -0.5], [0.3, 0.2], [False, True], gamma=0.0, lam=0.95)
        np.testing.assert_allclose(adv, [0.7, -0.7])
        np.testing.assert_allclose(ret, [1.0, -0.5])

    def test_two_step_recursion(self):
        adv, _ = compute_gae([1.0, 0.0], [0.5, 0.2], [False, True], gamma=0.99, lam=0.95)
        np.testing.assert_allclose(adv, [0.698 - 0.99 * 0.95 * 0.2, -0.2])

    def test_bootstrap_value(self):
        adv, _ = compute_gae([0.0], [0.0], [False], gamma=0.5, lam=1.0, last_value=2.0)
        assert adv[0] == pytest.approx(1.0)

    def test_done_cuts_the_recursion(self):
        adv, _ = compute_gae([1.0, 1.0], [0.0, 0.0], [True, False], gamma=1.0, lam=1.0)
        np.testing.assert_allclose(adv, [1.0, 1.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            compute_gae([1.0, 2.0], [0.0], [True, True])

    def test_gamma_range(self):
        with pytest.raises(ValueError):
            compute_gae([1.0], [0.0], [True], gamma=1.5)


class TestRolloutBuffer:
    def test_segments_are_independent(self):
        buffer = RolloutBuffer()
        buffer.add_segment([step(1.0), step(1.0, done=True)])
        buffer.add_segment([step(1.0)], bootstrap_value=1.0)
        buffer.add_segment([])
        buffer.compute_advantages(gamma=1.0, lam=1.0)
        assert len(buffer) == 3
        assert len(buffer.segments) == 2
        np.testing.assert_allclose(buffer.advantages, [2.0, 1.0, 2.0])

    def test_advantages_need_computing(self):
        buffer = RolloutBuffer()
        buffer.add_segment([step(1.0, done=True)])
        assert not buffer.ready
        with pytest.raises(RuntimeError):
            _ = buffer.advantages

    def test_normalize(self, rng):
        normalized = normalize_advantages(rng.normal(3.0, 2.0, size=100))
        assert normalized.mean() == pytest.approx(0.0, abs=1e-12)
        assert normalized.std() == pytest.approx(1.0)
        np.testing.assert_array_equal(normalize_advantages(np.full(4, 2.5)), np.zeros(4))

    def test_minibatches_cover_every_step(self, rng):
        buffer = RolloutBuffer()
        buffer.add_segment([step(float(i), log_prob=float(i)) for i in range(4)] + [step(4.0, done=True,
                                                                                         log_prob=4.0)])
        buffer.compute_advantages(gamma=0.9, lam=0.9)
        batches = list(buffer.minibatches(2, rng))
        assert [len(b) for b in batches] == [2, 2, 1]
        seen = sorted(float(x) for b in batches for x in b.old_log_probs)
        assert seen == [0.0, 1.0, 2.0, 3.0, 4.0]

    def test_concat_keeps_order(self):
        first, second = RolloutBuffer(), RolloutBuffer()
        first.add_segment([step(1.0, done=True)])
        second.add_segment([step(2.0, done=True)])
        merged = RolloutBuffer.concat([first, second])
        assert [t.reward for t in merged.transitions] == [1.0, 2.0]


class TestClippedSurrogate:
    def test_clip_cases(self):
        out = clipped_surrogate([1.5, 0.5, 1.5, 0.5], [1.0, 1.0, -1.0, -1.0], 0.2)
        np.testing.assert_allclose(out, [1.2, 0.5, -1.5, -0.8])

    def test_unit_ratio(self):
        np.testing.assert_allclose(clipped_surrogate(np.ones(3), [0.5, -2.0, 1.0], 0.2), [0.5, -2.0, 1.0])

    def test_config_validation(self):
        with pytest.raises(ConfigError) as info:
            PpoConfig(clip=1.0)
        assert info.value.field == "ppo.clip"
        with pytest.raises(ConfigError):
            PpoConfig(minibatch_size=0)


class TestCurriculum:
    def test_needs_a_full_window(self):
        assert curriculum_advance([0.9] * 19, 1) == 1
        assert curriculum_advance([0.9] * 20, 1) == 2

    def test_threshold(self):
        assert curriculum_advance([0.8] * 20, 1) == 1
        assert curriculum_advance([0.0] * 5 + [0.9] * 20, 1) == 2

    def test_last_stage_is_terminal(self):
        assert curriculum_advance([1.0] * 20, 5) == 5

    def test_record_promotes_and_clears_history(self):
        curriculum = Curriculum(rule=PromotionRule(window=2))
        assert not curriculum.record(1.0)
        assert curriculum.record(0.9)
        assert curriculum.stage == 2
        assert curriculum.history == []
        assert curriculum.current.index == 2

    def test_state_round_trip(self):
        curriculum = Curriculum(stage=3)
        curriculum.record(0.4)
        restored = Curriculum()
        restored.load_state(json.loads(json.dumps(curriculum.state_dict())))
        assert restored.stage == 3
        assert restored.history == [0.4]

    def test_invalid_stage(self):
        with pytest.raises(ConfigError):
            Curriculum(stage=6)
        with pytest.raises(ConfigError):
            PromotionRule(window=0)

    def test_default_stages(self, stage_one):
        stages = default_stages()
        assert [s.index for s in stages] == [1, 2, 3, 4, 5]
        assert stages[4].exploiter_share == 0.25
        assert stages[4].kinds == ("generic", "resource_allocation")
        scenario = stage_one.scenario(11)
        assert scenario.num_agents == 2
        assert scenario.value_counts == (5,)


class TestOpponentPool:
    def test_capacity_keeps_newest(self, tiny_params):
        pool = OpponentPool(PoolConfig(capacity=10))
        for iteration in range(1, 26):
            pool.add(tiny_params, iteration)
        assert pool.iterations == list(range(16, 26))

    def test_empty_pool_samples_current(self, tiny_params, rng):
        pool = OpponentPool()
        assert pool.sample(rng, tiny_params) is tiny_params
        assert pool.seat_params(rng, tiny_params) is tiny_params

    def test_seat_params_uses_p_hist(self, tiny_params, rng):
        pool = OpponentPool(PoolConfig(p_hist=1.0))
        pool.add(tiny_params, 10)
        assert pool.seat_params(rng, tiny_params) is pool.snapshots[0].params
        never = OpponentPool(PoolConfig(p_hist=0.0))
        never.add(tiny_params, 10)
        assert never.seat_params(rng, tiny_params) is tiny_params

    def test_uniform_sampling(self, tiny_params, rng):
        pool = OpponentPool(PoolConfig(capacity=4))
        for iteration in (10, 20, 30, 40):
            pool.add(tiny_params, iteration)
        counts = {id(s.params): 0 for s in pool.snapshots}
        for _ in range(4000):
            counts[id(pool.sample(rng, tiny_params))] += 1
        assert all(850 < c < 1150 for c in counts.values())

    def test_snapshot_schedule(self, tiny_params):
        pool = OpponentPool(PoolConfig(snapshot_every=10))
        assert not pool.maybe_snapshot(tiny_params, 0)
        assert pool.maybe_snapshot(tiny_params, 10)
        assert not pool.maybe_snapshot(tiny_params, 15)
        assert pool.iterations == [10]

    def test_save_and_load(self, tiny_params, tmp_path):
        pool = OpponentPool(PoolConfig(capacity=3), tmp_path)
        for iteration in range(1, 6):
            pool.add(tiny_params, iteration)
        assert (tmp_path / POOL_MANIFEST).exists()
        loaded = OpponentPool.load(tmp_path)
        assert loaded.iterations == [3, 4, 5]
        assert loaded.config == pool.config
        np.testing.assert_array_equal(loaded.snapshots[0].params.arrays()['move_w'],
                                      tiny_params.arrays()['move_w'])

    def test_load_without_manifest(self, tmp_path):
        assert len(OpponentPool.load(tmp_path / "none")) == 0

    def test_invalid_config(self):
        with pytest.raises(ConfigError):
            PoolConfig(capacity=0)


class TestRollouts:
    def test_exact_step_count(self, tiny_params, stage_one):
        buffer = collect_rollouts(tiny_params, None, stage_one, 30, seed=1)
        assert len(buffer) == 30
        assert all(e.num_agents == 2 for e in buffer.episodes)

    def test_same_seed_same_buffer(self, tiny_params, stage_one):
        first = collect_rollouts(tiny_params, None, stage_one, 20, seed=[4, 0, 0]).arrays()
        second = collect_rollouts(tiny_params, None, stage_one, 20, seed=[4, 0, 0]).arrays()
        for key in first:
            np.testing.assert_array_equal(first[key], second[key])

    def test_count_must_be_positive(self, tiny_params, stage_one):
        with pytest.raises(ValueError):
            collect_rollouts(tiny_params, None, stage_one, 0, seed=0)

    def test_unplayed_seat_keeps_its_final_reward(self, tiny_params, stage_one, monkeypatch):
        # seat 1 proposes in round 3, seat 0 accepts first thing in round 4
        agents = [ScriptedLearner({4: AgentAction(tag=MoveTag.ACCEPT)}),
                  ScriptedLearner({3: AgentAction(tag=MoveTag.PROPOSE, deal=(2,))})]
        monkeypatch.setattr("src.training.rollouts._seat_agents", lambda *args: (agents, [0, 1]))
        buffer = collect_rollouts(tiny_params, None, stage_one, 9, seed=0)
        assert len(buffer) == 9
        assert buffer.episodes[0].agreed
        first, second = buffer.segments
        assert len(first) == 5
        assert len(second) == 4
        assert [t.action.tag for t in second.transitions][-1] is MoveTag.PROPOSE
        assert first.transitions[-1].done
        assert second.transitions[-1].done
        assert not any(t.done for t in second.transitions[:-1])


class TestWorkers:
    def test_split_count(self):
        assert split_count(10, 3) == [4, 3, 3]
        assert split_count(2, 4) == [1, 1, 0, 0]
        with pytest.raises(ValueError):
            split_count(5, 0)

    def test_invalid_worker_count(self):
        with pytest.raises(ValueError):
            RolloutWorkers(0)

    async def test_in_process_collection_matches_per_worker_seeds(self, tiny_params, stage_one):
        workers = RolloutWorkers(2)
        buffer = await workers.collect_async(tiny_params, None, stage_one, 12, seed=3, iteration=0)
        expected = RolloutBuffer.concat([
            collect_rollouts(tiny_params, None, stage_one, 6, [3, 0, 0]),
            collect_rollouts(tiny_params, None, stage_one, 6, [3, 0, 1]),
        ])
        assert len(buffer) == 12
        np.testing.assert_array_equal(buffer.arrays()['log_prob'], expected.arrays()['log_prob'])


class TestPpoUpdate:
    def test_empty_buffer_is_a_no_op(self, tiny_params, rng):
        config = PpoConfig()
        params, _, stats = ppo_update(RolloutBuffer(), tiny_params, make_optimizer(config), config, rng)
        assert params is tiny_params
        assert stats == PpoStats()

    def test_first_ratio_is_one(self, tiny_params, stage_one, rng):
        config = PpoConfig(epochs=2, minibatch_size=8, steps_per_iteration=24)
        buffer = collect_rollouts(tiny_params, None, stage_one, 24, seed=2)
        _, optimizer, stats = ppo_update(buffer, tiny_params, make_optimizer(config), config, rng)
        assert stats.first_ratio == pytest.approx(1.0, abs=1e-9)
        assert stats.minibatches == 2 * 3
        assert not stats.rolled_back
        assert optimizer.step == 6

    @pytest.mark.parametrize("seed", [5, 11, 17, 23, 29])
    def test_surrogate_improves(self, tiny_params, stage_one, rng, seed):
        config = PpoConfig(epochs=1, minibatch_size=32, value_coef=0.0, entropy_coef=0.0, learning_rate=1e-4,
                           max_grad_norm=1e6)
        buffer = collect_rollouts(tiny_params, None, stage_one, 32, seed=seed)
        buffer.compute_advantages(config.gamma, config.gae_lambda)
        before = surrogate_objective(buffer, tiny_params, config)
        updated, _, _ = ppo_update(buffer, tiny_params, make_optimizer(config), config, rng)
        assert before == pytest.approx(0.0, abs=1e-9)
        assert surrogate_objective(buffer, updated, config) > before


def small_trainer(run_dir, iterations=2, total_steps=None):
    return Trainer(run_dir, ppo=PpoConfig(steps_per_iteration=16, minibatch_size=8, epochs=1),
                   curriculum=Curriculum(), params=HcnParams.initialize(TINY, seed=0), seed=5,
                   iterations=iterations, total_steps=total_steps, checkpoint_every=1)


class TestTrainer:
    def test_run_writes_log_and_checkpoint(self, tmp_path):
        result = small_trainer(tmp_path / "run").run()
        assert result.iterations == 2
        assert result.total_steps == 32
        lines = (tmp_path / "run" / TRAIN_LOG).read_text().splitlines()
        assert [json.loads(line)['iteration'] for line in lines] == [0, 1]
        assert (tmp_path / "run" / POLICY_FILE).exists()
        assert json.loads((tmp_path / "run" / STATE_FILE).read_text())['iteration'] == 2

    def test_same_seed_same_log(self, tmp_path):
        first = small_trainer(tmp_path / "a").run()
        second = small_trainer(tmp_path / "b").run()
        assert [r.to_dict() for r in first.records] == [r.to_dict() for r in second.records]

    def test_step_budget(self, tmp_path):
        result = small_trainer(tmp_path / "run", iterations=100, total_steps=20).run()
        assert result.iterations == 2
        assert result.total_steps == 20

    def test_resume_matches_uninterrupted_run(self, tmp_path):
        whole = small_trainer(tmp_path / "whole", iterations=3).run()
        small_trainer(tmp_path / "split", iterations=2).run()
        resumed = small_trainer(tmp_path / "split", iterations=3)
        assert resumed.resume()
        assert resumed.iteration == 2
        result = resumed.run()
        assert result.iterations == 3
        last = result.records[-1].to_dict()
        expected = whole.records[-1].to_dict()
        assert last.keys() == expected.keys()
        for key, value in expected.items():
            assert last[key] == pytest.approx(value, rel=1e-9, abs=1e-12), key
        assert len((tmp_path / "split" / TRAIN_LOG).read_text().splitlines()) == 3

    def test_resume_without_state(self, tmp_path):
        assert not small_trainer(tmp_path / "fresh").resume()
