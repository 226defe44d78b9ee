"""
End-to-end runs of training, ablation and scalability sweeps.

The quick classes use a tiny network and a single iteration; the slow class
holds the long learning checks and is deselected unless `-m slow` is given.
"""
import numpy as np
import pytest

from src.baselines.registry import AgentFactory, parse_agent_specs
from src.errors import ConfigError
from src.evaluation.harness import evaluate
from src.evaluation.sweeps import FULL, ablate, scalability_sweep
from src.settings import parse_settings
from src.training.trainer import Trainer

TINY = """\
seed: 1
policy: {d: 4, heads: 2, d_m: 4, max_agents: 2, max_issues: 1, max_values: 5, history: 3}
ppo: {steps_per_iteration: 16, minibatch_size: 8, epochs: 1}
training: {iterations: 1}
evaluation: {episodes: 2, seeds: [0]}
"""

DESK = """\
seed: {seed}
ppo: {{steps_per_iteration: 2048, minibatch_size: 256, epochs: 4, learning_rate: 0.0003}}
training: {{iterations: 1000, total_steps: {steps}, checkpoint_every: 50}}
evaluation: {{episodes: 500, seeds: [{seed}], stage: {stage}}}
"""


class TestQuickSweeps:
    def test_ablation_reports_deltas(self, tmp_path):
        summaries = ablate(parse_settings(TINY), ["no-shaping"], tmp_path)
        assert list(summaries) == [FULL, "no-shaping"]
        assert 'consensus_delta' in summaries["no-shaping"].extra
        assert (tmp_path / FULL / "evaluation_episodes.csv").exists()
        assert (tmp_path / "no-shaping" / "train_log.jsonl").exists()

    def test_scalability_widens_the_envelope(self, tmp_path):
        summaries = scalability_sweep(parse_settings(TINY), [2, 3], tmp_path)
        assert sorted(summaries) == [2, 3]
        assert summaries[3].num_agents == 3
        assert summaries[3].episodes == 2
        assert (tmp_path / "n03" / "policy.ddck").exists()

    def test_scalability_rejects_counts_outside_range(self, tmp_path):
        with pytest.raises(ConfigError):
            scalability_sweep(parse_settings(TINY), [1], tmp_path)


@pytest.mark.slow
class TestLearning:
    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_stage_one_self_play_beats_random(self, tmp_path, seed):
        settings = parse_settings(DESK.format(seed=seed, steps=200_000, stage=1))
        result = Trainer.from_settings(settings, tmp_path / "run").run()
        stage = settings.curriculum.build().stages[0]
        held_out = (10_000 + seed,)
        hcn, _ = evaluate(AgentFactory(), parse_agent_specs(f"hcn:{result.policy_path}"), stage.scenario, 500,
                          held_out)
        random, _ = evaluate(AgentFactory(), parse_agent_specs("random"), stage.scenario, 500, held_out)
        assert hcn.consensus_rate >= 0.90
        assert hcn.social_welfare >= 1.15 * random.social_welfare

    def test_full_system_not_worse_than_no_shaping(self, tmp_path):
        deltas = []
        for seed in range(10):
            settings = parse_settings(DESK.format(seed=seed, steps=100_000, stage=2))
            summaries = ablate(settings, ["no-shaping"], tmp_path / f"s{seed}")
            deltas.append(summaries[FULL].consensus_rate - summaries["no-shaping"].consensus_rate)
        assert float(np.mean(deltas)) >= -0.02

    def test_scalability_to_eight_agents(self, tmp_path):
        settings = parse_settings(DESK.format(seed=0, steps=500_000, stage=1))
        summaries = scalability_sweep(settings, [2, 4, 8], tmp_path)
        assert summaries[8].consensus_rate >= 0.6
