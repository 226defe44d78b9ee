import json

import numpy as np
import pytest

from src.arena.domain import GeneratorConfig, random_scenario
from src.baselines.registry import AgentFactory, parse_agent_specs
from src.errors import DomainError, OracleRefusedError, UnknownFlagError
from src.evaluation.fairness import gini, social_welfare
from src.evaluation.harness import (
    EpisodeRecord, aggregate_over_seeds, episode_seed, evaluate, per_seed_summaries, summarize,
)
from src.evaluation.pareto import is_pareto_optimal, pareto_front, pareto_front_naive
from src.evaluation.reports import (
    SUMMARY_FORMAT, episode_columns, read_episodes_csv, read_summary, summary_from_csv, write_report,
    write_summary,
)
from src.evaluation.sweeps import FULL, make_variant, parse_flags
from src.settings import Settings

from .conftest import identical_scenario, opposed_scenario


def record(episode_id, outcome="Agreement", utilities=(0.5, 0.5), rounds=5, pareto=True, seed=0):
    return EpisodeRecord(episode_id=episode_id, seed=seed, num_agents=len(utilities), num_issues=1,
                         outcome=outcome, rounds=rounds, utilities=utilities, objective=0.1 * episode_id,
                         pareto=pareto if outcome == "Agreement" else None)


class TestGini:
    def test_equal(self):
        assert gini((0.4, 0.4, 0.4)) == 0.0

    def test_two_agents(self):
        assert gini((1.0, 0.0)) == pytest.approx(0.5)

    def test_four_agents(self):
        assert gini((1.0, 1.0, 0.0, 0.0)) == pytest.approx(0.5)

    def test_all_zero(self):
        assert gini((0.0, 0.0)) == 0.0

    def test_negative(self):
        with pytest.raises(DomainError):
            gini((0.5, -0.1))

    def test_below_one(self, rng):
        for _ in range(100):
            assert 0.0 <= gini(rng.uniform(0.0, 1.0, size=6)) < 1.0

    def test_social_welfare(self):
        assert social_welfare((0.2, 0.4)) == pytest.approx(0.3)


class TestParetoFront:
    def test_opposed_front_is_everything(self):
        front = pareto_front(opposed_scenario())
        assert front.deals == ((0,), (1,), (2,), (3,), (4,))

    def test_identical_preferences_single_deal(self):
        front = pareto_front(identical_scenario(num_agents=3, num_values=4))
        assert front.deals == ((3,),)

    def test_matches_naive_double_loop(self):
        config = GeneratorConfig(agents=(2, 4), issues=(1, 3), values=(2, 4))
        for seed in range(20):
            scenario = random_scenario(config, seed)
            assert pareto_front(scenario).deals == pareto_front_naive(scenario).deals

    def test_membership(self, two_issue_scenario):
        front = pareto_front(two_issue_scenario)
        for deal in front.deals:
            assert is_pareto_optimal(two_issue_scenario, deal)
            assert deal in front
        assert front.utilities.shape == (len(front), 2)

    def test_dominated_deal(self):
        scenario = identical_scenario()
        assert not is_pareto_optimal(scenario, (0,))
        assert is_pareto_optimal(scenario, (2,))

    def test_refused_above_limit(self, two_issue_scenario):
        with pytest.raises(OracleRefusedError) as info:
            pareto_front(two_issue_scenario, limit=4)
        assert info.value.cardinality == 9


class TestHarness:
    def test_summary_of_four(self):
        records = [record(0), record(1), record(2, pareto=False),
                   record(3, outcome="Failure", utilities=(0.0, 0.0), rounds=12)]
        summary = summarize(records, label="x", seeds=(0,))
        assert summary.episodes == 4
        assert summary.consensus_rate == pytest.approx(0.75)
        assert summary.mean_rounds == pytest.approx((5 + 5 + 5 + 12) / 4)
        assert summary.pareto_rate == pytest.approx(2 / 3)
        assert summary.social_welfare == pytest.approx(0.375)

    def test_empty_summary(self):
        summary = summarize([], label="none")
        assert summary.episodes == 0
        assert summary.pareto_rate is None

    def test_episode_seed_is_stable(self):
        assert episode_seed(3, 7) == episode_seed(3, 7)
        assert episode_seed(3, 7) != episode_seed(3, 8)

    def test_conceders_reach_agreement(self):
        specs = parse_agent_specs("conceder:2.0")
        summary, records = evaluate(AgentFactory(), specs, lambda s: opposed_scenario(seed=s), episodes=3,
                                    seeds=(0, 1), label="conceders")
        assert summary.episodes == 6
        assert summary.consensus_rate == 1.0
        assert summary.pareto_rate == 1.0
        assert [r.episode_id for r in records] == list(range(6))
        assert [r.seed for r in records] == [0, 0, 0, 1, 1, 1]
        assert summary.num_agents == 2

    def test_repeatable(self):
        specs = parse_agent_specs("random")
        config = GeneratorConfig(agents=(2, 3), issues=(1, 2), values=(2, 4))
        source = lambda s: random_scenario(config, s)  # noqa: E731
        _, first = evaluate(AgentFactory(), specs, source, episodes=4, seeds=(5,))
        _, second = evaluate(AgentFactory(), specs, source, episodes=4, seeds=(5,))
        assert [(r.outcome, r.rounds, r.utilities) for r in first] == \
               [(r.outcome, r.rounds, r.utilities) for r in second]

    def test_episodes_must_be_positive(self):
        with pytest.raises(ValueError):
            evaluate(AgentFactory(), parse_agent_specs("random"), lambda s: opposed_scenario(), episodes=0)

    def test_per_seed_aggregation(self):
        records = [record(0, seed=1), record(1, seed=2, outcome="Failure", utilities=(0.0, 0.0))]
        summaries = per_seed_summaries(records)
        assert [s.seeds for s in summaries] == [(1,), (2,)]
        stats = aggregate_over_seeds(summaries)
        assert stats['consensus_rate'] == pytest.approx((0.5, 0.5))


class TestReports:
    def test_columns(self):
        assert episode_columns(2) == ["episode_id", "seed", "N", "M", "outcome", "rounds", "u_0", "u_1",
                                      "J", "pareto", "illegal_actions"]

    def test_csv_round_trip(self, tmp_path):
        records = [record(0, utilities=(1 / 3, 2 / 3)), record(1, outcome="Failure", utilities=(0.1, 0.2, 0.3))]
        csv_path, json_path = write_report(summarize(records), records, tmp_path, name="run")
        assert csv_path.name == "run_episodes.csv"
        assert json_path.name == "run_summary.json"
        loaded = read_episodes_csv(csv_path)
        for original, back in zip(records, loaded):
            assert back.outcome == original.outcome
            assert back.pareto == original.pareto
            np.testing.assert_allclose(back.utilities, original.utilities, atol=1e-12)
            assert back.objective == pytest.approx(original.objective, abs=1e-12)

    def test_summary_recomputed_from_csv(self, tmp_path):
        records = [record(0), record(1, outcome="Failure", utilities=(0.0, 0.0), rounds=12)]
        summary = summarize(records, label="r", seeds=(0,))
        csv_path, _ = write_report(summary, records, tmp_path)
        again = summary_from_csv(csv_path, label="r", seeds=(0,))
        assert again.consensus_rate == summary.consensus_rate
        assert again.mean_rounds == summary.mean_rounds
        assert again.mean_J == pytest.approx(summary.mean_J, abs=1e-12)

    def test_summary_file(self, tmp_path):
        summary = summarize([record(0)], label="one", seeds=(4,))
        path = write_summary(summary, tmp_path / "s.json")
        assert json.loads(path.read_text())['format'] == SUMMARY_FORMAT
        assert read_summary(path) == summary

    def test_wrong_summary_format(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({'format': 'other'}))
        with pytest.raises(ValueError):
            read_summary(path)


class TestSweeps:
    def test_full_variant(self):
        variant = make_variant(FULL, Settings())
        assert variant.flags.hierarchy and variant.flags.attention
        assert variant.train_env == variant.eval_env

    def test_no_shaping_only_affects_training(self):
        variant = make_variant("no-shaping", Settings())
        assert variant.train_env.reward_weights.process == 0.0
        assert variant.eval_env.reward_weights.process == Settings().rewards.weights.process

    def test_no_pnp_opens_protocol(self):
        variant = make_variant("no-pnp", Settings())
        assert variant.train_env.open_protocol and variant.eval_env.open_protocol

    def test_architecture_flags(self):
        assert not make_variant("no-hierarchy", Settings()).flags.hierarchy
        assert not make_variant("no-attention", Settings()).flags.attention

    def test_unknown_flag(self):
        with pytest.raises(UnknownFlagError):
            make_variant("no-memory", Settings())
        with pytest.raises(UnknownFlagError):
            parse_flags("no-shaping,no-memory")

    def test_parse_flags_deduplicates(self):
        assert parse_flags("no-pnp, no-shaping,no-pnp") == ["no-pnp", "no-shaping"]
        assert parse_flags(["NO-ATTENTION"]) == ["no-attention"]
