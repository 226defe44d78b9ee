import math

import numpy as np
import pytest

from src.arena.domain import make_grid
from src.arena.protocol import (
    Accept, Agreement, Argue, Counteroffer, Direction, Failure, Ongoing, Pass, Phase, Propose, Reject, Reveal,
)
from src.rewards.beliefs import (
    BeliefConfig, estimated_utility, expected_weights, intrinsic_reward, uniform_belief, update_belief,
    weight_bucket,
)
from src.rewards.objective import ObjectiveWeights, consensus_score, system_objective
from src.rewards.shaping import (
    RewardWeights, ShapingConfig, StepContext, outcome_reward, process_reward, social_reward, total_reward,
)

from .conftest import opposed_scenario


def belief(num_agents=2, num_issues=1, num_values=3, num_buckets=3, observer=0):
    return uniform_belief(observer, num_agents, [make_grid(num_values)] * num_issues, num_buckets)


class TestOutcomeReward:
    def test_best_deal(self):
        profile = opposed_scenario(reservations=(0.2, 0.0)).profiles[0]
        assert outcome_reward(profile, Agreement(deal=(4,), round=3)) == pytest.approx(1.0)

    def test_indifference_point(self):
        profile = opposed_scenario(reservations=(0.5, 0.0)).profiles[0]
        assert outcome_reward(profile, Agreement(deal=(2,), round=3)) == pytest.approx(0.0)

    def test_failure_and_ongoing(self):
        profile = opposed_scenario().profiles[0]
        assert outcome_reward(profile, Failure(round=12)) == 0.0
        assert outcome_reward(profile, Ongoing) == 0.0

    def test_clipped_below(self):
        profile = opposed_scenario(reservations=(0.6, 0.0)).profiles[0]
        assert outcome_reward(profile, Agreement(deal=(0,), round=3)) == -1.0


class TestProcessAndSocial:
    def test_plain_pass(self):
        assert process_reward(StepContext(phase=Phase.PROPOSAL_EXCHANGE)) == pytest.approx(-0.01)

    def test_improving_proposal(self):
        context = StepContext(phase=Phase.PROPOSAL_EXCHANGE, improved_welfare=True)
        assert process_reward(context) == pytest.approx(0.04)

    def test_illegal_action(self):
        context = StepContext(phase=Phase.PROPOSAL_EXCHANGE, illegal=True)
        assert process_reward(context) == pytest.approx(-0.11)

    def test_convergence_doubles_time_cost(self):
        assert process_reward(StepContext(phase=Phase.CONVERGENCE)) == pytest.approx(-0.02)

    def test_partial_acceptance(self):
        context = StepContext(phase=Phase.CONVERGENCE, has_standing=True, accepted_by=2, num_agents=4)
        assert social_reward(context) == pytest.approx(0.1 * 2 / 3)

    def test_no_standing(self):
        assert social_reward(StepContext(phase=Phase.CONVERGENCE, accepted_by=3, num_agents=4)) == 0.0

    def test_all_accept(self):
        context = StepContext(phase=Phase.CONVERGENCE, has_standing=True, accepted_by=3, num_agents=4)
        assert social_reward(context) == pytest.approx(0.1)

    def test_custom_constants(self):
        config = ShapingConfig(time_cost=0.05, phase_time_multipliers=(1.0,) * 5)
        assert process_reward(StepContext(phase=Phase.CONVERGENCE), config) == pytest.approx(-0.05)


class TestTotalReward:
    def test_outcome_only(self):
        breakdown = total_reward(0.7, -0.01, 0.1, 0.2, RewardWeights(1.0, 0.0, 0.0, 0.0))
        assert breakdown.total == pytest.approx(0.7)

    def test_unit_weights(self):
        breakdown = total_reward(0.5, -0.01, 0.1, 0.2, RewardWeights(1.0, 1.0, 1.0, 1.0))
        assert breakdown.total == pytest.approx(0.79)

    def test_zero_components(self):
        assert total_reward(0.0, 0.0, 0.0, 0.0).total == 0.0

    def test_weighted_sum_is_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(10_000):
            weights = RewardWeights(*rng.uniform(0.0, 2.0, size=4))
            parts = rng.normal(size=4)
            breakdown = total_reward(*parts, weights=weights)
            expected = (weights.outcome * parts[0] + weights.process * parts[1]
                        + weights.social * parts[2] + weights.intrinsic * parts[3])
            assert breakdown.total == expected

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            RewardWeights(process=-0.1)

    def test_without_shaping(self):
        weights = RewardWeights().without_shaping()
        assert (weights.process, weights.social, weights.intrinsic) == (0.0, 0.0, 0.0)
        assert weights.outcome == 1.0


class TestBeliefs:
    def test_reveal_posterior(self):
        after = update_belief(belief(), Reveal(issue_id=0, bucket=1), issuer=1)
        np.testing.assert_allclose(after.buckets[1, 0], [0.05, 0.9, 0.05])

    def test_no_message_leaves_belief(self):
        before = belief()
        assert update_belief(before, None, issuer=1) is before
        assert update_belief(before, Pass(), issuer=1) is before

    def test_own_messages_ignored(self):
        before = belief()
        assert update_belief(before, Reveal(issue_id=0, bucket=2), issuer=0) is before

    def test_argue_shifts_direction(self):
        after = update_belief(belief(), Argue(issue_id=0, direction=Direction.LOWER, strength=1.0), issuer=1)
        p_inc, p_dec = after.directions[1, 0]
        assert p_dec == pytest.approx(0.9)
        assert p_inc == pytest.approx(0.1)

    def test_accept_and_reject_move_opposite_ways(self):
        before = belief(num_issues=2)
        accepted = update_belief(before, Accept(proposal_id=0), issuer=1, deal=(2, 0))
        rejected = update_belief(before, Reject(proposal_id=0), issuer=1, deal=(2, 0))
        assert accepted.directions[1, 0, 0] > 0.5
        assert rejected.directions[1, 0, 0] < 0.5

    def test_offers_count_as_acceptance_of_the_offered_deal(self):
        before = belief(num_issues=2)
        accepted = update_belief(before, Accept(proposal_id=0), issuer=1, deal=(2, 0))
        proposed = update_belief(before, Propose(deal=(2, 0)), issuer=1)
        countered = update_belief(before, Counteroffer(proposal_id=0, deal=(2, 0)), issuer=1)
        for after in (proposed, countered):
            np.testing.assert_allclose(after.directions, accepted.directions)
            np.testing.assert_allclose(after.buckets, accepted.buckets)

    def test_posteriors_stay_distributions(self):
        rng = np.random.default_rng(3)
        state = belief(num_agents=3, num_issues=2, num_values=4)
        for _ in range(10_000):
            issuer = int(rng.integers(1, 3))
            kind = int(rng.integers(4))
            if kind == 0:
                msg = Reveal(issue_id=int(rng.integers(2)), bucket=int(rng.integers(3)))
                state = update_belief(state, msg, issuer)
            elif kind == 1:
                msg = Argue(issue_id=int(rng.integers(2)), direction=Direction.RAISE, strength=float(rng.random()))
                state = update_belief(state, msg, issuer)
            elif kind == 2:
                state = update_belief(state, Propose(deal=tuple(int(v) for v in rng.integers(4, size=2))), issuer)
            else:
                state = update_belief(state, Reject(proposal_id=0), issuer,
                                      deal=tuple(int(v) for v in rng.integers(4, size=2)))
        np.testing.assert_allclose(state.buckets.sum(axis=-1), 1.0, atol=1e-9)
        np.testing.assert_allclose(state.directions.sum(axis=-1), 1.0, atol=1e-9)
        assert np.all(state.buckets >= 0) and np.all(state.directions >= 0)

    def test_expected_weights_normalized(self):
        weights = expected_weights(update_belief(belief(num_issues=3), Reveal(issue_id=1, bucket=2), issuer=1), 1)
        assert weights.sum() == pytest.approx(1.0)
        assert weights[1] > weights[0]

    def test_estimated_utility_uniform_prior(self):
        assert estimated_utility(belief(), 1, (0,)) == pytest.approx(0.5)

    def test_reveal_bucket_rule(self):
        assert weight_bucket(1.0, 1, 3) == 1
        assert weight_bucket(0.1, 4, 3) == 0
        assert weight_bucket(0.7, 4, 3) == 2


class TestIntrinsicReward:
    def test_uniform_to_point_mass(self):
        before = belief(num_buckets=4)
        after = before.copy()
        after.buckets[1, 0] = [1.0, 0.0, 0.0, 0.0]
        assert intrinsic_reward(before, after) == pytest.approx(math.log(4))

    def test_uniform_to_half(self):
        before = belief(num_buckets=4)
        after = before.copy()
        after.buckets[1, 0] = [0.5, 0.5, 0.0, 0.0]
        assert intrinsic_reward(before, after) == pytest.approx(math.log(2))

    def test_no_change(self):
        before = belief()
        assert intrinsic_reward(before, before) == 0.0
        assert intrinsic_reward(before, before.copy()) == 0.0

    def test_clipped_at_zero(self):
        sharp = belief()
        sharp.buckets[1, 0] = [1.0, 0.0, 0.0]
        assert intrinsic_reward(sharp, belief()) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            intrinsic_reward(belief(num_issues=1), belief(num_issues=2))


class TestSystemObjective:
    def test_utility_sum_only(self):
        j = system_objective(Agreement(deal=(0,), round=3), (0.5, 0.7), 4, 12, (0.0, 0.0),
                             ObjectiveWeights(1.0, 0.0, 0.0))
        assert j == pytest.approx(1.2)

    def test_failure(self):
        j = system_objective(Failure(round=12), (0.2, 0.2), 12, 12, (0.2, 0.2), ObjectiveWeights(1.0, 1.0, 1.0))
        assert j == pytest.approx(-0.6)

    def test_equal_utilities_full_consensus(self):
        assert consensus_score((0.6, 0.6, 0.6), (0.1, 0.2, 0.3)) == pytest.approx(1.0)
        j = system_objective(Agreement(deal=(0,), round=0), (0.6, 0.6), 1, 12, (0.1, 0.1),
                             ObjectiveWeights(0.0, 1.0, 0.0))
        assert j == pytest.approx(1.0)

    def test_monotone_in_utilities(self):
        weights = ObjectiveWeights(1.0, 0.0, 0.5)
        low = system_objective(Agreement(deal=(0,), round=3), (0.4, 0.5), 4, 12, (0.0, 0.0), weights)
        high = system_objective(Agreement(deal=(0,), round=3), (0.45, 0.5), 4, 12, (0.0, 0.0), weights)
        assert high > low

    def test_belief_config_defaults(self):
        config = BeliefConfig()
        assert (config.num_buckets, config.reveal_noise, config.acceptance_slope) == (3, 0.1, 5.0)
