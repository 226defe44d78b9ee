import itertools

import numpy as np
import pytest

from src.arena.actions import decode_action
from src.arena.env import NegotiationEnv, run_episode
from src.arena.protocol import (
    Agreement, MoveTag, Pass, Propose, apply_message, initial_state, legal_moves,
)
from src.baselines.alternating import AlternatingOffersAgent, linear_target, proposer_at
from src.baselines.conceder import ConcederAgent, concession_deal, conceder_policy, conceder_target
from src.baselines.random_agent import RandomAgent, random_policy
from src.baselines.registry import AgentFactory, AgentSpec, parse_agent_specs
from src.errors import ConfigError

from .conftest import identical_scenario, make_scenario, opposed_scenario


def pass_until(state, round_):
    while state.round < round_:
        state = apply_message(state, state.next_agent, Pass())
    return state


def offer_standing(scenario, deal):
    """Round 4, agent 0 to move, agent 1's offer of `deal` standing"""
    state = pass_until(initial_state(scenario), 3)
    state = apply_message(state, 0, Pass())
    return apply_message(state, 1, Propose(deal=deal))


class TestConceder:
    def test_starts_at_one(self):
        assert conceder_target(0, 12, 0.3, 1.0) == pytest.approx(1.0)

    def test_ends_at_reservation(self):
        assert conceder_target(12, 12, 0.3, 0.5) == pytest.approx(0.3)

    def test_linear_midpoint(self):
        assert conceder_target(6, 12, 0.0, 1.0) == pytest.approx(0.5)

    def test_conceder_gives_ground_early(self):
        boulware = conceder_target(6, 12, 0.0, 0.5)
        conceder = conceder_target(6, 12, 0.0, 2.0)
        assert boulware == pytest.approx(0.75)
        assert conceder == pytest.approx(1.0 - 0.5 ** 0.5)

    def test_beta_must_be_positive(self):
        with pytest.raises(ValueError):
            conceder_target(1, 12, 0.0, 0.0)
        with pytest.raises(ValueError):
            ConcederAgent(-1.0)

    def test_concession_deal_is_least_demanding(self):
        profile = opposed_scenario().profiles[0]
        assert concession_deal(profile, (5,), 0.5) == (2,)
        assert concession_deal(profile, (5,), 0.6) == (3,)
        assert concession_deal(profile, (5,), 2.0) == (4,)

    def test_two_conceders_agree(self, opposed):
        result = run_episode(NegotiationEnv(), opposed, [ConcederAgent(2.0), ConcederAgent(2.0)])
        assert result.outcome == Agreement(deal=(2,), round=3)
        assert result.illegal_actions == 0

    def test_name(self):
        assert ConcederAgent(2.0).name == "conceder:2"


class TestAlternating:
    def test_linear_target(self):
        assert linear_target(0, 12, 0.2) == pytest.approx(1.0)
        assert linear_target(6, 12, 0.2) == pytest.approx(0.6)

    def test_proposer_rotates(self):
        assert [proposer_at(r, 3) for r in range(5)] == [0, 1, 2, 0, 1]

    def test_identical_preferences_agree_before_budget(self):
        scenario = identical_scenario()
        result = run_episode(NegotiationEnv(), scenario, [AlternatingOffersAgent(), AlternatingOffersAgent()])
        assert result.outcome == Agreement(deal=(2,), round=4)
        assert result.utilities == pytest.approx((1.0, 1.0))

    def test_three_identical_agents_accept_the_first_offer(self):
        scenario = identical_scenario(num_agents=3)
        result = run_episode(NegotiationEnv(), scenario, [AlternatingOffersAgent() for _ in range(3)])
        assert result.outcome == Agreement(deal=(2,), round=3)

    @pytest.mark.parametrize("scenario", [
        opposed_scenario(num_values=9),
        opposed_scenario(num_values=9, reservations=(0.3, 0.3)),
        identical_scenario(),
        identical_scenario(num_agents=3),
    ])
    def test_no_accept_on_own_turn(self, scenario):
        agents = [AlternatingOffersAgent() for _ in range(scenario.num_agents)]
        result = run_episode(NegotiationEnv(), scenario, agents)
        own_turn = [(e.round, e.agent) for e in result.state.message_log
                    if e.message.tag in (MoveTag.ACCEPT, MoveTag.REJECT)
                    and proposer_at(e.round, scenario.num_agents) == e.agent]
        assert own_turn == []
        assert result.illegal_actions == 0

    def test_offer_at_target_is_accepted(self, opposed):
        # round 6: agent 0 proposes, agent 1 values (2,) at 0.5 and its target is 1 - 6/12
        state = pass_until(initial_state(opposed), 6)
        state = apply_message(state, 0, Propose(deal=(2,)))
        agent = AlternatingOffersAgent()
        agent.reset(opposed, 1)
        assert linear_target(state.round, state.total_budget, 0.0) == 0.5
        assert agent.decide(state).tag is MoveTag.ACCEPT

    def test_offer_below_target_is_rejected(self, opposed):
        state = pass_until(initial_state(opposed), 6)
        state = apply_message(state, 0, Propose(deal=(3,)))
        agent = AlternatingOffersAgent()
        agent.reset(opposed, 1)
        assert agent.decide(state).tag is MoveTag.REJECT

    def test_proposer_counters_an_acceptable_offer(self, opposed):
        state = offer_standing(opposed, (4,))
        agent = AlternatingOffersAgent()
        agent.reset(opposed, 0)
        assert proposer_at(state.round, 2) == 0
        decision = agent.decide(state)
        assert decision.tag is MoveTag.COUNTEROFFER
        assert decision.deal == (4,)

    def test_never_repeats_an_offer_above_target(self, two_issue_scenario):
        agent = AlternatingOffersAgent()
        agent.reset(two_issue_scenario, 0)
        state = initial_state(two_issue_scenario)
        first = agent.next_offer(state, 0.0)
        agent.proposed.add(first)
        assert agent.next_offer(state, 0.0) != first

    def test_passes_outside_offer_phases(self, opposed):
        agent = AlternatingOffersAgent()
        agent.reset(opposed, 0)
        assert agent.decide(initial_state(opposed)).tag is MoveTag.PASS


class TestRandom:
    def test_only_legal_tags(self, opposed, rng):
        state = initial_state(opposed)
        while state.terminated is None:
            agent = state.next_agent
            legal = legal_moves(state, agent)
            action = random_policy(state, agent, rng)
            assert action.tag in legal
            state = apply_message(state, agent, Pass())

    def test_initialization_choices(self, opposed, rng):
        state = initial_state(opposed)
        tags = {random_policy(state, 0, rng).tag for _ in range(200)}
        assert tags == {MoveTag.REVEAL, MoveTag.PASS}

    def test_tags_uniform_over_legal_moves(self, opposed, rng):
        state = offer_standing(opposed, (1,))
        legal = sorted(legal_moves(state, 0).tags)
        assert len(legal) == 5
        draws = 10_000
        counts = {tag: 0 for tag in legal}
        for _ in range(draws):
            counts[random_policy(state, 0, rng).tag] += 1
        p = 1.0 / len(legal)
        sigma = (draws * p * (1.0 - p)) ** 0.5
        for tag, count in counts.items():
            assert abs(count - draws * p) <= 3 * sigma, tag

    def test_seeded_agents_repeat(self, opposed):
        first = run_episode(NegotiationEnv(), opposed, [RandomAgent(np.random.default_rng(1)),
                                                        RandomAgent(np.random.default_rng(2))])
        second = run_episode(NegotiationEnv(), opposed, [RandomAgent(np.random.default_rng(1)),
                                                         RandomAgent(np.random.default_rng(2))])
        assert first.outcome == second.outcome
        assert first.state.message_log == second.state.message_log


class TestOnlyPassLegal:
    """Convergence with nothing standing leaves Pass as the single legal move"""

    @pytest.fixture
    def state(self, opposed):
        state = pass_until(initial_state(opposed), 9)
        assert legal_moves(state, 0).tags == frozenset({MoveTag.PASS})
        return state

    def test_random(self, state, rng):
        assert {random_policy(state, 0, rng).tag for _ in range(50)} == {MoveTag.PASS}

    def test_conceder(self, state, opposed):
        for beta in (0.5, 1.0, 2.0):
            assert conceder_policy(state, 0, opposed.profiles[0], beta).tag is MoveTag.PASS

    def test_alternating(self, state, opposed):
        for seat in (0, 1):
            agent = AlternatingOffersAgent()
            agent.reset(opposed, seat)
            assert agent.decide(state).tag is MoveTag.PASS


FUZZ_SCENARIOS = [
    opposed_scenario(),
    opposed_scenario(num_values=9, reservations=(0.4, 0.2)),
    identical_scenario(num_agents=3),
    make_scenario([[0.6, 0.4], [0.3, 0.7]],
                  [[(0.0, 0.5, 1.0), (1.0, 0.5, 0.0)], [(1.0, 0.5, 0.0), (0.0, 0.5, 1.0)]]),
]


class TestLegalityFuzz:
    def test_baselines_only_send_legal_messages(self):
        rng = np.random.default_rng(2024)
        steps = 0
        for episode in itertools.count():
            if steps >= 100_000:
                break
            scenario = FUZZ_SCENARIOS[episode % len(FUZZ_SCENARIOS)]
            state = initial_state(scenario, open_protocol=episode % 3 == 2)
            alternating = [AlternatingOffersAgent() for _ in range(scenario.num_agents)]
            for seat, agent in enumerate(alternating):
                agent.reset(scenario, seat)
            beta = float(rng.choice([0.5, 1.0, 2.0]))
            while state.terminated is None:
                agent = state.next_agent
                profile = scenario.profiles[agent]
                legal = legal_moves(state, agent)
                choices = [
                    random_policy(state, agent, rng),
                    conceder_policy(state, agent, profile, beta),
                    alternating[agent].decide(state),
                ]
                for action in choices:
                    assert action.tag in legal
                    _, illegal = decode_action(action, state, agent, profile)
                    assert not illegal, (episode, state.round, action.tag)
                played = choices[int(rng.integers(len(choices)))]
                msg, _ = decode_action(played, state, agent, profile)
                state = apply_message(state, agent, msg)
                steps += 1


class TestRegistry:
    def test_parse(self):
        specs = parse_agent_specs("conceder:2.0, random,alternating")
        assert specs == [AgentSpec("conceder", "2.0"), AgentSpec("random"), AgentSpec("alternating")]
        assert str(specs[0]) == "conceder:2.0"

    @pytest.mark.parametrize("text", ["", "bogus", "hcn", "conceder:-1", "conceder:abc"])
    def test_invalid(self, text):
        with pytest.raises(ConfigError) as info:
            parse_agent_specs(text)
        assert info.value.field == "agents"

    def test_lineup_cycles(self):
        agents = AgentFactory().lineup(parse_agent_specs("conceder:0.5,random"), 3, seed=7)
        assert [type(a).__name__ for a in agents] == ["ConcederAgent", "RandomAgent", "ConcederAgent"]
        assert agents[0].beta == 0.5

    def test_hcn_without_params(self):
        with pytest.raises(ConfigError):
            AgentFactory().build(AgentSpec("hcn"), np.random.default_rng(0))
