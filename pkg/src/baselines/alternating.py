"""
Classical alternating-offers negotiator.

The proposer at round r is agent r mod N and only the proposer makes
offers. Every other agent answers the standing offer, accepting it at or
above its current target and rejecting it otherwise; the target decays
linearly from 1 to the reservation value over the round budget.
"""
from typing import List, Optional, Set

import numpy as np

from src.arena.actions import (
    DEAL_SEARCH_LIMIT, AgentAction, DeferredAction, PASS_ACTION, deal_array_for, own_utilities,
)
from src.arena.domain import Deal, PreferenceProfile, Scenario, utility
from src.arena.protocol import MoveTag, Phase, ProtocolState, legal_moves

from .conceder import concession_deal

OFFER_PHASES = frozenset({Phase.PROPOSAL_EXCHANGE, Phase.CONVERGENCE})


def linear_target(round_index: int, total_budget: int, reservation: float) -> float:
    progress = min(1.0, max(0.0, round_index / total_budget))
    return 1.0 - (1.0 - reservation) * progress


def proposer_at(round_index: int, num_agents: int) -> int:
    return round_index % num_agents


class AlternatingOffersAgent:
    name = "alternating"

    def __init__(self):
        self.agent_id = 0
        self.profile: Optional[PreferenceProfile] = None
        self.proposed: Set[Deal] = set()
        self._ranked: Optional[List[Deal]] = None

    def reset(self, scenario: Scenario, agent_id: int) -> None:
        self.agent_id = agent_id
        self.profile = scenario.profiles[agent_id]
        self.proposed = set()
        self._ranked = None
        if scenario.deal_count <= DEAL_SEARCH_LIMIT:
            deals = deal_array_for(scenario.value_counts)
            own = own_utilities(self.profile, deals)
            # stable sort keeps lexicographic order among equal utilities
            order = np.argsort(-own, kind='stable')
            self._ranked = [tuple(int(v) for v in deals[i]) for i in order]

    def next_offer(self, state: ProtocolState, target: float) -> Deal:
        """Best deal not yet offered with utility at or above target"""
        if self._ranked is None:
            return concession_deal(self.profile, state.value_counts, target)
        fallback = None
        for deal in self._ranked:
            if utility(self.profile, deal) < target:
                break
            if deal not in self.proposed:
                return deal
            fallback = deal
        if fallback is not None:
            return fallback
        return self._ranked[0]

    def decide(self, state: ProtocolState) -> AgentAction:
        if state.terminated is not None:
            return PASS_ACTION
        legal = legal_moves(state, self.agent_id)
        phase = state.phase
        if phase not in OFFER_PHASES and not state.open_protocol:
            return PASS_ACTION
        target = linear_target(state.round, state.total_budget, self.profile.reservation)

        if proposer_at(state.round, state.num_agents) == self.agent_id:
            for tag in (MoveTag.COUNTEROFFER, MoveTag.PROPOSE):
                if tag in legal:
                    deal = self.next_offer(state, target)
                    self.proposed.add(deal)
                    return AgentAction(tag=tag, deal=deal)
            return PASS_ACTION

        if MoveTag.ACCEPT in legal and utility(self.profile, state.standing.deal) >= target:
            return AgentAction(tag=MoveTag.ACCEPT)
        if MoveTag.REJECT in legal:
            return AgentAction(tag=MoveTag.REJECT)
        return PASS_ACTION

    def act(self, observation, env) -> DeferredAction:
        return self.decide
