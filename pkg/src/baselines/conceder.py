"""
Time-dependent concession negotiator.

The aspiration falls from 1 to the reservation value along
target(t) = res + (1 - res) * (1 - (t / T) ** (1 / beta)); beta < 1 holds firm
until late (Boulware), beta > 1 gives ground early.
"""
from typing import Optional, Sequence

import numpy as np

from src.arena.actions import (
    DEAL_SEARCH_LIMIT, AgentAction, DeferredAction, PASS_ACTION, deal_array_for, own_utilities,
)
from src.arena.domain import Deal, PreferenceProfile, Scenario, best_deal_for, utility
from src.arena.protocol import MoveTag, ProtocolState, legal_moves


def conceder_target(round_index: int, total_budget: int, reservation: float, beta: float) -> float:
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    progress = min(1.0, max(0.0, round_index / total_budget))
    return reservation + (1.0 - reservation) * (1.0 - progress ** (1.0 / beta))


def concession_deal(profile: PreferenceProfile, value_counts: Sequence[int], target: float,
                    limit: int = DEAL_SEARCH_LIMIT) -> Deal:
    """
    Least demanding deal the agent still values at target or more.

    Exhaustive below `limit` deals (lowest lexicographic deal on ties);
    otherwise per-issue greedy descent from the agent's best deal.
    """
    if int(np.prod(value_counts)) <= limit:
        deals = deal_array_for(value_counts)
        own = own_utilities(profile, deals)
        feasible = own >= target
        if not feasible.any():
            return best_deal_for(profile)
        index = int(np.argmin(np.where(feasible, own, np.inf)))
        return tuple(int(v) for v in deals[index])

    current = list(best_deal_for(profile))
    current_utility = utility(profile, current)
    while True:
        best_move = None
        best_utility = current_utility
        for m, n in enumerate(value_counts):
            for v in range(n):
                trial = current.copy()
                trial[m] = v
                u = utility(profile, trial)
                if target <= u < best_utility:
                    best_move, best_utility = (m, v), u
        if best_move is None:
            return tuple(current)
        current[best_move[0]] = best_move[1]
        current_utility = best_utility


def conceder_policy(state: ProtocolState, agent: int, profile: PreferenceProfile, beta: float) -> AgentAction:
    """Accept when the standing deal meets the aspiration, else offer at the aspiration"""
    if state.terminated is not None:
        return PASS_ACTION
    legal = legal_moves(state, agent)
    target = conceder_target(state.round, state.total_budget, profile.reservation, beta)
    standing = state.standing

    if MoveTag.ACCEPT in legal and utility(profile, standing.deal) >= target:
        return AgentAction(tag=MoveTag.ACCEPT)
    for tag in (MoveTag.COUNTEROFFER, MoveTag.PROPOSE):
        if tag in legal:
            deal = concession_deal(profile, state.value_counts, target)
            if standing is not None and standing.author == agent and standing.deal == deal:
                return PASS_ACTION
            return AgentAction(tag=tag, deal=deal)
    return PASS_ACTION


class ConcederAgent:
    def __init__(self, beta: float = 1.0):
        if beta <= 0:
            raise ValueError(f"beta must be positive, got {beta}")
        self.beta = beta
        self.agent_id = 0
        self.profile: Optional[PreferenceProfile] = None

    @property
    def name(self) -> str:
        return f"conceder:{self.beta:g}"

    def reset(self, scenario: Scenario, agent_id: int) -> None:
        self.agent_id = agent_id
        self.profile = scenario.profiles[agent_id]

    def decide(self, state: ProtocolState) -> AgentAction:
        return conceder_policy(state, self.agent_id, self.profile, self.beta)

    def act(self, observation, env) -> DeferredAction:
        return self.decide
