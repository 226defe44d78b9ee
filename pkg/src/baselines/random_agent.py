"""Uniform random negotiator, the floor every trained policy must beat."""
from typing import Optional

import numpy as np

from src.arena.actions import AgentAction, DeferredAction, PASS_ACTION
from src.arena.domain import Scenario
from src.arena.protocol import MoveTag, NEEDS_DEAL, ProtocolState, legal_moves


def random_policy(state: ProtocolState, agent: int, rng: np.random.Generator) -> AgentAction:
    """Uniform legal tag, uniform deal indices and issue, uniform concession"""
    if state.terminated is not None:
        return PASS_ACTION
    legal = legal_moves(state, agent)
    tags = sorted(legal.tags)
    tag = MoveTag(tags[int(rng.integers(len(tags)))])
    concession = float(rng.uniform(0.0, 1.0))
    deal = None
    if tag in NEEDS_DEAL:
        deal = tuple(int(rng.integers(n)) for n in state.value_counts)
    issue = int(rng.integers(len(state.value_counts)))
    return AgentAction(tag=tag, concession=concession, deal=deal, issue=issue)


class RandomAgent:
    name = "random"

    def __init__(self, rng: Optional[np.random.Generator] = None):
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.agent_id = 0

    def reset(self, scenario: Scenario, agent_id: int) -> None:
        self.agent_id = agent_id

    def decide(self, state: ProtocolState) -> AgentAction:
        return random_policy(state, self.agent_id, self.rng)

    def act(self, observation, env) -> DeferredAction:
        return self.decide
