"""HCN negotiator seat: turns observations into actions with the policy network."""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.arena.actions import AgentAction
from src.arena.domain import Scenario
from src.arena.observation import Observation

from .features import PolicyInput, build_policy_input
from .hcn import ArchitectureFlags, PolicyOutput, forward
from .params import HcnParams, check_compatible
from .sampling import sample_action


@dataclass
class Decision:
    """Everything a rollout needs to remember about one policy step"""
    policy_input: PolicyInput
    action: AgentAction
    log_prob: float
    value: float
    entropy: float
    output: PolicyOutput


class HcnAgent:
    name = "hcn"

    def __init__(self, params: HcnParams, rng: Optional[np.random.Generator] = None,
                 deterministic: bool = False, flags: ArchitectureFlags = ArchitectureFlags()):
        self.params = params if not any(t.requires_grad for t in params) else params.frozen()
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.deterministic = deterministic
        self.flags = flags
        self.last_decision: Optional[Decision] = None

    def reset(self, scenario: Scenario, agent_id: int) -> None:
        check_compatible(self.params, scenario.num_agents, scenario.value_counts)
        self.last_decision = None

    def decide(self, observation: Observation) -> Decision:
        policy_input = build_policy_input(observation, self.params.shape)
        output = forward(policy_input, self.params, self.flags)
        action, log_prob, entropy = sample_action(output, self.rng, self.deterministic)
        decision = Decision(policy_input=policy_input, action=action, log_prob=log_prob,
                            value=output.value.item(), entropy=entropy, output=output)
        self.last_decision = decision
        return decision

    def act(self, observation: Observation, env=None) -> AgentAction:
        return self.decide(observation).action
