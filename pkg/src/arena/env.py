"""
Episode engine: wraps the protocol with observations, action decoding,
opponent beliefs and shaped rewards.
"""
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import structlog

from src.errors import ProtocolClosedError
from src.rewards.beliefs import BeliefConfig, BeliefState, estimated_welfare, intrinsic_reward, uniform_belief, update_belief
from src.rewards.shaping import (
    RewardBreakdown, RewardWeights, ShapingConfig, StepContext, outcome_reward, process_reward, social_reward,
    total_reward,
)

from .actions import RoundAction, decode_action, resolve_action
from .domain import Scenario, utility
from .observation import DEFAULT_HISTORY, Observation, build_observation
from .protocol import (
    Accept, Agreement, Counteroffer, Message, Outcome, Propose, ProtocolState, Reject, _Ongoing, apply_message,
    initial_state, outcome,
)

logger = structlog.get_logger()


@dataclass
class EnvConfig:
    reward_weights: RewardWeights = field(default_factory=RewardWeights)
    shaping: ShapingConfig = field(default_factory=ShapingConfig)
    beliefs: BeliefConfig = field(default_factory=BeliefConfig)
    open_protocol: bool = False
    history_window: int = DEFAULT_HISTORY


@dataclass
class StepResult:
    observations: List[Observation]
    rewards: List[RewardBreakdown]
    done: bool
    illegal: List[bool]
    # false for agents left unplayed because an earlier move ended the episode
    applied: List[bool]


@dataclass
class EpisodeResult:
    """Final record of one negotiation"""
    outcome: Union[Outcome, _Ongoing]
    utilities: Tuple[float, ...]
    rounds: int
    state: ProtocolState
    rewards: List[List[RewardBreakdown]]
    seed: int = 0
    illegal_actions: int = 0
    wall_seconds: float = 0.0

    @property
    def agreed(self) -> bool:
        return isinstance(self.outcome, Agreement)


class NegotiationEnv:
    """One negotiation episode at a time; not shared between workers"""

    def __init__(self, config: Optional[EnvConfig] = None):
        self.config = config or EnvConfig()
        self.scenario: Optional[Scenario] = None
        self.state: Optional[ProtocolState] = None
        self.beliefs: List[BeliefState] = []
        self.seed = 0
        self._rewards: List[List[RewardBreakdown]] = []
        self._illegal = 0
        self._started = 0.0

    @property
    def done(self) -> bool:
        return self.state is not None and self.state.terminated is not None

    def reset(self, scenario: Scenario, seed: Optional[int] = None) -> List[Observation]:
        """Start a new episode on the scenario"""
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else int(seed)
        self.state = initial_state(scenario, num_buckets=self.config.beliefs.num_buckets,
                                   open_protocol=self.config.open_protocol)
        grids = [issue.value_grid for issue in scenario.issues]
        self.beliefs = [uniform_belief(i, scenario.num_agents, grids, self.config.beliefs.num_buckets)
                        for i in range(scenario.num_agents)]
        self._rewards = []
        self._illegal = 0
        self._started = time.perf_counter()
        logger.debug("Episode reset", agents=scenario.num_agents, issues=scenario.num_issues, seed=self.seed)
        return self.observations()

    def observations(self) -> List[Observation]:
        return [build_observation(self.scenario, self.state, i, self.beliefs[i], self.config.history_window)
                for i in range(self.scenario.num_agents)]

    def _referenced_deal(self, msg: Message):
        if isinstance(msg, (Accept, Reject)):
            return self.state.proposal_log[msg.proposal_id].deal
        return None

    def _observe(self, issuer: int, msg: Message, deal) -> None:
        self.beliefs = [update_belief(belief, msg, issuer, deal, self.config.beliefs) for belief in self.beliefs]

    def step(self, actions: Sequence[RoundAction]) -> StepResult:
        """
        Play one round: every agent's action is decoded against the state at
        its application time and applied in ascending id order. Deferred
        actions are resolved at that point too.
        """
        if self.state is None:
            raise ProtocolClosedError("Environment has not been reset")
        if self.done:
            raise ProtocolClosedError("Episode already finished")
        scenario = self.scenario
        n = scenario.num_agents
        if len(actions) != n:
            raise ValueError(f"Expected {n} actions, got {len(actions)}")

        phase = self.state.phase
        round_index = self.state.round
        beliefs_before = list(self.beliefs)
        illegal = [False] * n
        applied = [False] * n
        improved = [False] * n
        accepted_messages: List[Tuple[int, int]] = []

        for agent, action in enumerate(actions):
            if self.state.terminated is not None:
                break
            profile = scenario.profiles[agent]
            action = resolve_action(action, self.state)
            msg, was_illegal = decode_action(action, self.state, agent, profile, self.beliefs[agent])
            illegal[agent] = was_illegal
            if isinstance(msg, (Propose, Counteroffer)):
                previous = self.state.standing
                if previous is not None:
                    belief = self.beliefs[agent]
                    old = estimated_welfare(belief, utility(profile, previous.deal), previous.deal)
                    new = estimated_welfare(belief, utility(profile, msg.deal), msg.deal)
                    improved[agent] = new > old
            deal = self._referenced_deal(msg)
            if isinstance(msg, Accept):
                accepted_messages.append((agent, msg.proposal_id))
            self.state = apply_message(self.state, agent, msg)
            self._observe(agent, msg, deal)
            applied[agent] = True

        self._illegal += sum(illegal)
        done = self.done
        result = outcome(self.state)
        # the agreed proposal stays standing after termination
        standing_record = self.state.standing

        rewards = []
        for agent in range(n):
            has_standing = standing_record is not None and standing_record.author == agent
            accepted_by = 0
            if has_standing:
                accepted_by = sum(1 for other, pid in accepted_messages
                                  if other != agent and pid == standing_record.id)
            context = StepContext(phase=phase, illegal=illegal[agent], improved_welfare=improved[agent],
                                  has_standing=has_standing, accepted_by=accepted_by, num_agents=n)
            breakdown = total_reward(
                outcome=outcome_reward(scenario.profiles[agent], result) if done else 0.0,
                process=process_reward(context, self.config.shaping),
                social=social_reward(context, self.config.shaping),
                intrinsic=intrinsic_reward(beliefs_before[agent], self.beliefs[agent]),
                weights=self.config.reward_weights,
            )
            rewards.append(breakdown)
        self._rewards.append(rewards)

        if done:
            logger.debug("Episode finished", outcome=type(result).__name__, round=round_index,
                         illegal=self._illegal)
        return StepResult(observations=self.observations(), rewards=rewards, done=done, illegal=illegal,
                          applied=applied)

    def result(self) -> EpisodeResult:
        """Summary of the finished (or current) episode"""
        scenario = self.scenario
        result = outcome(self.state)
        if isinstance(result, Agreement):
            utilities = tuple(utility(p, result.deal) for p in scenario.profiles)
            rounds = result.round + 1
        else:
            utilities = scenario.reservations
            rounds = self.state.round
        return EpisodeResult(
            outcome=result,
            utilities=utilities,
            rounds=rounds,
            state=self.state,
            rewards=self._rewards,
            seed=self.seed,
            illegal_actions=self._illegal,
            wall_seconds=time.perf_counter() - self._started,
        )


def run_episode(env: NegotiationEnv, scenario: Scenario, agents: Sequence, seed: Optional[int] = None) -> EpisodeResult:
    """
    Play a full episode with agent objects exposing act(observation, env)
    and an optional reset(scenario, agent_id).
    """
    observations = env.reset(scenario, seed)
    for i, agent in enumerate(agents):
        if hasattr(agent, 'reset'):
            agent.reset(scenario, i)
    while not env.done:
        actions = [agent.act(observations[i], env) for i, agent in enumerate(agents)]
        observations = env.step(actions).observations
    return env.result()
