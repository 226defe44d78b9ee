"""
Self-play experience collection.

Every episode picks one seat as the learner. Each other seat becomes a
rule-based exploiter (stage share), a pool snapshot (p_hist) or another copy
of the current policy; copies of the current policy are recorded as learner
seats too, since they share its parameters.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import structlog

from src.arena.env import EnvConfig, NegotiationEnv
from src.baselines.conceder import ConcederAgent
from src.policy.agent import HcnAgent
from src.policy.features import build_policy_input
from src.policy.hcn import ArchitectureFlags, forward
from src.policy.params import HcnParams
from src.rewards.objective import ObjectiveWeights, system_objective

from .buffer import EpisodeStats, RolloutBuffer, Transition
from .curriculum import CurriculumStage
from .pool import OpponentPool

logger = structlog.get_logger()

EXPLOITER_BETA = 0.3


@dataclass
class CollectionConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    flags: ArchitectureFlags = field(default_factory=ArchitectureFlags)
    objective: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    exploiter_beta: float = EXPLOITER_BETA


def _seat_agents(params: HcnParams, pool: Optional[OpponentPool], stage: CurriculumStage,
                 num_agents: int, rng: np.random.Generator, config: CollectionConfig):
    """(agents, learner seat ids) for one episode"""
    learner = int(rng.integers(num_agents))
    agents = []
    learners = []
    for seat in range(num_agents):
        if seat != learner and stage.exploiter_share > 0 and rng.random() < stage.exploiter_share:
            agents.append(ConcederAgent(config.exploiter_beta))
            continue
        seat_params = params
        if seat != learner and pool is not None:
            seat_params = pool.seat_params(rng, params)
        agents.append(HcnAgent(seat_params, rng=rng, flags=config.flags))
        if seat_params is params:
            learners.append(seat)
    return agents, learners


def collect_rollouts(params: HcnParams, pool: Optional[OpponentPool], stage: CurriculumStage, count: int,
                     seed: Union[int, Sequence[int]], config: Optional[CollectionConfig] = None) -> RolloutBuffer:
    """
    Play episodes of stage scenarios until exactly `count` learner steps are
    recorded. The result depends only on (seed, params, pool contents).
    """
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    config = config or CollectionConfig()
    rng = np.random.default_rng(seed)
    frozen = params.frozen()
    env = NegotiationEnv(config.env)
    buffer = RolloutBuffer()
    recorded = 0

    while recorded < count:
        scenario = stage.scenario(int(rng.integers(2**63)))
        agents, learners = _seat_agents(frozen, pool, stage, scenario.num_agents, rng, config)
        observations = env.reset(scenario)
        for seat, agent in enumerate(agents):
            agent.reset(scenario, seat)

        segments: Dict[int, List[Transition]] = {seat: [] for seat in learners}
        bootstrap: Dict[int, float] = {}
        while not env.done:
            actions = [agent.act(observations[seat], env) for seat, agent in enumerate(agents)]
            step = env.step(actions)
            for seat in learners:
                if not step.applied[seat]:
                    # an earlier seat ended the episode; its final reward joins this seat's last move
                    if segments[seat]:
                        last = segments[seat][-1]
                        last.reward += step.rewards[seat].total
                        last.done = True
                    continue
                decision = agents[seat].last_decision
                if recorded >= count:
                    # the step budget ran out mid-round: bootstrap from this decision
                    bootstrap.setdefault(seat, decision.value)
                    continue
                segments[seat].append(Transition(
                    policy_input=decision.policy_input,
                    action=decision.action,
                    log_prob=decision.log_prob,
                    value=decision.value,
                    reward=step.rewards[seat].total,
                    done=step.done,
                ))
                recorded += 1
            observations = step.observations
            if recorded >= count:
                break

        if not env.done:
            for seat in learners:
                if seat not in bootstrap and segments[seat]:
                    next_input = build_policy_input(observations[seat], frozen.shape)
                    bootstrap[seat] = forward(next_input, frozen, config.flags).value.item()
        for seat in learners:
            buffer.add_segment(segments[seat], bootstrap.get(seat, 0.0))

        if env.done:
            result = env.result()
            buffer.episodes.append(EpisodeStats(
                agreed=result.agreed,
                rounds=result.rounds,
                utilities=result.utilities,
                objective=system_objective(result.outcome, result.utilities, result.rounds,
                                           scenario.total_budget, scenario.reservations, config.objective),
                illegal_actions=result.illegal_actions,
                num_agents=scenario.num_agents,
            ))

    logger.debug("Rollouts collected", steps=recorded, episodes=len(buffer.episodes), stage=stage.index)
    return buffer
