"""
Evaluation harness: plays seeded episodes for an agent line-up and reduces
them to the reporting metrics.
"""
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from src.arena.domain import Scenario
from src.arena.env import EnvConfig, NegotiationEnv, run_episode
from src.baselines.registry import AgentFactory, AgentSpec
from src.rewards.objective import ObjectiveWeights, system_objective

from . import telemetry
from .fairness import gini, social_welfare
from .pareto import is_pareto_optimal

logger = structlog.get_logger()

# largest deal space the harness checks against the exact front
PARETO_CHECK_LIMIT = 10**5

ScenarioSource = Callable[[int], Scenario]


@dataclass
class EpisodeRecord:
    episode_id: int
    seed: int
    num_agents: int
    num_issues: int
    outcome: str
    rounds: int
    utilities: Tuple[float, ...]
    objective: float
    pareto: Optional[bool] = None
    wall_seconds: float = 0.0
    illegal_actions: int = 0

    @property
    def agreed(self) -> bool:
        return self.outcome == "Agreement"


@dataclass
class MetricsSummary:
    label: str = ""
    episodes: int = 0
    seeds: Tuple[int, ...] = ()
    consensus_rate: float = 0.0
    mean_rounds: float = 0.0
    social_welfare: float = 0.0
    gini: float = 0.0
    pareto_rate: Optional[float] = None
    mean_J: float = 0.0
    mean_seconds: float = 0.0
    num_agents: Optional[int] = None
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['seeds'] = list(self.seeds)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MetricsSummary':
        values = dict(data)
        values['seeds'] = tuple(values.get('seeds', ()))
        return cls(**values)


def summarize(records: Sequence[EpisodeRecord], label: str = "", seeds: Sequence[int] = (),
              num_agents: Optional[int] = None) -> MetricsSummary:
    """Aggregate per-episode records in episode order"""
    if not records:
        return MetricsSummary(label=label, seeds=tuple(seeds), num_agents=num_agents)
    checked = [r.pareto for r in records if r.agreed and r.pareto is not None]
    return MetricsSummary(
        label=label,
        episodes=len(records),
        seeds=tuple(seeds),
        consensus_rate=float(np.mean([r.agreed for r in records])),
        mean_rounds=float(np.mean([r.rounds for r in records])),
        social_welfare=float(np.mean([social_welfare(r.utilities) for r in records])),
        gini=float(np.mean([gini(r.utilities) for r in records])),
        pareto_rate=float(np.mean(checked)) if checked else None,
        mean_J=float(np.mean([r.objective for r in records])),
        mean_seconds=float(np.mean([r.wall_seconds for r in records])),
        num_agents=num_agents,
    )


def aggregate_over_seeds(summaries: Sequence[MetricsSummary]) -> Dict[str, Tuple[float, float]]:
    """Mean and standard deviation of each metric across per-seed summaries"""
    metrics = ('consensus_rate', 'mean_rounds', 'social_welfare', 'gini', 'pareto_rate', 'mean_J', 'mean_seconds')
    result = {}
    for name in metrics:
        values = [getattr(s, name) for s in summaries if getattr(s, name) is not None]
        if values:
            result[name] = (float(np.mean(values)), float(np.std(values)))
    return result


def episode_seed(seed: int, episode: int) -> int:
    return int(np.random.default_rng([int(seed), int(episode)]).integers(2**63))


def play_episode(factory: AgentFactory, specs: Sequence[AgentSpec], scenario: Scenario, episode_id: int,
                 seed: int, env_config: Optional[EnvConfig] = None,
                 objective: ObjectiveWeights = ObjectiveWeights()) -> Tuple[EpisodeRecord, Any]:
    """One seeded episode; returns the record and the finished env result"""
    env = NegotiationEnv(env_config)
    agents = factory.lineup(specs, scenario.num_agents, scenario.seed)
    started = time.perf_counter()
    result = run_episode(env, scenario, agents)
    elapsed = time.perf_counter() - started

    pareto = None
    if result.agreed and scenario.deal_count <= PARETO_CHECK_LIMIT:
        pareto = is_pareto_optimal(scenario, result.outcome.deal, limit=PARETO_CHECK_LIMIT)
    record = EpisodeRecord(
        episode_id=episode_id,
        seed=seed,
        num_agents=scenario.num_agents,
        num_issues=scenario.num_issues,
        outcome=type(result.outcome).__name__,
        rounds=result.rounds,
        utilities=tuple(float(u) for u in result.utilities),
        objective=system_objective(result.outcome, result.utilities, result.rounds, scenario.total_budget,
                                   scenario.reservations, objective),
        pareto=pareto,
        wall_seconds=elapsed,
        illegal_actions=result.illegal_actions,
    )
    return record, result


def _evaluate_seed(factory: AgentFactory, specs: Sequence[AgentSpec], source: ScenarioSource, episodes: int,
                   seed: int, first_id: int, env_config: Optional[EnvConfig],
                   objective: ObjectiveWeights) -> List[EpisodeRecord]:
    records = []
    for k in range(episodes):
        scenario = source(episode_seed(seed, k))
        record, _ = play_episode(factory, specs, scenario, first_id + k, seed, env_config, objective)
        records.append(record)
    return records


def evaluate(factory: AgentFactory, specs: Sequence[AgentSpec], source: ScenarioSource, episodes: int,
             seeds: Sequence[int] = (0,), env_config: Optional[EnvConfig] = None,
             objective: ObjectiveWeights = ObjectiveWeights(), label: str = "",
             workers: int = 1) -> Tuple[MetricsSummary, List[EpisodeRecord]]:
    """
    Play `episodes` episodes per seed and aggregate them.

    Seeds may be spread over worker processes; records are always ordered by
    (seed position, episode index), so the summary does not depend on the
    worker count apart from wall-clock time.
    """
    if episodes < 1:
        raise ValueError(f"episodes must be at least 1, got {episodes}")
    seeds = [int(s) for s in seeds]
    jobs = [(factory, specs, source, episodes, s, i * episodes, env_config, objective) for i, s in enumerate(seeds)]
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            chunks = list(executor.map(_evaluate_seed, *zip(*jobs)))
    else:
        chunks = [_evaluate_seed(*job) for job in jobs]
    records = [r for chunk in chunks for r in chunk]
    for r in records:
        telemetry.record_episode(r.agreed, r.rounds, r.illegal_actions)

    num_agents = records[0].num_agents if len({r.num_agents for r in records}) == 1 else None
    summary = summarize(records, label=label, seeds=seeds, num_agents=num_agents)
    logger.info("Evaluation finished", label=label, episodes=len(records),
                consensus_rate=round(summary.consensus_rate, 4), mean_rounds=round(summary.mean_rounds, 3),
                social_welfare=round(summary.social_welfare, 4))
    return summary, records


def per_seed_summaries(records: Sequence[EpisodeRecord], label: str = "") -> List[MetricsSummary]:
    seeds = list(dict.fromkeys(r.seed for r in records))
    return [summarize([r for r in records if r.seed == s], label=label, seeds=(s,)) for s in seeds]
