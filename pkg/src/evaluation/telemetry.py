"""
Prometheus metrics for training and evaluation runs.
"""
from pathlib import Path
from typing import Union

import psutil
from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile


METRICS_REGISTRY = CollectorRegistry()


EPISODES = Counter('diplomat_episodes_total', 'Negotiation episodes played', registry=METRICS_REGISTRY)
AGREEMENTS = Counter('diplomat_agreements_total', 'Episodes ending in agreement', registry=METRICS_REGISTRY)
ILLEGAL_ACTIONS = Counter(
'diplomat_illegal_actions_total', 'Illegal actions replaced by Pass', registry=METRICS_REGISTRY
)
NUMERIC_FAULTS = Counter('diplomat_numeric_faults_total', 'PPO updates rolled back', registry=METRICS_REGISTRY)


PPO_UPDATES = Counter('diplomat_ppo_updates_total', 'Completed PPO updates', registry=METRICS_REGISTRY)
CURRICULUM_STAGE = Gauge('diplomat_curriculum_stage', 'Current curriculum stage', registry=METRICS_REGISTRY)
CONSENSUS_RATE = Gauge('diplomat_consensus_rate', 'Consensus rate of the last iteration', registry=METRICS_REGISTRY)
EPISODE_ROUNDS = Histogram(
'diplomat_episode_rounds', 'Rounds used per episode', buckets=(1, 2, 4, 8, 12, 16, 24, 32),
registry=METRICS_REGISTRY
)
PROCESS_RSS = Gauge('diplomat_process_resident_bytes', 'Resident memory of the training process', registry=METRICS_REGISTRY)


def record_episode(agreed: bool, rounds: int, illegal_actions: int) -> None:
    EPISODES.inc()
    if agreed:
        AGREEMENTS.inc()
    if illegal_actions:
        ILLEGAL_ACTIONS.inc(illegal_actions)
    EPISODE_ROUNDS.observe(rounds)


def record_process() -> float:
    """Update the resident-memory gauge; returns megabytes"""
    rss = psutil.Process().memory_info().rss
    PROCESS_RSS.set(rss)
    return rss / 2**20


def write_metrics(path: Union[str, Path]) -> None:
    """Text exposition format, written atomically"""
    write_to_textfile(str(path), METRICS_REGISTRY)
