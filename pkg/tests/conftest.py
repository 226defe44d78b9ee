"""Shared fixtures and scenario builders."""
import numpy as np
import pytest
import structlog

from src.arena.domain import DEFAULT_BUDGETS, Issue, PreferenceProfile, Scenario, make_grid
from src.evaluation import telemetry
from src.logging_setup import configure_logging


def make_scenario(weights, valuations, reservations=None, budgets=DEFAULT_BUDGETS, seed=0) -> Scenario:
    """Scenario from per-agent weights and valuation rows"""
    num_agents = len(weights)
    reservations = reservations or [0.0] * num_agents
    counts = [len(row) for row in valuations[0]]
    return Scenario(
        num_agents=num_agents,
        issues=tuple(Issue(id=m, num_values=n) for m, n in enumerate(counts)),
        profiles=tuple(
            PreferenceProfile(agent_id=i, weights=tuple(weights[i]), valuations=tuple(map(tuple, valuations[i])),
                              reservation=reservations[i])
            for i in range(num_agents)
        ),
        round_budgets=tuple(budgets),
        seed=seed,
    )


def opposed_scenario(num_values=5, reservations=(0.0, 0.0), budgets=DEFAULT_BUDGETS, seed=0) -> Scenario:
    """Two agents on one issue with reversed linear valuations"""
    grid = make_grid(num_values)
    return make_scenario([[1.0], [1.0]], [[grid], [tuple(reversed(grid))]], list(reservations), budgets, seed)


def identical_scenario(num_agents=2, num_values=3, budgets=DEFAULT_BUDGETS) -> Scenario:
    grid = make_grid(num_values)
    return make_scenario([[1.0]] * num_agents, [[grid]] * num_agents, None, budgets)


@pytest.fixture
def opposed():
    return opposed_scenario()


@pytest.fixture
def two_issue_scenario():
    """2 agents, 2 issues x 3 values"""
    return make_scenario(
        [[0.6, 0.4], [0.3, 0.7]],
        [[(0.0, 0.5, 1.0), (1.0, 0.5, 0.0)], [(1.0, 0.5, 0.0), (0.0, 0.5, 1.0)]],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def metrics_registry():
    return telemetry.METRICS_REGISTRY


@pytest.fixture(autouse=True)
def structured_logging(monkeypatch):
    """Fresh structlog configuration per test, writing to stderr"""
    monkeypatch.delenv("DIPLOMAT_LOG_LEVEL", raising=False)
    structlog.reset_defaults()
    configure_logging()
    yield
    structlog.reset_defaults()
