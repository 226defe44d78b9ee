"""Scenario documents: JSON read/write with a versioned schema string."""
import json
from pathlib import Path
from typing import Any, Dict, Union

import structlog

from src.errors import ScenarioError

from .domain import Issue, PreferenceProfile, Scenario, SEED_MASK

logger = structlog.get_logger()

SCENARIO_FORMAT = "diplomat-scenario/1"


def scenario_to_dict(scenario: Scenario) -> Dict[str, Any]:
    return {
        'format': SCENARIO_FORMAT,
        'num_agents': scenario.num_agents,
        'issues': [
            {'id': issue.id, 'num_values': issue.num_values, 'value_grid': list(issue.value_grid)}
            for issue in scenario.issues
        ],
        'profiles': [
            {
                'agent_id': p.agent_id,
                'weights': list(p.weights),
                'valuations': [list(row) for row in p.valuations],
                'reservation': p.reservation,
            }
            for p in scenario.profiles
        ],
        'round_budgets': list(scenario.round_budgets),
        'seed': scenario.seed & SEED_MASK,
    }


def scenario_from_dict(data: Dict[str, Any]) -> Scenario:
    """Build a Scenario from a decoded document, validating the schema string"""
    fmt = data.get('format')
    if fmt != SCENARIO_FORMAT:
        raise ScenarioError(f"Unsupported scenario format {fmt!r}, expected {SCENARIO_FORMAT!r}")
    try:
        issues = tuple(
            Issue(id=int(item['id']), num_values=int(item['num_values']),
                  value_grid=tuple(float(v) for v in item.get('value_grid', ())))
            for item in data['issues']
        )
        profiles = tuple(
            PreferenceProfile(
                agent_id=int(item['agent_id']),
                weights=tuple(item['weights']),
                valuations=tuple(tuple(row) for row in item['valuations']),
                reservation=float(item['reservation']),
            )
            for item in data['profiles']
        )
        return Scenario(
            num_agents=int(data['num_agents']),
            issues=issues,
            profiles=profiles,
            round_budgets=tuple(data.get('round_budgets', (1, 2, 4, 2, 3))),
            seed=int(data.get('seed', 0)),
        )
    except KeyError as e:
        raise ScenarioError(f"Scenario document missing field {e}") from e
    except (TypeError, ValueError) as e:
        if isinstance(e, ScenarioError):
            raise
        raise ScenarioError(f"Malformed scenario document: {e}") from e


def save_scenario(scenario: Scenario, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(scenario_to_dict(scenario), f, indent=2)
    logger.info("Scenario saved", path=str(path), agents=scenario.num_agents, issues=scenario.num_issues)


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    return scenario_from_dict(data)
