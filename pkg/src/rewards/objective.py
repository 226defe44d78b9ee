"""System objective: total utility plus consensus quality minus time."""
from dataclasses import asdict, dataclass
from typing import Sequence, Union

from src.arena.protocol import Agreement, Outcome, _Ongoing
from src.evaluation.fairness import gini


@dataclass(frozen=True)
class ObjectiveWeights:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 0.5

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise ValueError(f"Objective weight {name} must be nonnegative, got {value}")


def consensus_score(utilities: Sequence[float], reservations: Sequence[float]) -> float:
    """Satisfied fraction times (1 - Gini)"""
    satisfied = sum(1 for u, r in zip(utilities, reservations) if u >= r)
    return satisfied / len(utilities) * (1.0 - gini(utilities))


def system_objective(result: Union[Outcome, _Ongoing], utilities: Sequence[float], rounds: int,
                     total_budget: int, reservations: Sequence[float],
                     weights: ObjectiveWeights = ObjectiveWeights()) -> float:
    """
    J = alpha * sum(U) + beta * Consensus - gamma * Time.

    On anything but Agreement every agent is credited its reservation and
    Consensus is 0.

    Args:
        result: Episode outcome
        utilities: Final utility per agent
        rounds: Rounds used
        total_budget: Total round budget of the scenario
        reservations: Reservation value per agent
        weights: Objective weights

    Returns:
        Scalar objective J
    """
    if isinstance(result, Agreement):
        values = list(utilities)
        consensus = consensus_score(values, reservations)
    else:
        values = list(reservations)
        consensus = 0.0
    time = rounds / total_budget
    return weights.alpha * sum(values) + weights.beta * consensus - weights.gamma * time
