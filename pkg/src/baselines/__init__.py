"""Rule-based negotiators used as comparison entrants and training exploiters."""

from .alternating import AlternatingOffersAgent
from .conceder import ConcederAgent, conceder_policy, conceder_target
from .random_agent import RandomAgent, random_policy

__all__ = [
    'AlternatingOffersAgent',
    'ConcederAgent',
    'RandomAgent',
    'conceder_policy',
    'conceder_target',
    'random_policy',
]
