"""
Fairness and welfare metrics over per-agent utilities.
"""
from typing import Sequence

import numpy as np

from src.errors import DomainError


def gini(utilities: Sequence[float]) -> float:
    """
    Gini coefficient of a utility vector.

    G = sum_i sum_j |u_i - u_j| / (2 n^2 mean). 0 is perfect equality;
    all-zero (or empty) input yields 0.

    Args:
        utilities: Nonnegative utilities, one per agent

    Returns:
        Gini coefficient in [0, 1)
    """
    u = np.asarray(utilities, dtype=float)
    if u.size == 0:
        return 0.0
    if np.any(u < 0):
        raise DomainError(f"Gini is undefined for negative utilities: {u.min()!r}")
    mean = u.mean()
    if mean <= 0.0:
        return 0.0
    n = u.size
    return float(np.abs(u[:, None] - u[None, :]).sum() / (2.0 * n * n * mean))


def social_welfare(utilities: Sequence[float]) -> float:
    """Mean utility across agents"""
    u = np.asarray(utilities, dtype=float)
    return float(u.mean()) if u.size else 0.0
