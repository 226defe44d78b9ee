"""Generalized advantage estimation."""
from typing import Sequence, Tuple

import numpy as np


def compute_gae(rewards: Sequence[float], values: Sequence[float], dones: Sequence[bool],
                gamma: float = 0.99, lam: float = 0.95,
                last_value: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Backward GAE recursion over a flat sequence of steps.

    dones[t] marks the last step of an episode segment; the value after it is
    taken as 0. last_value bootstraps a trailing segment cut off mid-episode.

    Returns:
        (advantages, returns) with returns = advantages + values
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    if not (len(rewards) == len(values) == len(dones)):
        raise ValueError(
            f"Length mismatch: {len(rewards)} rewards, {len(values)} values, {len(dones)} done flags"
        )
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")

    advantages = np.zeros_like(rewards)
    running = 0.0
    next_value = float(last_value)
    for t in range(len(rewards) - 1, -1, -1):
        if dones[t]:
            next_value = 0.0
            running = 0.0
        delta = rewards[t] + gamma * next_value - values[t]
        running = delta + gamma * lam * running
        advantages[t] = running
        next_value = values[t]
    return advantages, advantages + values
