"""
Bayesian opponent-preference model.

Each observer keeps, for every opponent and issue, a categorical posterior
over weight buckets and a posterior over valuation direction
(increasing, decreasing). Messages are treated as good-faith evidence.
"""
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from src.arena.domain import Deal
from src.arena.protocol import Accept, Argue, Counteroffer, Direction, Message, Propose, Reject, Reveal

INCREASING, DECREASING = 0, 1


@dataclass(frozen=True)
class BeliefConfig:
    num_buckets: int = 3
    reveal_noise: float = 0.1
    acceptance_slope: float = 5.0
    argue_gain: float = 0.4


@dataclass(frozen=True)
class BeliefState:
    """One observer's posteriors about every other agent.

    buckets has shape (N, M, B) and directions shape (N, M, 2); the
    observer's own row stays uniform and is never updated.
    """
    observer: int
    buckets: np.ndarray
    directions: np.ndarray
    grids: Tuple[Tuple[float, ...], ...]

    @property
    def num_agents(self) -> int:
        return self.buckets.shape[0]

    @property
    def num_issues(self) -> int:
        return self.buckets.shape[1]

    @property
    def num_buckets(self) -> int:
        return self.buckets.shape[2]

    def copy(self) -> 'BeliefState':
        return BeliefState(self.observer, self.buckets.copy(), self.directions.copy(), self.grids)


def uniform_belief(observer: int, num_agents: int, grids: Sequence[Sequence[float]],
                   num_buckets: int = 3) -> BeliefState:
    num_issues = len(grids)
    return BeliefState(
        observer=observer,
        buckets=np.full((num_agents, num_issues, num_buckets), 1.0 / num_buckets),
        directions=np.full((num_agents, num_issues, 2), 0.5),
        grids=tuple(tuple(float(v) for v in grid) for grid in grids),
    )


def weight_bucket(weight: float, num_issues: int, num_buckets: int) -> int:
    """Coarse bucket of an issue weight relative to the uniform weight 1/M"""
    relative = weight * num_issues
    return min(num_buckets - 1, int(math.floor(relative * num_buckets / 2.0)))


def bucket_centers(num_issues: int, num_buckets: int) -> np.ndarray:
    """Representative issue weight of each bucket"""
    return (2.0 * np.arange(num_buckets) + 1.0) / (num_buckets * num_issues)


def expected_raw_weights(belief: BeliefState, opponent: int) -> np.ndarray:
    centers = bucket_centers(belief.num_issues, belief.num_buckets)
    return belief.buckets[opponent] @ centers


def expected_weights(belief: BeliefState, opponent: int) -> np.ndarray:
    raw = expected_raw_weights(belief, opponent)
    return raw / raw.sum()


def _valuation(grid: Sequence[float], index: int, direction: int) -> float:
    value = grid[index]
    return value if direction == INCREASING else 1.0 - value


def expected_valuations(belief: BeliefState, opponent: int, deal: Sequence[int]) -> np.ndarray:
    """Direction-marginalized valuation of each issue's selected value"""
    out = np.empty(belief.num_issues)
    for m, index in enumerate(deal):
        p_inc = belief.directions[opponent, m, INCREASING]
        value = belief.grids[m][index]
        out[m] = p_inc * value + (1.0 - p_inc) * (1.0 - value)
    return out


def estimated_utility(belief: BeliefState, opponent: int, deal: Sequence[int]) -> float:
    """Utility of a deal for an opponent, expected under the current posteriors"""
    return float(expected_weights(belief, opponent) @ expected_valuations(belief, opponent, deal))


def estimated_welfare(belief: BeliefState, own_utility: float, deal: Sequence[int]) -> float:
    """Own utility plus belief-expected utilities of every opponent"""
    total = own_utility
    for j in range(belief.num_agents):
        if j != belief.observer:
            total += estimated_utility(belief, j, deal)
    return total


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def _normalize(posterior: np.ndarray, prior: np.ndarray) -> np.ndarray:
    total = posterior.sum()
    if not total > 0.0 or not math.isfinite(total):
        return prior
    return posterior / total


def _acceptance_likelihoods(belief: BeliefState, opponent: int, deal: Deal, accepted: bool,
                            config: BeliefConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Likelihood of the response for every bucket and every direction, per issue"""
    num_issues, num_buckets = belief.num_issues, belief.num_buckets
    centers = bucket_centers(num_issues, num_buckets)
    raw = expected_raw_weights(belief, opponent)
    values = expected_valuations(belief, opponent, deal)
    weights = raw / raw.sum()

    bucket_lik = np.empty((num_issues, num_buckets))
    direction_lik = np.empty((num_issues, 2))
    for m in range(num_issues):
        rest_weight = raw.sum() - raw[m]
        rest_value = raw @ values - raw[m] * values[m]
        u_hat = (centers * values[m] + rest_value) / (centers + rest_weight)
        bucket_lik[m] = _sigmoid(config.acceptance_slope * (u_hat - 0.5))

        base = weights @ values - weights[m] * values[m]
        value_inc = _valuation(belief.grids[m], deal[m], INCREASING)
        value_dec = _valuation(belief.grids[m], deal[m], DECREASING)
        u_dir = base + weights[m] * np.array([value_inc, value_dec])
        direction_lik[m] = _sigmoid(config.acceptance_slope * (u_dir - 0.5))
    if not accepted:
        bucket_lik = 1.0 - bucket_lik
        direction_lik = 1.0 - direction_lik
    return bucket_lik, direction_lik


def update_belief(belief: BeliefState, message: Optional[Message], issuer: int,
                  deal: Optional[Deal] = None, config: BeliefConfig = BeliefConfig()) -> BeliefState:
    """Posterior after observing one message from `issuer`.

    Accept/Reject carry the referenced deal in `deal`. Proposals count as the
    author's acceptance of their own deal. Pass, and messages from the
    observer itself, leave the belief unchanged.
    """
    if message is None or issuer == belief.observer:
        return belief

    updated = belief.copy()
    if isinstance(message, Reveal):
        m, b = message.issue_id, message.bucket
        lik = np.full(belief.num_buckets, config.reveal_noise / max(1, belief.num_buckets - 1))
        lik[b] = 1.0 - config.reveal_noise
        prior = belief.buckets[issuer, m]
        updated.buckets[issuer, m] = _normalize(prior * lik, prior)
    elif isinstance(message, Argue):
        m = message.issue_id
        toward = 0.5 + config.argue_gain * message.strength
        lik = np.array([toward, 1.0 - toward])
        if message.direction is Direction.LOWER:
            lik = lik[::-1]
        prior = belief.directions[issuer, m]
        updated.directions[issuer, m] = _normalize(prior * lik, prior)
    elif isinstance(message, (Accept, Reject, Propose, Counteroffer)):
        if isinstance(message, (Propose, Counteroffer)):
            deal = message.deal
        if deal is None:
            return belief
        accepted = not isinstance(message, Reject)
        bucket_lik, direction_lik = _acceptance_likelihoods(belief, issuer, tuple(deal), accepted, config)
        for m in range(belief.num_issues):
            prior = belief.buckets[issuer, m]
            updated.buckets[issuer, m] = _normalize(prior * bucket_lik[m], prior)
            prior_dir = belief.directions[issuer, m]
            updated.directions[issuer, m] = _normalize(prior_dir * direction_lik[m], prior_dir)
    else:
        return belief
    return updated


def categorical_entropy(p: np.ndarray) -> float:
    """Shannon entropy in nats of the last axis, summed over leading axes"""
    p = np.asarray(p, dtype=float)
    safe = np.where(p > 0.0, p, 1.0)
    return float(-(p * np.log(safe)).sum())


def belief_entropy(belief: BeliefState) -> float:
    return categorical_entropy(belief.buckets) + categorical_entropy(belief.directions)


def intrinsic_reward(before: BeliefState, after: BeliefState) -> float:
    """Information gained between two beliefs, clipped below at zero"""
    if before.buckets.shape != after.buckets.shape or before.directions.shape != after.directions.shape:
        raise ValueError("Belief states must have the same shape")
    if before.buckets is after.buckets and before.directions is after.directions:
        return 0.0
    gain = belief_entropy(before) - belief_entropy(after)
    return max(0.0, gain)


def summary_block(belief: BeliefState, opponent: int) -> np.ndarray:
    """Flattened bucket posteriors (M·B) of one opponent"""
    return belief.buckets[opponent].reshape(-1).copy()
