"""
Agent actions and their translation into protocol messages.

A policy emits a move tag plus a concession scalar; concrete deals are
found by target-utility search unless the action carries one explicitly.
"""
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from src.rewards.beliefs import BeliefState, expected_weights, weight_bucket

from .domain import Deal, PreferenceProfile, best_deal_for
from .protocol import (
    Accept, Argue, Counteroffer, Direction, Message, MoveTag, NEEDS_DEAL, Pass, Propose, ProtocolState,
    Reject, Reveal, is_legal, legal_moves,
)

logger = structlog.get_logger()

DEAL_SEARCH_LIMIT = 10**5
MASKED_LOGIT = -1e9


@dataclass(frozen=True)
class AgentAction:
    """
    One agent's choice for a round.

    deal, direction, strength and bucket are optional overrides; when left
    unset they are derived from the concession and the agent's own profile.
    sketch and raw_concession record the sampled policy components so that
    log-probabilities can be recomputed.
    """
    tag: MoveTag
    concession: float = 0.5
    deal: Optional[Deal] = None
    issue: int = 0
    direction: Optional[Direction] = None
    strength: Optional[float] = None
    bucket: Optional[int] = None
    sketch: Optional[Tuple[int, ...]] = None
    raw_concession: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.concession <= 1.0:
            raise ValueError(f"Concession must lie in [0, 1], got {self.concession}")


PASS_ACTION = AgentAction(tag=MoveTag.PASS)

# Rule-based agents may return a decision function; the env calls it with the
# state at application time, after the moves of lower ids in the same round.
DeferredAction = Callable[[ProtocolState], AgentAction]
RoundAction = Union[AgentAction, DeferredAction]


def resolve_action(action: RoundAction, state: ProtocolState) -> AgentAction:
    if isinstance(action, AgentAction):
        return action
    return action(state)


def target_utility(concession: float, reservation: float) -> float:
    """Aspiration level 1 - c * (1 - reservation)"""
    return 1.0 - concession * (1.0 - reservation)


def masked_choice(logits: np.ndarray, mask: Sequence[bool], rng: Optional[np.random.Generator] = None) -> int:
    """Argmax (rng None) or sample of a categorical restricted to the mask"""
    mask_arr = np.asarray(mask, dtype=bool)
    if not mask_arr.any():
        raise ValueError("At least one entry must be legal")
    masked = np.where(mask_arr, np.asarray(logits, dtype=float), MASKED_LOGIT)
    if rng is None:
        return int(np.argmax(masked))
    shifted = np.exp(masked - masked.max())
    shifted[~mask_arr] = 0.0
    probs = shifted / shifted.sum()
    return int(rng.choice(len(probs), p=probs))


def own_utilities(profile: PreferenceProfile, deals: np.ndarray) -> np.ndarray:
    column = np.zeros(deals.shape[0])
    for m, (weight, row) in enumerate(zip(profile.weights, profile.valuations)):
        column = column + weight * np.asarray(row)[deals[:, m]]
    return column


def _opponent_value_tables(belief: Optional[BeliefState]) -> Sequence[Tuple[np.ndarray, Sequence[np.ndarray]]]:
    """Per opponent: expected weights and per-issue expected valuation rows"""
    if belief is None:
        return []
    tables = []
    for j in range(belief.num_agents):
        if j == belief.observer:
            continue
        rows = []
        for m, grid in enumerate(belief.grids):
            p_inc = belief.directions[j, m, 0]
            g = np.asarray(grid)
            rows.append(p_inc * g + (1.0 - p_inc) * (1.0 - g))
        tables.append((expected_weights(belief, j), rows))
    return tables


def _opponent_welfare(tables, deals: np.ndarray) -> np.ndarray:
    if not tables:
        return np.zeros(deals.shape[0])
    total = np.zeros(deals.shape[0])
    for weights, rows in tables:
        for m, row in enumerate(rows):
            total = total + weights[m] * row[deals[:, m]]
    return total / len(tables)


def search_deal(profile: PreferenceProfile, value_counts: Sequence[int], target: float,
                belief: Optional[BeliefState] = None, sketch: Optional[Sequence[int]] = None,
                limit: int = DEAL_SEARCH_LIMIT) -> Deal:
    """
    Deal maximizing estimated opponent welfare with own utility >= target.

    Exhaustive for spaces up to `limit` deals (ties go to the lowest
    lexicographic deal); above that a per-issue greedy relaxation starts
    from the sketch (when it meets the target) or the own-best deal.

    Args:
        profile: The proposer's preferences
        value_counts: Grid sizes per issue
        target: Minimum own utility
        belief: Proposer's beliefs about opponents, or None
        sketch: Optional per-issue starting point for the greedy search
        limit: Exhaustive-search cutoff

    Returns:
        The selected deal
    """
    tables = _opponent_value_tables(belief)
    count = int(np.prod(value_counts))
    if count <= limit:
        deals = deal_array_for(value_counts)
        own = own_utilities(profile, deals)
        feasible = own >= target
        if not feasible.any():
            return best_deal_for(profile)
        welfare = np.where(feasible, _opponent_welfare(tables, deals), -np.inf)
        return tuple(int(i) for i in deals[int(np.argmax(welfare))])
    return _greedy_search(profile, value_counts, target, tables, sketch)


def deal_array_for(value_counts: Sequence[int]) -> np.ndarray:
    grids = np.meshgrid(*(np.arange(n) for n in value_counts), indexing='ij')
    return np.stack([g.reshape(-1) for g in grids], axis=1)


def _greedy_search(profile: PreferenceProfile, value_counts: Sequence[int], target: float,
                   tables, sketch: Optional[Sequence[int]]) -> Deal:
    current = list(best_deal_for(profile))
    if sketch is not None and len(sketch) == len(value_counts):
        candidate = [min(int(v), n - 1) for v, n in zip(sketch, value_counts)]
        if own_utilities(profile, np.array([candidate]))[0] >= target:
            current = candidate

    def score(deal) -> Tuple[float, float]:
        arr = np.array([deal])
        return own_utilities(profile, arr)[0], _opponent_welfare(tables, arr)[0]

    _, welfare = score(current)
    improved = True
    while improved:
        improved = False
        best_move = None
        best_welfare = welfare
        for m, n in enumerate(value_counts):
            for v in range(n):
                if v == current[m]:
                    continue
                trial = current.copy()
                trial[m] = v
                own, trial_welfare = score(trial)
                if own >= target and trial_welfare > best_welfare:
                    best_move, best_welfare = (m, v), trial_welfare
        if best_move is not None:
            current[best_move[0]] = best_move[1]
            welfare = best_welfare
            improved = True
    return tuple(current)


def decode_action(action: AgentAction, state: ProtocolState, agent: int, profile: PreferenceProfile,
                  belief: Optional[BeliefState] = None) -> Tuple[Message, bool]:
    """
    Concrete message for an action at application time.

    Returns (message, illegal). Illegal actions are replaced by Pass.
    """
    legal = legal_moves(state, agent)
    num_issues = len(state.value_counts)
    tag = action.tag
    msg: Message
    if tag not in legal:
        return Pass(), True

    if tag in NEEDS_DEAL:
        deal = action.deal
        if deal is None:
            target = target_utility(action.concession, profile.reservation)
            deal = search_deal(profile, state.value_counts, target, belief, action.sketch)
        msg = Propose(deal=tuple(deal)) if tag is MoveTag.PROPOSE else Counteroffer(proposal_id=legal.target, deal=tuple(deal))
    elif tag is MoveTag.ACCEPT:
        msg = Accept(proposal_id=legal.target)
    elif tag is MoveTag.REJECT:
        msg = Reject(proposal_id=legal.target)
    elif tag is MoveTag.ARGUE:
        if not 0 <= action.issue < num_issues:
            return Pass(), True
        direction = action.direction
        if direction is None:
            direction = Direction.RAISE if profile.increasing(action.issue) else Direction.LOWER
        strength = action.strength if action.strength is not None else 1.0 - action.concession
        msg = Argue(issue_id=action.issue, direction=direction, strength=float(strength))
    elif tag is MoveTag.REVEAL:
        if not 0 <= action.issue < num_issues:
            return Pass(), True
        bucket = action.bucket
        if bucket is None:
            bucket = weight_bucket(profile.weights[action.issue], num_issues, state.num_buckets)
        msg = Reveal(issue_id=action.issue, bucket=bucket)
    else:
        msg = Pass()

    if not is_legal(state, agent, msg):
        logger.debug("Illegal action replaced by Pass", agent=agent, tag=tag.label, phase=state.phase.label)
        return Pass(), True
    return msg, False
