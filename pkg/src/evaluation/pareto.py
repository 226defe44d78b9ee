"""
Exact Pareto front of a scenario's deal space.
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from src.arena.domain import ENUMERATION_LIMIT, Deal, Scenario, deal_array, utility_table
from src.errors import OracleRefusedError


@dataclass(frozen=True)
class ParetoFront:
    deals: Tuple[Deal, ...]
    utilities: np.ndarray  # (len(deals), N)

    def __len__(self) -> int:
        return len(self.deals)

    def __contains__(self, deal: object) -> bool:
        return tuple(deal) in set(self.deals)


def _enumerate(scenario: Scenario, limit: int) -> Tuple[np.ndarray, np.ndarray]:
    if scenario.deal_count > limit:
        raise OracleRefusedError(scenario.deal_count, limit)
    deals = deal_array(scenario, limit)
    return deals, utility_table(scenario, deals)


def dominates(a: np.ndarray, b: np.ndarray) -> bool:
    """a weakly better for everyone and strictly better for someone"""
    return bool(np.all(a >= b) and np.any(a > b))


def pareto_front(scenario: Scenario, limit: int = ENUMERATION_LIMIT) -> ParetoFront:
    """
    Undominated deals, in lexicographic deal order.

    Candidates are visited by decreasing utility sum with lexicographically
    larger utility vectors first, so any dominator of a deal is visited
    before it and only the front found so far has to be checked.
    """
    deals, table = _enumerate(scenario, limit)
    keys = [-table[:, k] for k in range(table.shape[1] - 1, -1, -1)] + [-table.sum(axis=1)]
    order = np.lexsort(keys)
    kept = []
    front = np.empty((0, table.shape[1]))
    for index in order:
        u = table[index]
        if front.shape[0]:
            dominated = np.all(front >= u, axis=1) & np.any(front > u, axis=1)
            if dominated.any():
                continue
        kept.append(int(index))
        front = np.vstack([front, u])
    kept.sort()
    return ParetoFront(tuple(tuple(int(v) for v in deals[i]) for i in kept), table[kept])


def pareto_front_naive(scenario: Scenario, limit: int = 10**4) -> ParetoFront:
    """Reference double loop over all deal pairs"""
    deals, table = _enumerate(scenario, limit)
    kept = [i for i in range(len(deals))
            if not any(dominates(table[j], table[i]) for j in range(len(deals)) if j != i)]
    return ParetoFront(tuple(tuple(int(v) for v in deals[i]) for i in kept), table[kept])


def is_pareto_optimal(scenario: Scenario, deal: Sequence[int], front: Optional[ParetoFront] = None,
                      limit: int = ENUMERATION_LIMIT) -> bool:
    """True when no deal dominates `deal`; one vectorized pass unless a front is given"""
    deal = tuple(int(v) for v in deal)
    if front is not None:
        return deal in front
    _, table = _enumerate(scenario, limit)
    u = utility_table(scenario, np.array([deal]))[0]
    return not bool(np.any(np.all(table >= u, axis=1) & np.any(table > u, axis=1)))
