"""
Negotiation instances: issues, deals, private additive utilities and a
seeded scenario generator.
"""
import itertools
import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from src.errors import EnumerationRefusedError, InvalidDealError, ScenarioError

logger = structlog.get_logger()

MAX_VALUES = 64
MAX_AGENTS = 50
ENUMERATION_LIMIT = 10**6
SEED_MASK = (1 << 64) - 1
DEFAULT_BUDGETS = (1, 2, 4, 2, 3)
WEIGHT_TOLERANCE = 1e-9

# A deal is one grid index per issue.
Deal = Tuple[int, ...]


def make_grid(num_values: int) -> Tuple[float, ...]:
    """Evenly spaced grid on [0, 1] with exact endpoints"""
    return tuple(float(x) for x in np.linspace(0.0, 1.0, num_values))


@dataclass(frozen=True)
class Issue:
    """One decision variable discretized onto an even grid"""
    id: int
    num_values: int
    value_grid: Tuple[float, ...] = ()

    def __post_init__(self):
        if not 2 <= self.num_values <= MAX_VALUES:
            raise ScenarioError(f"Issue {self.id}: num_values must be in [2, {MAX_VALUES}], got {self.num_values}")
        if not self.value_grid:
            object.__setattr__(self, 'value_grid', make_grid(self.num_values))
        grid = self.value_grid
        if len(grid) != self.num_values:
            raise ScenarioError(f"Issue {self.id}: grid has {len(grid)} entries, expected {self.num_values}")
        if grid[0] != 0.0 or grid[-1] != 1.0:
            raise ScenarioError(f"Issue {self.id}: grid must start at 0 and end at 1")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ScenarioError(f"Issue {self.id}: grid must be strictly increasing")


@dataclass(frozen=True)
class PreferenceProfile:
    """Private additive utility of one agent"""
    agent_id: int
    weights: Tuple[float, ...]
    valuations: Tuple[Tuple[float, ...], ...]
    reservation: float

    def __post_init__(self):
        object.__setattr__(self, 'weights', tuple(float(w) for w in self.weights))
        object.__setattr__(self, 'valuations', tuple(tuple(float(v) for v in row) for row in self.valuations))
        object.__setattr__(self, 'reservation', float(self.reservation))

        if any(w < 0 or not math.isfinite(w) for w in self.weights):
            raise ScenarioError(f"Agent {self.agent_id}: weights must be finite and nonnegative")
        if abs(sum(self.weights) - 1.0) > WEIGHT_TOLERANCE:
            raise ScenarioError(f"Agent {self.agent_id}: weights sum to {sum(self.weights)!r}, expected 1")
        if len(self.valuations) != len(self.weights):
            raise ScenarioError(f"Agent {self.agent_id}: {len(self.valuations)} valuation rows for {len(self.weights)} weights")
        for m, row in enumerate(self.valuations):
            if any(not 0.0 <= v <= 1.0 for v in row):
                raise ScenarioError(f"Agent {self.agent_id}: valuations on issue {m} must lie in [0, 1]")
        if not 0.0 <= self.reservation < 1.0:
            raise ScenarioError(f"Agent {self.agent_id}: reservation must lie in [0, 1), got {self.reservation}")

    @property
    def num_issues(self) -> int:
        return len(self.weights)

    def increasing(self, issue: int) -> bool:
        """True when the agent prefers higher grid values on this issue"""
        row = self.valuations[issue]
        return row[-1] >= row[0]


@dataclass(frozen=True)
class Scenario:
    """A complete negotiation instance"""
    num_agents: int
    issues: Tuple[Issue, ...]
    profiles: Tuple[PreferenceProfile, ...]
    round_budgets: Tuple[int, ...] = DEFAULT_BUDGETS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'issues', tuple(self.issues))
        object.__setattr__(self, 'profiles', tuple(self.profiles))
        object.__setattr__(self, 'round_budgets', tuple(int(b) for b in self.round_budgets))
        object.__setattr__(self, 'seed', int(self.seed) & SEED_MASK)

        if not 2 <= self.num_agents <= MAX_AGENTS:
            raise ScenarioError(f"num_agents must be in [2, {MAX_AGENTS}], got {self.num_agents}")
        if not self.issues:
            raise ScenarioError("A scenario needs at least one issue")
        if [issue.id for issue in self.issues] != list(range(len(self.issues))):
            raise ScenarioError("Issue ids must be 0..M-1 in order")
        if len(self.profiles) != self.num_agents:
            raise ScenarioError(f"Expected {self.num_agents} profiles, got {len(self.profiles)}")
        if [p.agent_id for p in self.profiles] != list(range(self.num_agents)):
            raise ScenarioError("Exactly one profile per agent, ordered by agent id")
        for profile in self.profiles:
            if profile.num_issues != len(self.issues):
                raise ScenarioError(f"Agent {profile.agent_id}: profile covers {profile.num_issues} issues, scenario has {len(self.issues)}")
            for issue, row in zip(self.issues, profile.valuations):
                if len(row) != issue.num_values:
                    raise ScenarioError(f"Agent {profile.agent_id}: issue {issue.id} needs {issue.num_values} valuations, got {len(row)}")
        if len(self.round_budgets) != 5 or any(b < 0 for b in self.round_budgets):
            raise ScenarioError("round_budgets must be five nonnegative integers")
        if sum(self.round_budgets) < 1:
            raise ScenarioError("Total round budget must be at least 1")

    @property
    def num_issues(self) -> int:
        return len(self.issues)

    @property
    def value_counts(self) -> Tuple[int, ...]:
        return tuple(issue.num_values for issue in self.issues)

    @property
    def total_budget(self) -> int:
        return sum(self.round_budgets)

    @property
    def deal_count(self) -> int:
        return math.prod(self.value_counts)

    @property
    def reservations(self) -> Tuple[float, ...]:
        return tuple(p.reservation for p in self.profiles)


def validate_deal(value_counts: Sequence[int], deal: Sequence[int]) -> Deal:
    """Return the deal as a tuple, raising InvalidDealError when out of range"""
    if len(deal) != len(value_counts):
        raise InvalidDealError(f"Deal has {len(deal)} indices for {len(value_counts)} issues")
    for m, (index, count) in enumerate(zip(deal, value_counts)):
        if not 0 <= int(index) < count:
            raise InvalidDealError(f"Index {index} out of range for issue {m} with {count} values")
    return tuple(int(i) for i in deal)


def utility(profile: PreferenceProfile, deal: Sequence[int]) -> float:
    """Additive utility: sum of weight times valuation of the selected value"""
    validate_deal([len(row) for row in profile.valuations], deal)
    total = 0.0
    for weight, row, index in zip(profile.weights, profile.valuations, deal):
        total += weight * row[index]
    return total


def enumerate_deals(scenario: Scenario, limit: int = ENUMERATION_LIMIT) -> Iterator[Deal]:
    """Yield every deal once in lexicographic index order"""
    cardinality = scenario.deal_count
    if cardinality > limit:
        raise EnumerationRefusedError(cardinality, limit)
    return itertools.product(*(range(n) for n in scenario.value_counts))


def deal_array(scenario: Scenario, limit: int = ENUMERATION_LIMIT) -> np.ndarray:
    """All deals as an integer array of shape (D, M), lexicographic rows"""
    cardinality = scenario.deal_count
    if cardinality > limit:
        raise EnumerationRefusedError(cardinality, limit)
    grids = np.meshgrid(*(np.arange(n) for n in scenario.value_counts), indexing='ij')
    return np.stack([g.reshape(-1) for g in grids], axis=1)


def utility_table(scenario: Scenario, deals: np.ndarray) -> np.ndarray:
    """Utilities of every agent for every deal row, shape (D, N).

    Accumulates issue by issue in the same order as utility(), so entries are
    bitwise equal to the scalar version.
    """
    table = np.zeros((deals.shape[0], scenario.num_agents))
    for i, profile in enumerate(scenario.profiles):
        column = np.zeros(deals.shape[0])
        for m, (weight, row) in enumerate(zip(profile.weights, profile.valuations)):
            column = column + weight * np.asarray(row)[deals[:, m]]
        table[:, i] = column
    return table


def best_deal_for(profile: PreferenceProfile) -> Deal:
    """Own-best deal: per-issue argmax of valuations (lowest index on ties)"""
    return tuple(int(np.argmax(row)) for row in profile.valuations)


def welfare_optimal_deal(scenario: Scenario) -> Deal:
    """Utilitarian optimum by per-issue greedy choice.

    Additivity makes the joint argmax decompose issue by issue.
    """
    deal = []
    for m, issue in enumerate(scenario.issues):
        scores = np.zeros(issue.num_values)
        for profile in scenario.profiles:
            scores = scores + profile.weights[m] * np.asarray(profile.valuations[m])
        deal.append(int(np.argmax(scores)))
    return tuple(deal)


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters of the seeded scenario generator.

    Ranges are inclusive (lo, hi) pairs; equal bounds fix the value.
    """
    agents: Tuple[int, int] = (2, 2)
    issues: Tuple[int, int] = (1, 1)
    values: Tuple[int, int] = (5, 5)
    concentration: float = 1.0
    opposed_prob: float = 0.5
    reservation_range: Tuple[float, float] = (0.0, 0.4)
    round_budgets: Tuple[int, ...] = DEFAULT_BUDGETS
    budget_jitter: int = 0
    kind: str = "generic"
    complementary_prob: float = 0.0

    def __post_init__(self):
        for name in ('agents', 'issues', 'values', 'reservation_range'):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ScenarioError(f"Generator range {name} has lo > hi")
        if self.agents[0] < 2 or self.agents[1] > MAX_AGENTS:
            raise ScenarioError(f"Generator agents must lie in [2, {MAX_AGENTS}]")
        if self.issues[0] < 1:
            raise ScenarioError("Generator needs at least one issue")
        if self.values[0] < 2 or self.values[1] > MAX_VALUES:
            raise ScenarioError(f"Generator values must lie in [2, {MAX_VALUES}]")
        if self.concentration <= 0:
            raise ScenarioError("Weight concentration must be positive")
        if not 0.0 <= self.opposed_prob <= 1.0 or not 0.0 <= self.complementary_prob <= 1.0:
            raise ScenarioError("Probabilities must lie in [0, 1]")
        if self.reservation_range[0] < 0 or self.reservation_range[1] >= 1:
            raise ScenarioError("Reservation range must lie in [0, 1)")
        if self.kind not in ("generic", "resource_allocation"):
            raise ScenarioError(f"Unknown scenario kind '{self.kind}'")


def _monotone_row(rng: np.random.Generator, num_values: int, increasing: bool, concave: bool = False) -> Tuple[float, ...]:
    if concave:
        row = np.sqrt(np.linspace(0.0, 1.0, num_values))
    else:
        inner = np.sort(rng.uniform(0.0, 1.0, size=num_values - 2))
        row = np.concatenate([[0.0], inner, [1.0]])
    if not increasing:
        row = row[::-1]
    return tuple(float(v) for v in row)


def _draw_budgets(rng: np.random.Generator, config: GeneratorConfig) -> Tuple[int, ...]:
    budgets = list(config.round_budgets)
    if config.budget_jitter > 0:
        jitter = rng.integers(-config.budget_jitter, config.budget_jitter + 1, size=len(budgets))
        budgets = [max(0, b + int(j)) for b, j in zip(budgets, jitter)]
        # proposals need at least one round to be possible
        budgets[2] = max(1, budgets[2])
    return tuple(budgets)


def random_scenario(config: GeneratorConfig, seed: int) -> Scenario:
    """Draw a scenario deterministically from (config, seed)"""
    seed = int(seed) & SEED_MASK
    rng = np.random.default_rng(seed)

    num_agents = int(rng.integers(config.agents[0], config.agents[1] + 1))
    num_issues = int(rng.integers(config.issues[0], config.issues[1] + 1))
    counts = [int(rng.integers(config.values[0], config.values[1] + 1)) for _ in range(num_issues)]

    weights = []
    for _ in range(num_agents):
        w = rng.dirichlet(np.full(num_issues, config.concentration))
        w = w / w.sum()
        weights.append(tuple(float(x) for x in w))

    rows: List[List[Tuple[float, ...]]] = [[] for _ in range(num_agents)]
    for m, count in enumerate(counts):
        if config.kind == "resource_allocation":
            claimant = m % num_agents
            complementary = rng.random() < config.complementary_prob
            directions = [complementary or i == claimant for i in range(num_agents)]
            concave = True
        else:
            if rng.random() < config.opposed_prob:
                order = rng.permutation(num_agents)
                half = (num_agents + 1) // 2
                directions = [False] * num_agents
                for i in order[:half]:
                    directions[int(i)] = True
            else:
                common = bool(rng.random() < 0.5)
                directions = [common] * num_agents
            concave = False
        for i in range(num_agents):
            rows[i].append(_monotone_row(rng, count, directions[i], concave))

    lo, hi = config.reservation_range
    reservations = [float(rng.uniform(lo, hi)) if hi > lo else float(lo) for _ in range(num_agents)]
    budgets = _draw_budgets(rng, config)

    profiles = tuple(
        PreferenceProfile(agent_id=i, weights=weights[i], valuations=tuple(rows[i]), reservation=reservations[i])
        for i in range(num_agents)
    )
    issues = tuple(Issue(id=m, num_values=count) for m, count in enumerate(counts))
    scenario = Scenario(num_agents=num_agents, issues=issues, profiles=profiles, round_budgets=budgets, seed=seed)
    logger.debug("Scenario generated", seed=seed, agents=num_agents, issues=num_issues, kind=config.kind)
    return scenario


def profile_with(profile: PreferenceProfile, *, weights: Optional[Sequence[float]] = None,
                 reservation: Optional[float] = None) -> PreferenceProfile:
    """Copy of a profile with some fields replaced"""
    return PreferenceProfile(
        agent_id=profile.agent_id,
        weights=tuple(weights) if weights is not None else profile.weights,
        valuations=profile.valuations,
        reservation=profile.reservation if reservation is None else reservation,
    )


def scenario_with_profiles(scenario: Scenario, profiles: Sequence[PreferenceProfile]) -> Scenario:
    return Scenario(num_agents=scenario.num_agents, issues=scenario.issues, profiles=tuple(profiles),
                    round_budgets=scenario.round_budgets, seed=scenario.seed)
