"""
Context-aware reward shaping.

Every step an agent receives outcome, process, social and intrinsic
components; the total is their weighted sum.
"""
from dataclasses import asdict, dataclass, replace
from typing import Dict, Tuple, Union

from src.arena.domain import PreferenceProfile, utility
from src.arena.protocol import Agreement, Outcome, Phase, _Ongoing


@dataclass(frozen=True)
class RewardWeights:
    """Weights of the outcome, process, social and intrinsic terms"""
    outcome: float = 1.0
    process: float = 0.1
    social: float = 0.1
    intrinsic: float = 0.05

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise ValueError(f"Reward weight {name} must be nonnegative, got {value}")

    def without_shaping(self) -> 'RewardWeights':
        return replace(self, process=0.0, social=0.0, intrinsic=0.0)


@dataclass(frozen=True)
class ShapingConfig:
    time_cost: float = 0.01
    improvement_bonus: float = 0.05
    social_bonus: float = 0.1
    illegal_penalty: float = 0.1
    # per-phase multiplier on the time cost, Convergence last
    phase_time_multipliers: Tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 2.0)

    def time_cost_in(self, phase: Phase) -> float:
        return self.time_cost * self.phase_time_multipliers[int(phase)]


@dataclass(frozen=True)
class StepContext:
    """What happened to one agent during one round"""
    phase: Phase
    illegal: bool = False
    improved_welfare: bool = False
    has_standing: bool = False
    accepted_by: int = 0
    num_agents: int = 2


@dataclass(frozen=True)
class RewardBreakdown:
    outcome: float
    process: float
    social: float
    intrinsic: float
    total: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def outcome_reward(profile: PreferenceProfile, result: Union[Outcome, _Ongoing]) -> float:
    """Normalized surplus over the reservation on Agreement, 0 otherwise"""
    if not isinstance(result, Agreement):
        return 0.0
    reservation = profile.reservation
    value = (utility(profile, result.deal) - reservation) / (1.0 - reservation)
    return min(1.0, max(-1.0, value))


def process_reward(context: StepContext, config: ShapingConfig = ShapingConfig()) -> float:
    reward = -config.time_cost_in(context.phase)
    if context.improved_welfare:
        reward += config.improvement_bonus
    if context.illegal:
        reward -= config.illegal_penalty
    return reward


def social_reward(context: StepContext, config: ShapingConfig = ShapingConfig()) -> float:
    if not context.has_standing or context.num_agents < 2:
        return 0.0
    return config.social_bonus * context.accepted_by / (context.num_agents - 1)


def total_reward(outcome: float, process: float, social: float, intrinsic: float,
                 weights: RewardWeights = RewardWeights()) -> RewardBreakdown:
    total = (weights.outcome * outcome
             + weights.process * process
             + weights.social * social
             + weights.intrinsic * intrinsic)
    return RewardBreakdown(outcome=outcome, process=process, social=social, intrinsic=intrinsic, total=total)
