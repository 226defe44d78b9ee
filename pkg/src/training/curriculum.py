"""
Five-stage curriculum: bilateral single issue up to randomized multi-party
negotiation with rule-based exploiter seats.
"""
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
import structlog

from src.arena.domain import DEFAULT_BUDGETS, GeneratorConfig, Scenario, random_scenario
from src.errors import ConfigError

logger = structlog.get_logger()

NUM_STAGES = 5


@dataclass(frozen=True)
class PromotionRule:
    metric: str = "consensus_rate"
    threshold: float = 0.85
    window: int = 20

    def __post_init__(self):
        if self.window < 1:
            raise ConfigError("Promotion window must be at least 1", field="curriculum.rule.window")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError("Promotion threshold must lie in [0, 1]", field="curriculum.rule.threshold")


@dataclass(frozen=True)
class CurriculumStage:
    index: int
    name: str
    generator: GeneratorConfig
    # alternative scenario kinds drawn per episode (domain randomization)
    kinds: Tuple[str, ...] = ()
    exploiter_share: float = 0.0

    def scenario(self, seed: int) -> Scenario:
        config = self.generator
        if self.kinds:
            kind = self.kinds[int(seed) % len(self.kinds)]
            config = replace(config, kind=kind)
        return random_scenario(config, seed)


def default_stages() -> List[CurriculumStage]:
    return [
        CurriculumStage(1, "bilateral single-issue",
                        GeneratorConfig(agents=(2, 2), issues=(1, 1), values=(5, 5))),
        CurriculumStage(2, "bilateral multi-issue",
                        GeneratorConfig(agents=(2, 2), issues=(3, 3), values=(3, 5))),
        CurriculumStage(3, "multi-party single-issue",
                        GeneratorConfig(agents=(4, 4), issues=(1, 1), values=(5, 5))),
        CurriculumStage(4, "multi-party multi-issue",
                        GeneratorConfig(agents=(4, 4), issues=(3, 3), values=(3, 5))),
        CurriculumStage(5, "adversarial randomized",
                        GeneratorConfig(agents=(2, 6), issues=(1, 4), values=(2, 6), reservation_range=(0.0, 0.5),
                                        round_budgets=DEFAULT_BUDGETS, budget_jitter=1, complementary_prob=0.3),
                        kinds=("generic", "resource_allocation"), exploiter_share=0.25),
    ]


def curriculum_advance(history: Sequence[float], stage: int, rule: PromotionRule = PromotionRule(),
                       num_stages: int = NUM_STAGES) -> int:
    """
    Next stage index given the per-iteration metric history of the current
    stage. Promotion needs a full window whose mean reaches the threshold;
    the last stage is terminal.
    """
    if stage >= num_stages or len(history) < rule.window:
        return stage
    if float(np.mean(history[-rule.window:])) >= rule.threshold:
        return stage + 1
    return stage


@dataclass
class Curriculum:
    stages: List[CurriculumStage] = field(default_factory=default_stages)
    rule: PromotionRule = field(default_factory=PromotionRule)
    stage: int = 1
    history: List[float] = field(default_factory=list)

    def __post_init__(self):
        if [s.index for s in self.stages] != list(range(1, len(self.stages) + 1)):
            raise ConfigError("Curriculum stages must be numbered 1..n in order", field="curriculum.stages")
        if not 1 <= self.stage <= len(self.stages):
            raise ConfigError(f"Stage {self.stage} outside 1..{len(self.stages)}", field="curriculum.stage")

    @property
    def current(self) -> CurriculumStage:
        return self.stages[self.stage - 1]

    def record(self, value: float) -> bool:
        """Add one iteration's metric; returns True when the stage advanced"""
        self.history.append(float(value))
        next_stage = curriculum_advance(self.history, self.stage, self.rule, len(self.stages))
        if next_stage == self.stage:
            return False
        logger.info("Curriculum stage promoted", previous=self.stage, stage=next_stage,
                    window_mean=float(np.mean(self.history[-self.rule.window:])))
        self.stage = next_stage
        self.history = []
        return True

    def state_dict(self) -> Dict[str, Any]:
        return {'stage': self.stage, 'history': list(self.history)}

    def load_state(self, data: Dict[str, Any]) -> None:
        self.stage = int(data.get('stage', 1))
        self.history = [float(x) for x in data.get('history', [])]
