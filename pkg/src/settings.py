"""
Run configuration.

One file (JSON or YAML) with a section per subsystem. Every section maps
onto a dataclass whose defaults are the documented defaults; unknown keys
and badly typed values raise ConfigError naming the dotted field and, when
known, the line.
"""
import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union, get_args, get_origin, get_type_hints

import structlog
import yaml

from src.arena.domain import GeneratorConfig
from src.errors import ConfigError
from src.policy.params import PolicyShape
from src.rewards.beliefs import BeliefConfig
from src.rewards.objective import ObjectiveWeights
from src.rewards.shaping import RewardWeights, ShapingConfig
from src.training.curriculum import Curriculum, PromotionRule, default_stages
from src.training.pool import PoolConfig
from src.training.ppo import PpoConfig

logger = structlog.get_logger()


@dataclass
class RewardsSettings:
    weights: RewardWeights = field(default_factory=RewardWeights)
    shaping: ShapingConfig = field(default_factory=ShapingConfig)
    beliefs: BeliefConfig = field(default_factory=BeliefConfig)


@dataclass
class CurriculumSettings:
    start_stage: int = 1
    rule: PromotionRule = field(default_factory=PromotionRule)
    # generator overrides for stages 1..k, in order
    stages: Tuple[GeneratorConfig, ...] = ()

    def build(self) -> Curriculum:
        stages = default_stages()
        if len(self.stages) > len(stages):
            raise ConfigError(f"{len(self.stages)} stage overrides for {len(stages)} stages", field="curriculum.stages")
        for i, generator in enumerate(self.stages):
            stages[i] = dataclasses.replace(stages[i], generator=generator, kinds=())
        return Curriculum(stages=stages, rule=self.rule, stage=self.start_stage)


@dataclass
class TrainingSettings:
    iterations: int = 200
    total_steps: Optional[int] = None
    checkpoint_every: int = 10
    workers: int = 1
    exploiter_beta: float = 0.3

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be at least 1", field="training.iterations")
        if self.checkpoint_every < 1:
            raise ConfigError("checkpoint_every must be at least 1", field="training.checkpoint_every")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1", field="training.workers")


@dataclass
class EvaluationSettings:
    episodes: int = 100
    seeds: Tuple[int, ...] = (0,)
    stage: int = 1
    agents: str = "random"
    baseline: Optional[str] = None

    def __post_init__(self):
        if self.episodes < 1:
            raise ConfigError("episodes must be at least 1", field="evaluation.episodes")
        if not self.seeds:
            raise ConfigError("at least one seed is needed", field="evaluation.seeds")


@dataclass
class BaselineSettings:
    betas: Tuple[float, ...] = (0.5, 2.0)


@dataclass
class AblationSettings:
    flags: Tuple[str, ...] = ()
    sweep_agents: Tuple[int, ...] = (2, 4, 8)


@dataclass
class LoggingSettings:
    level: str = "INFO"


@dataclass
class Settings:
    seed: int = 0
    output_dir: str = "runs"
    ppo: PpoConfig = field(default_factory=PpoConfig)
    rewards: RewardsSettings = field(default_factory=RewardsSettings)
    objective: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    curriculum: CurriculumSettings = field(default_factory=CurriculumSettings)
    pool: PoolConfig = field(default_factory=PoolConfig)
    policy: PolicyShape = field(default_factory=PolicyShape)
    training: TrainingSettings = field(default_factory=TrainingSettings)
    evaluation: EvaluationSettings = field(default_factory=EvaluationSettings)
    baselines: BaselineSettings = field(default_factory=BaselineSettings)
    ablation: AblationSettings = field(default_factory=AblationSettings)
    logging: LoggingSettings = field(default_factory=LoggingSettings)

    def to_dict(self) -> Dict[str, Any]:
        return _plain(dataclasses.asdict(self))


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


# ---------- loading ----------

def _line_index(node: Any, prefix: str = "", index: Optional[Dict[str, int]] = None) -> Dict[str, int]:
    """Dotted key path -> 1-based line of the key in the source"""
    index = {} if index is None else index
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
            index[path] = key_node.start_mark.line + 1
            _line_index(value_node, path, index)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            path = f"{prefix}[{i}]"
            index[path] = item.start_mark.line + 1
            _line_index(item, path, index)
    return index


def _fail(message: str, path: str, lines: Dict[str, int]) -> ConfigError:
    return ConfigError(message, field=path or None, line=lines.get(path))


def _convert(value: Any, hint: Any, path: str, lines: Dict[str, int]) -> Any:
    origin = get_origin(hint)
    args = get_args(hint)
    if origin is Union:
        options = [a for a in args if a is not type(None)]
        if value is None and type(None) in args:
            return None
        return _convert(value, options[0], path, lines)
    if dataclasses.is_dataclass(hint):
        return _build(hint, value, path, lines)
    if origin in (tuple, Tuple):
        if not isinstance(value, (list, tuple)):
            raise _fail(f"expected a list, got {type(value).__name__}", path, lines)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_convert(v, args[0], f"{path}[{i}]", lines) for i, v in enumerate(value))
        if len(value) != len(args):
            raise _fail(f"expected {len(args)} entries, got {len(value)}", path, lines)
        return tuple(_convert(v, a, f"{path}[{i}]", lines) for i, (v, a) in enumerate(zip(value, args)))
    if hint is bool:
        if not isinstance(value, bool):
            raise _fail(f"expected true/false, got {value!r}", path, lines)
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise _fail(f"expected an integer, got {value!r}", path, lines)
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise _fail(f"expected a number, got {value!r}", path, lines)
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise _fail(f"expected a string, got {value!r}", path, lines)
        return value
    return value


def _build(cls: Any, data: Any, path: str, lines: Dict[str, int]) -> Any:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise _fail(f"expected a mapping, got {type(data).__name__}", path, lines)
    hints = get_type_hints(cls)
    known = {f.name for f in dataclasses.fields(cls) if f.init}
    for key in data:
        if key not in known:
            child = f"{path}.{key}" if path else str(key)
            raise _fail(f"unknown key '{key}'", child, lines)
    kwargs = {}
    for name, value in data.items():
        child = f"{path}.{name}" if path else name
        kwargs[name] = _convert(value, hints[name], child, lines)
    try:
        return cls(**kwargs)
    except ConfigError as e:
        if e.line is None and e.field is not None:
            raise ConfigError(e.message, field=e.field, line=lines.get(e.field)) from e
        raise
    except (TypeError, ValueError) as e:
        raise _fail(str(e), path, lines) from e


def parse_settings(text: str, source: str = "<config>") -> Settings:
    try:
        lines = _line_index(yaml.compose(text)) if text.strip() else {}
        data = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"{source}: {getattr(e, 'problem', None) or e}", line=line) from e
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    return _build(Settings, data, "", lines)


def apply_env(settings: Settings) -> Settings:
    """DIPLOMAT_OUT, DIPLOMAT_LOG_LEVEL and DIPLOMAT_WORKERS override the file"""
    out = os.getenv("DIPLOMAT_OUT")
    if out:
        settings.output_dir = out
    level = os.getenv("DIPLOMAT_LOG_LEVEL")
    if level:
        settings.logging.level = level.upper()
    workers = os.getenv("DIPLOMAT_WORKERS")
    if workers:
        try:
            count = int(workers)
            if count < 1:
                raise ValueError
        except ValueError:
            raise ConfigError(f"DIPLOMAT_WORKERS must be a positive integer, got '{workers}'",
                              field="DIPLOMAT_WORKERS") from None
        settings.training.workers = count
    return settings


def load_settings(path: Optional[Union[str, Path]] = None) -> Settings:
    """Settings from a file (defaults when path is None) with env overrides applied"""
    if path is None:
        return apply_env(Settings())
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    settings = parse_settings(text, source=str(path))
    logger.debug("Configuration loaded", path=str(path), seed=settings.seed)
    return apply_env(settings)
