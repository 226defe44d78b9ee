"""
Ablation and scalability sweeps.

Each variant (or agent count) trains into its own run directory under the
sweep root and is then evaluated in self-play. A run directory that already
holds a finished run is resumed, so re-running a sweep only evaluates.
"""
import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import structlog

from src.arena.domain import MAX_AGENTS, GeneratorConfig
from src.arena.env import EnvConfig
from src.baselines.registry import AgentFactory, AgentSpec
from src.errors import ConfigError, UnknownFlagError
from src.policy.hcn import ArchitectureFlags
from src.policy.params import HcnParams
from src.training.curriculum import Curriculum, CurriculumStage
from src.training.pool import OpponentPool
from src.training.rollouts import CollectionConfig
from src.training.trainer import Trainer

from .harness import MetricsSummary, evaluate
from .reports import write_report

logger = structlog.get_logger()

FULL = "full"
VARIANT_FLAGS = ("no-hierarchy", "no-attention", "no-shaping", "no-pnp")
SELF_PLAY = (AgentSpec("hcn"),)


@dataclass(frozen=True)
class Variant:
    name: str
    flags: ArchitectureFlags
    train_env: EnvConfig
    eval_env: EnvConfig


def _base_env(settings) -> EnvConfig:
    return EnvConfig(reward_weights=settings.rewards.weights, shaping=settings.rewards.shaping,
                     beliefs=settings.rewards.beliefs)


def make_variant(name: str, settings) -> Variant:
    """Architecture flags and env configs for one ablation variant"""
    env = _base_env(settings)
    if name == FULL:
        return Variant(name, ArchitectureFlags(), env, env)
    if name == "no-hierarchy":
        return Variant(name, ArchitectureFlags(hierarchy=False), env, env)
    if name == "no-attention":
        return Variant(name, ArchitectureFlags(attention=False), env, env)
    if name == "no-shaping":
        unshaped = dataclasses.replace(env, reward_weights=env.reward_weights.without_shaping())
        return Variant(name, ArchitectureFlags(), unshaped, env)
    if name == "no-pnp":
        open_env = dataclasses.replace(env, open_protocol=True)
        return Variant(name, ArchitectureFlags(), open_env, open_env)
    raise UnknownFlagError(f"Unknown ablation flag '{name}', expected one of {', '.join(VARIANT_FLAGS)}")


def parse_flags(text: Union[str, Sequence[str]]) -> list:
    names = [f.strip().lower() for f in (text.split(',') if isinstance(text, str) else text) if f.strip()]
    for name in names:
        if name not in VARIANT_FLAGS:
            raise UnknownFlagError(f"Unknown ablation flag '{name}', expected one of {', '.join(VARIANT_FLAGS)}")
    return list(dict.fromkeys(names))


def _train(trainer: Trainer) -> HcnParams:
    trainer.resume()
    trainer.run()
    return trainer.params


def _evaluate_self_play(settings, params: HcnParams, flags: ArchitectureFlags, stage: CurriculumStage,
                        env: EnvConfig, run_dir: Path, label: str, workers: int) -> MetricsSummary:
    factory = AgentFactory(flags=flags, params=params.frozen())
    summary, records = evaluate(factory, SELF_PLAY, stage.scenario, settings.evaluation.episodes,
                                settings.evaluation.seeds, env_config=env, objective=settings.objective,
                                label=label, workers=workers)
    write_report(summary, records, run_dir, name="evaluation")
    return summary


def ablate(settings, flags: Optional[Sequence[str]] = None, run_root: Optional[Union[str, Path]] = None,
           workers: int = 1) -> Dict[str, MetricsSummary]:
    """
    Train and evaluate the full system plus one variant per flag.

    Every variant uses the same seed, curriculum and step budget; evaluation
    runs on the configured evaluation stage.
    """
    names = parse_flags(flags if flags is not None else settings.ablation.flags)
    run_root = Path(run_root or Path(settings.output_dir) / "ablation")
    eval_stage = settings.curriculum.build().stages[settings.evaluation.stage - 1]

    summaries: Dict[str, MetricsSummary] = {}
    for name in [FULL] + names:
        variant = make_variant(name, settings)
        run_dir = run_root / name
        logger.info("Ablation variant started", variant=name, run_dir=str(run_dir))
        trainer = Trainer.from_settings(settings, run_dir, flags=variant.flags, env=variant.train_env,
                                        workers=workers)
        params = _train(trainer)
        summaries[name] = _evaluate_self_play(settings, params, variant.flags, eval_stage, variant.eval_env,
                                              run_dir, name, workers)

    full = summaries[FULL]
    for name in names:
        delta = summaries[name].consensus_rate - full.consensus_rate
        summaries[name].extra['consensus_delta'] = delta
        logger.info("Ablation variant compared", variant=name, consensus_rate=round(summaries[name].consensus_rate, 4),
                    full=round(full.consensus_rate, 4), delta=round(delta, 4))
    return summaries


def scaling_stage(num_agents: int) -> CurriculumStage:
    return CurriculumStage(1, f"{num_agents} agents single-issue",
                           GeneratorConfig(agents=(num_agents, num_agents), issues=(1, 1), values=(5, 5)))


def scalability_sweep(settings, agent_counts: Optional[Sequence[int]] = None,
                      run_root: Optional[Union[str, Path]] = None, workers: int = 1) -> Dict[int, MetricsSummary]:
    """Train and evaluate one single-stage run per agent count"""
    counts = [int(n) for n in (agent_counts if agent_counts is not None else settings.ablation.sweep_agents)]
    for n in counts:
        if not 2 <= n <= MAX_AGENTS:
            raise ConfigError(f"agent count {n} outside 2..{MAX_AGENTS}", field="ablation.sweep_agents")
    run_root = Path(run_root or Path(settings.output_dir) / "scalability")
    env = _base_env(settings)
    flags = ArchitectureFlags()

    summaries: Dict[int, MetricsSummary] = {}
    for n in counts:
        run_dir = run_root / f"n{n:02d}"
        stage = scaling_stage(n)
        shape = dataclasses.replace(settings.policy, max_agents=max(n, settings.policy.max_agents))
        trainer = Trainer(
            run_dir=run_dir,
            ppo=settings.ppo,
            curriculum=Curriculum(stages=[stage], rule=settings.curriculum.rule),
            params=HcnParams.initialize(shape, seed=settings.seed),
            pool=OpponentPool(settings.pool, run_dir / "pool"),
            collection=CollectionConfig(env=env, flags=flags, objective=settings.objective,
                                        exploiter_beta=settings.training.exploiter_beta),
            seed=settings.seed,
            iterations=settings.training.iterations,
            total_steps=settings.training.total_steps,
            checkpoint_every=settings.training.checkpoint_every,
            workers=workers,
        )
        logger.info("Scalability run started", num_agents=n, run_dir=str(run_dir))
        params = _train(trainer)
        summary = _evaluate_self_play(settings, params, flags, stage, env, run_dir, f"N={n}", workers)
        summary.num_agents = n
        summaries[n] = summary
    return summaries
