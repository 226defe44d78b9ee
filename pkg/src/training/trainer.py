"""
Curriculum self-play training loop.

Each iteration collects rollouts for the current stage, runs one PPO update,
appends one JSON line to train_log.jsonl, may promote the curriculum and
snapshot the policy into the opponent pool. The run directory holds
everything needed to resume.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import structlog

from src.arena.env import EnvConfig
from src.errors import CheckpointError, NumericFaultError
from src.evaluation import telemetry
from src.numerics.adam import AdamState
from src.numerics.checkpoint import load_checkpoint, save_checkpoint
from src.policy.hcn import ArchitectureFlags
from src.policy.params import HcnParams

from .buffer import RolloutBuffer
from .curriculum import Curriculum
from .pool import OpponentPool
from .ppo import PpoConfig, PpoStats, ppo_update
from .rollouts import CollectionConfig
from .workers import RolloutWorkers

logger = structlog.get_logger()

TRAIN_LOG = "train_log.jsonl"
POLICY_FILE = "policy.ddck"
OPTIMIZER_FILE = "optimizer.ddck"
STATE_FILE = "state.json"
MAX_CONSECUTIVE_FAULTS = 3


@dataclass
class IterationRecord:
    iteration: int
    stage: int
    steps: int
    episodes: int
    consensus_rate: float
    mean_objective: float
    mean_welfare: float
    illegal_actions: int
    ppo: PpoStats

    def to_dict(self) -> Dict[str, Any]:
        record = {
            'iteration': self.iteration,
            'stage': self.stage,
            'steps': self.steps,
            'episodes': self.episodes,
            'consensus_rate': self.consensus_rate,
            'mean_J': self.mean_objective,
            'mean_welfare': self.mean_welfare,
            'illegal_actions': self.illegal_actions,
        }
        record.update(self.ppo.to_dict())
        return record


@dataclass
class TrainingResult:
    run_dir: Path
    iterations: int
    total_steps: int
    final_stage: int
    records: List[IterationRecord] = field(default_factory=list)

    @property
    def policy_path(self) -> Path:
        return self.run_dir / POLICY_FILE


def summarize_buffer(buffer: RolloutBuffer):
    """(consensus rate, mean J, mean welfare, illegal actions) over finished episodes"""
    episodes = buffer.episodes
    if not episodes:
        return 0.0, 0.0, 0.0, 0
    consensus = float(np.mean([e.agreed for e in episodes]))
    objective = float(np.mean([e.objective for e in episodes]))
    welfare = float(np.mean([np.mean(e.utilities) for e in episodes]))
    illegal = int(sum(e.illegal_actions for e in episodes))
    return consensus, objective, welfare, illegal


class Trainer:
    def __init__(self, run_dir: Union[str, Path], ppo: PpoConfig, curriculum: Curriculum, params: HcnParams,
                 pool: Optional[OpponentPool] = None, collection: Optional[CollectionConfig] = None,
                 seed: int = 0, iterations: int = 200, total_steps: Optional[int] = None,
                 checkpoint_every: int = 10, workers: int = 1, metrics_file: Optional[Path] = None):
        self.run_dir = Path(run_dir)
        self.ppo = ppo
        self.curriculum = curriculum
        self.params = params
        self.pool = pool if pool is not None else OpponentPool(directory=self.run_dir / "pool")
        self.collection = collection or CollectionConfig()
        self.seed = int(seed)
        self.iterations = iterations
        self.total_steps = total_steps
        self.checkpoint_every = checkpoint_every
        self.workers = workers
        self.metrics_file = metrics_file
        self.optimizer = AdamState(lr=ppo.learning_rate)
        self.iteration = 0
        self.steps_done = 0
        self._faults = 0

    @classmethod
    def from_settings(cls, settings, run_dir: Union[str, Path], flags: ArchitectureFlags = ArchitectureFlags(),
                      env: Optional[EnvConfig] = None, workers: Optional[int] = None,
                      metrics_file: Optional[Path] = None) -> 'Trainer':
        run_dir = Path(run_dir)
        if env is None:
            env = EnvConfig(reward_weights=settings.rewards.weights, shaping=settings.rewards.shaping,
                            beliefs=settings.rewards.beliefs)
        collection = CollectionConfig(env=env, flags=flags, objective=settings.objective,
                                      exploiter_beta=settings.training.exploiter_beta)
        return cls(
            run_dir=run_dir,
            ppo=settings.ppo,
            curriculum=settings.curriculum.build(),
            params=HcnParams.initialize(settings.policy, seed=settings.seed),
            pool=OpponentPool(settings.pool, run_dir / "pool"),
            collection=collection,
            seed=settings.seed,
            iterations=settings.training.iterations,
            total_steps=settings.training.total_steps,
            checkpoint_every=settings.training.checkpoint_every,
            workers=workers or settings.training.workers,
            metrics_file=metrics_file,
        )

    # ---------- persistence ----------

    def save(self) -> Path:
        self.run_dir.mkdir(parents=True, exist_ok=True)
        path = self.params.save(self.run_dir / POLICY_FILE,
                                extra={'iteration': self.iteration, 'stage': self.curriculum.stage})
        moments = {}
        for name in self.params.tensors:
            if name in self.optimizer.m:
                moments[f"m.{name}"] = self.optimizer.m[name]
                moments[f"v.{name}"] = self.optimizer.v[name]
        save_checkpoint(self.run_dir / OPTIMIZER_FILE, moments, {'kind': 'diplomat-adam/1', 'step': self.optimizer.step})
        with open(self.run_dir / STATE_FILE, 'w') as f:
            json.dump({
                'iteration': self.iteration,
                'steps': self.steps_done,
                'seed': self.seed,
                'curriculum': self.curriculum.state_dict(),
            }, f, indent=2, sort_keys=True)
        return path

    def resume(self) -> bool:
        """Restore a previous run from the run directory; False when there is none"""
        state_file = self.run_dir / STATE_FILE
        if not state_file.exists():
            return False
        try:
            with open(state_file, 'r') as f:
                state = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise CheckpointError(f"Cannot read {state_file}: {e}") from e
        params, _ = HcnParams.load(self.run_dir / POLICY_FILE)
        if params.shape != self.params.shape:
            raise CheckpointError("Saved policy envelope differs from the configured one")
        self.params = params
        moments, manifest = load_checkpoint(self.run_dir / OPTIMIZER_FILE)
        self.optimizer = AdamState(lr=self.ppo.learning_rate, step=int(manifest.get('step', 0)))
        for key, value in moments.items():
            kind, _, name = key.partition('.')
            (self.optimizer.m if kind == 'm' else self.optimizer.v)[name] = value
        self.iteration = int(state['iteration'])
        self.steps_done = int(state['steps'])
        self.curriculum.load_state(state.get('curriculum', {}))
        self.pool = OpponentPool.load(self.pool.directory or self.run_dir / "pool", self.pool.config)
        logger.info("Training resumed", iteration=self.iteration, stage=self.curriculum.stage,
                    pool=len(self.pool))
        return True

    # ---------- loop ----------

    def _budget_left(self) -> bool:
        if self.iteration >= self.iterations:
            return False
        return self.total_steps is None or self.steps_done < self.total_steps

    def step(self, workers: RolloutWorkers) -> IterationRecord:
        stage = self.curriculum.current
        count = self.ppo.steps_per_iteration
        if self.total_steps is not None:
            count = max(1, min(count, self.total_steps - self.steps_done))
        buffer = workers.collect(self.params, self.pool, stage, count, self.seed, self.iteration, self.collection)
        buffer.compute_advantages(self.ppo.gamma, self.ppo.gae_lambda)

        rng = np.random.default_rng([self.seed, self.iteration, 0, 1])
        self.params, self.optimizer, stats = ppo_update(buffer, self.params, self.optimizer, self.ppo, rng,
                                                        self.collection.flags)
        if stats.rolled_back:
            telemetry.NUMERIC_FAULTS.inc()
            self._faults += 1
            if self._faults >= MAX_CONSECUTIVE_FAULTS:
                raise NumericFaultError("ppo_update")
        else:
            telemetry.PPO_UPDATES.inc()
            self._faults = 0

        for episode in buffer.episodes:
            telemetry.record_episode(episode.agreed, episode.rounds, episode.illegal_actions)
        consensus, objective, welfare, illegal = summarize_buffer(buffer)
        record = IterationRecord(
            iteration=self.iteration,
            stage=stage.index,
            steps=len(buffer),
            episodes=len(buffer.episodes),
            consensus_rate=consensus,
            mean_objective=objective,
            mean_welfare=welfare,
            illegal_actions=illegal,
            ppo=stats,
        )
        self.steps_done += len(buffer)
        self.iteration += 1
        self.curriculum.record(consensus)
        telemetry.CURRICULUM_STAGE.set(self.curriculum.stage)
        telemetry.CONSENSUS_RATE.set(consensus)
        self.pool.maybe_snapshot(self.params, self.iteration)
        return record

    def run(self) -> TrainingResult:
        self.run_dir.mkdir(parents=True, exist_ok=True)
        log_path = self.run_dir / TRAIN_LOG
        result = TrainingResult(self.run_dir, 0, 0, self.curriculum.stage)
        logger.info("Training started", run_dir=str(self.run_dir), seed=self.seed, iterations=self.iterations,
                    workers=self.workers, parameters=self.params.num_parameters())
        with RolloutWorkers(self.workers) as workers, open(log_path, 'a') as log:
            while self._budget_left():
                record = self.step(workers)
                log.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
                log.flush()
                result.records.append(record)
                logger.info("Iteration finished", iteration=record.iteration, stage=record.stage,
                            consensus_rate=round(record.consensus_rate, 4), mean_J=round(record.mean_objective, 4),
                            clip_fraction=round(record.ppo.clip_fraction, 4),
                            rss_mb=round(telemetry.record_process(), 1))
                if self.iteration % self.checkpoint_every == 0:
                    self.save()
                if self.metrics_file is not None:
                    telemetry.write_metrics(self.metrics_file)
        self.save()
        result.iterations = self.iteration
        result.total_steps = self.steps_done
        result.final_stage = self.curriculum.stage
        logger.info("Training finished", iterations=self.iteration, steps=self.steps_done,
                    stage=self.curriculum.stage)
        return result
