"""
Opponent pool of frozen policy snapshots for self-play.

Snapshots are written as checkpoints under the run directory with a
pool.json manifest so an interrupted run can resume with the same pool.
"""
import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Deque, List, Optional, Union

import numpy as np
import structlog

from src.errors import CheckpointError, ConfigError
from src.policy.params import HcnParams

logger = structlog.get_logger()

POOL_MANIFEST = "pool.json"


@dataclass(frozen=True)
class PoolConfig:
    capacity: int = 10
    p_hist: float = 0.3
    snapshot_every: int = 10

    def __post_init__(self):
        if self.capacity < 1:
            raise ConfigError("Pool capacity must be at least 1", field="pool.capacity")
        if not 0.0 <= self.p_hist <= 1.0:
            raise ConfigError("p_hist must lie in [0, 1]", field="pool.p_hist")
        if self.snapshot_every < 1:
            raise ConfigError("snapshot_every must be at least 1", field="pool.snapshot_every")


@dataclass
class Snapshot:
    iteration: int
    params: HcnParams


class OpponentPool:
    def __init__(self, config: PoolConfig = PoolConfig(), directory: Optional[Path] = None):
        self.config = config
        self.directory = Path(directory) if directory is not None else None
        self.snapshots: Deque[Snapshot] = deque(maxlen=config.capacity)

    def __len__(self) -> int:
        return len(self.snapshots)

    @property
    def iterations(self) -> List[int]:
        return [s.iteration for s in self.snapshots]

    def add(self, params: HcnParams, iteration: int) -> None:
        """Store a frozen copy, evicting the oldest at capacity"""
        if len(self.snapshots) == self.config.capacity:
            evicted = self.snapshots[0]
            logger.debug("Pool snapshot evicted", iteration=evicted.iteration)
        self.snapshots.append(Snapshot(int(iteration), params.frozen()))
        if self.directory is not None:
            self._save()

    def maybe_snapshot(self, params: HcnParams, iteration: int) -> bool:
        """Snapshot on every `snapshot_every`-th iteration"""
        if iteration <= 0 or iteration % self.config.snapshot_every:
            return False
        self.add(params, iteration)
        logger.info("Policy snapshot added to pool", iteration=iteration, size=len(self))
        return True

    def sample(self, rng: np.random.Generator, current: HcnParams) -> HcnParams:
        """Uniform over stored snapshots; the current params when empty"""
        if not self.snapshots:
            return current
        return self.snapshots[int(rng.integers(len(self.snapshots)))].params

    def seat_params(self, rng: np.random.Generator, current: HcnParams) -> HcnParams:
        """Params for one non-learner seat: a snapshot with probability p_hist"""
        if self.snapshots and rng.random() < self.config.p_hist:
            return self.sample(rng, current)
        return current

    def _snapshot_path(self, iteration: int) -> Path:
        return self.directory / f"snapshot_{iteration:06d}.ddck"

    def _save(self) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        kept = []
        for snapshot in self.snapshots:
            path = self._snapshot_path(snapshot.iteration)
            if not path.exists():
                snapshot.params.save(path, extra={'iteration': snapshot.iteration})
            kept.append(path.name)
        with open(self.directory / POOL_MANIFEST, 'w') as f:
            json.dump({
                'capacity': self.config.capacity,
                'p_hist': self.config.p_hist,
                'snapshot_every': self.config.snapshot_every,
                'snapshots': [{'iteration': s.iteration, 'file': name}
                              for s, name in zip(self.snapshots, kept)],
            }, f, indent=2)

    @classmethod
    def load(cls, directory: Union[str, Path], config: Optional[PoolConfig] = None) -> 'OpponentPool':
        """Rebuild a pool from its manifest; a missing manifest yields an empty pool"""
        directory = Path(directory)
        manifest_file = directory / POOL_MANIFEST
        if manifest_file.exists():
            try:
                with open(manifest_file, 'r') as f:
                    data = json.load(f)
            except (OSError, json.JSONDecodeError) as e:
                raise CheckpointError(f"Cannot read pool manifest {manifest_file}: {e}") from e
        else:
            data = {}
        if config is None:
            config = PoolConfig(capacity=int(data.get('capacity', 10)), p_hist=float(data.get('p_hist', 0.3)),
                                snapshot_every=int(data.get('snapshot_every', 10)))
        pool = cls(config, directory)
        for entry in data.get('snapshots', []):
            params, _ = HcnParams.load(directory / entry['file'])
            pool.snapshots.append(Snapshot(int(entry['iteration']), params.frozen()))
        if pool.snapshots:
            logger.info("Opponent pool loaded", size=len(pool), directory=str(directory))
        return pool
