"""
Fan-out of rollout collection over worker processes.

Worker w in iteration k seeds its generator with (seed, k, w) and buffers are
concatenated in worker-id order, so a run is reproducible for a fixed worker
count. A single worker runs in-process.
"""
import asyncio
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional

import structlog

from src.policy.params import HcnParams

from .buffer import RolloutBuffer
from .curriculum import CurriculumStage
from .pool import OpponentPool
from .rollouts import CollectionConfig, collect_rollouts

logger = structlog.get_logger()


def split_count(count: int, workers: int) -> List[int]:
    """Per-worker step counts summing to count; earlier workers take the remainder"""
    if workers < 1:
        raise ValueError(f"workers must be positive, got {workers}")
    base, extra = divmod(count, workers)
    return [base + (1 if w < extra else 0) for w in range(workers)]


class RolloutWorkers:
    """Process pool for collection; use as a context manager"""

    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ValueError(f"workers must be positive, got {workers}")
        self.workers = workers
        self.executor: Optional[ProcessPoolExecutor] = None

    def __enter__(self) -> 'RolloutWorkers':
        if self.workers > 1:
            self.executor = ProcessPoolExecutor(max_workers=self.workers)
            logger.info("Rollout workers started", workers=self.workers)
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        if self.executor is not None:
            self.executor.shutdown(wait=True)
            self.executor = None

    async def collect_async(self, params: HcnParams, pool: Optional[OpponentPool], stage: CurriculumStage,
                            count: int, seed: int, iteration: int,
                            config: Optional[CollectionConfig] = None) -> RolloutBuffer:
        counts = split_count(count, self.workers)
        if self.executor is None:
            buffers = [collect_rollouts(params, pool, stage, c, [seed, iteration, w], config)
                       for w, c in enumerate(counts) if c > 0]
            return RolloutBuffer.concat(buffers)

        loop = asyncio.get_running_loop()
        frozen = params.frozen()
        tasks = [
            loop.run_in_executor(self.executor, collect_rollouts, frozen, pool, stage, c,
                                 [seed, iteration, w], config)
            for w, c in enumerate(counts) if c > 0
        ]
        buffers = await asyncio.gather(*tasks)
        return RolloutBuffer.concat(buffers)

    def collect(self, params: HcnParams, pool: Optional[OpponentPool], stage: CurriculumStage,
                count: int, seed: int, iteration: int,
                config: Optional[CollectionConfig] = None) -> RolloutBuffer:
        return asyncio.run(self.collect_async(params, pool, stage, count, seed, iteration, config))
