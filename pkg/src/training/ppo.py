"""
Clipped-surrogate policy optimisation over a collected rollout buffer.
"""
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import structlog

from src.errors import ConfigError, NumericFaultError
from src.numerics import tensor as T
from src.numerics.adam import AdamState, adam_step, clip_grad_norm, global_norm
from src.numerics.tensor import Tensor
from src.policy.hcn import ArchitectureFlags
from src.policy.params import HcnParams
from src.policy.sampling import evaluate_actions

from .buffer import Minibatch, RolloutBuffer, normalize_advantages

logger = structlog.get_logger()


@dataclass
class PpoConfig:
    clip: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    epochs: int = 4
    minibatch_size: int = 64
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    learning_rate: float = 3e-4
    max_grad_norm: float = 0.5
    steps_per_iteration: int = 1024

    def __post_init__(self):
        if not 0.0 < self.clip < 1.0:
            raise ConfigError(f"clip must lie in (0, 1), got {self.clip}", field="ppo.clip")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"gamma must lie in [0, 1), got {self.gamma}", field="ppo.gamma")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ConfigError(f"gae_lambda must lie in [0, 1], got {self.gae_lambda}", field="ppo.gae_lambda")
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1", field="ppo.epochs")
        if self.minibatch_size < 1:
            raise ConfigError("minibatch_size must be at least 1", field="ppo.minibatch_size")
        if self.steps_per_iteration < 1:
            raise ConfigError("steps_per_iteration must be at least 1", field="ppo.steps_per_iteration")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive", field="ppo.learning_rate")

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class PpoStats:
    mean_ratio: float = 1.0
    first_ratio: float = 1.0
    clip_fraction: float = 0.0
    policy_loss: float = 0.0
    value_loss: float = 0.0
    entropy: float = 0.0
    grad_norm: float = 0.0
    minibatches: int = 0
    rolled_back: bool = False

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def clipped_surrogate(ratio: np.ndarray, advantages: np.ndarray, clip: float) -> np.ndarray:
    """Elementwise min(r A, clip(r, 1 - eps, 1 + eps) A)"""
    ratio = np.asarray(ratio, dtype=np.float64)
    advantages = np.asarray(advantages, dtype=np.float64)
    return np.minimum(ratio * advantages, np.clip(ratio, 1.0 - clip, 1.0 + clip) * advantages)


def _column(values: np.ndarray) -> Tensor:
    return Tensor(np.asarray(values, dtype=np.float64).reshape(-1, 1))


def minibatch_loss(batch: Minibatch, params: HcnParams, config: PpoConfig,
                   flags: ArchitectureFlags = ArchitectureFlags()) -> Tuple[Tensor, Dict[str, float]]:
    """Scalar loss (negated surrogate + value loss - entropy bonus) and its parts"""
    log_probs, entropies, values = evaluate_actions(batch.inputs, batch.actions, params, flags)
    ratio = T.exp(T.sub(log_probs, _column(batch.old_log_probs)))
    advantages = _column(batch.advantages)
    unclipped = T.mul(ratio, advantages)
    clipped = T.mul(T.clip(ratio, 1.0 - config.clip, 1.0 + config.clip), advantages)
    surrogate = T.mean(T.minimum(unclipped, clipped))
    value_loss = T.mean(T.square(T.sub(values, _column(batch.returns))))
    entropy = T.mean(entropies)

    loss = T.add(T.scale(surrogate, -1.0), T.scale(value_loss, config.value_coef))
    loss = T.sub(loss, T.scale(entropy, config.entropy_coef))

    r = ratio.data[:, 0]
    parts = {
        'mean_ratio': float(r.mean()),
        'clip_fraction': float(np.mean(np.abs(r - 1.0) > config.clip)),
        'policy_loss': -surrogate.item(),
        'value_loss': value_loss.item(),
        'entropy': entropy.item(),
    }
    return loss, parts


def surrogate_objective(buffer: RolloutBuffer, params: HcnParams, config: PpoConfig,
                        flags: ArchitectureFlags = ArchitectureFlags()) -> float:
    """Mean clipped surrogate over the whole buffer with buffer-normalised advantages"""
    steps = buffer.transitions
    log_probs, _, _ = evaluate_actions([s.policy_input for s in steps], [s.action for s in steps],
                                       params.frozen(), flags)
    old = np.array([s.log_prob for s in steps])
    ratio = np.exp(log_probs.data[:, 0] - old)
    return float(clipped_surrogate(ratio, normalize_advantages(buffer.advantages), config.clip).mean())


def ppo_update(buffer: RolloutBuffer, params: HcnParams, optimizer: AdamState, config: PpoConfig,
               rng: np.random.Generator, flags: ArchitectureFlags = ArchitectureFlags()
               ) -> Tuple[HcnParams, AdamState, PpoStats]:
    """
    Run `epochs` passes of shuffled minibatch updates.

    A numeric fault anywhere in the update returns the original params and a
    copy of the optimizer state taken before the first step.
    """
    if not buffer.ready:
        buffer.compute_advantages(config.gamma, config.gae_lambda)
    if len(buffer) == 0:
        return params, optimizer, PpoStats()

    snapshot = optimizer.copy()
    optimizer.lr = config.learning_rate
    current = params
    history: List[Dict[str, float]] = []
    norms: List[float] = []
    try:
        for epoch in range(config.epochs):
            for batch in buffer.minibatches(config.minibatch_size, rng):
                current.zero_grad()
                loss, parts = minibatch_loss(batch, current, config, flags)
                T.backward(loss)
                grads = current.grads()
                norms.append(global_norm(grads))
                grads = clip_grad_norm(grads, config.max_grad_norm)
                updated = adam_step(optimizer, current.arrays(), grads)
                for name, value in updated.items():
                    if not np.all(np.isfinite(value)):
                        raise NumericFaultError(f"adam_step:{name}")
                current = HcnParams.from_arrays(current.shape, updated)
                history.append(parts)
    except NumericFaultError as e:
        logger.error("PPO update aborted, parameters rolled back", error=str(e), op=e.op)
        return params, snapshot, PpoStats(rolled_back=True, minibatches=len(history))

    stats = PpoStats(
        mean_ratio=float(np.mean([h['mean_ratio'] for h in history])),
        first_ratio=history[0]['mean_ratio'],
        clip_fraction=float(np.mean([h['clip_fraction'] for h in history])),
        policy_loss=float(np.mean([h['policy_loss'] for h in history])),
        value_loss=float(np.mean([h['value_loss'] for h in history])),
        entropy=float(np.mean([h['entropy'] for h in history])),
        grad_norm=float(np.mean(norms)),
        minibatches=len(history),
    )
    logger.debug("PPO update finished", steps=len(buffer), **stats.to_dict())
    return current, optimizer, stats


def make_optimizer(config: PpoConfig, state: Optional[AdamState] = None) -> AdamState:
    return state if state is not None else AdamState(lr=config.learning_rate)
