"""
Rollout storage for PPO.

Steps are grouped into segments, one per learner seat per episode. A segment
cut off by the step budget carries the value estimate of its next state as a
bootstrap; finished segments bootstrap with 0.
"""
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np

from src.arena.actions import AgentAction
from src.policy.features import PolicyInput

from .gae import compute_gae

ADVANTAGE_STD_FLOOR = 1e-8


@dataclass
class Transition:
    policy_input: PolicyInput
    action: AgentAction
    log_prob: float
    value: float
    reward: float
    done: bool = False


@dataclass
class Segment:
    transitions: List[Transition] = field(default_factory=list)
    bootstrap_value: float = 0.0

    def __len__(self) -> int:
        return len(self.transitions)


@dataclass
class EpisodeStats:
    """What the trainer logs about an episode played during collection"""
    agreed: bool
    rounds: int
    utilities: Sequence[float]
    objective: float
    illegal_actions: int
    num_agents: int


@dataclass
class Minibatch:
    inputs: List[PolicyInput]
    actions: List[AgentAction]
    old_log_probs: np.ndarray
    old_values: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray

    def __len__(self) -> int:
        return len(self.actions)


def normalize_advantages(advantages: np.ndarray) -> np.ndarray:
    """Zero mean, unit std; only centred when the std is below the floor"""
    centred = advantages - advantages.mean()
    std = centred.std()
    if std < ADVANTAGE_STD_FLOOR:
        return centred
    return centred / std


class RolloutBuffer:
    def __init__(self):
        self.segments: List[Segment] = []
        self.episodes: List[EpisodeStats] = []
        self._advantages: Optional[np.ndarray] = None
        self._returns: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return sum(len(s) for s in self.segments)

    def add_segment(self, transitions: Sequence[Transition], bootstrap_value: float = 0.0) -> None:
        if not transitions:
            return
        self.segments.append(Segment(list(transitions), float(bootstrap_value)))
        self._advantages = None
        self._returns = None

    @property
    def transitions(self) -> List[Transition]:
        return [t for segment in self.segments for t in segment.transitions]

    @property
    def ready(self) -> bool:
        return self._advantages is not None

    def compute_advantages(self, gamma: float, lam: float) -> None:
        advantages = []
        returns = []
        for segment in self.segments:
            steps = segment.transitions
            dones = [t.done for t in steps]
            # finished segments end on done, so only open ones use the bootstrap
            adv, ret = compute_gae(
                [t.reward for t in steps], [t.value for t in steps], dones,
                gamma=gamma, lam=lam, last_value=segment.bootstrap_value,
            )
            advantages.append(adv)
            returns.append(ret)
        self._advantages = np.concatenate(advantages) if advantages else np.zeros(0)
        self._returns = np.concatenate(returns) if returns else np.zeros(0)

    @property
    def advantages(self) -> np.ndarray:
        if self._advantages is None:
            raise RuntimeError("Advantages have not been computed")
        return self._advantages

    @property
    def returns(self) -> np.ndarray:
        if self._returns is None:
            raise RuntimeError("Advantages have not been computed")
        return self._returns

    def arrays(self) -> Dict[str, np.ndarray]:
        """Flat per-step arrays, used for determinism checks and logging"""
        steps = self.transitions
        return {
            'log_prob': np.array([t.log_prob for t in steps]),
            'value': np.array([t.value for t in steps]),
            'reward': np.array([t.reward for t in steps]),
            'done': np.array([t.done for t in steps]),
            'tag': np.array([int(t.action.tag) for t in steps]),
            'concession': np.array([t.action.concession for t in steps]),
        }

    def batch(self, indices: Sequence[int], normalize: bool = True) -> Minibatch:
        steps = self.transitions
        indices = list(indices)
        advantages = self.advantages[indices]
        return Minibatch(
            inputs=[steps[i].policy_input for i in indices],
            actions=[steps[i].action for i in indices],
            old_log_probs=np.array([steps[i].log_prob for i in indices]),
            old_values=np.array([steps[i].value for i in indices]),
            advantages=normalize_advantages(advantages) if normalize else advantages,
            returns=self.returns[indices],
        )

    def minibatches(self, size: int, rng: np.random.Generator) -> Iterator[Minibatch]:
        """Shuffled minibatches covering every step once"""
        if size < 1:
            raise ValueError(f"Minibatch size must be positive, got {size}")
        order = rng.permutation(len(self))
        for start in range(0, len(order), size):
            yield self.batch(order[start:start + size])

    @classmethod
    def concat(cls, buffers: Sequence['RolloutBuffer']) -> 'RolloutBuffer':
        """Merge worker buffers in the given (worker id) order"""
        merged = cls()
        for buffer in buffers:
            merged.segments.extend(buffer.segments)
            merged.episodes.extend(buffer.episodes)
        return merged
