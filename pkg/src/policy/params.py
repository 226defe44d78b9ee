"""
Learnable weights of the hierarchical consensus network.

The network is sized for a shape envelope (max agents, issues, values);
smaller scenarios are padded into it by the feature builder.
"""
from collections import OrderedDict
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.arena.observation import BEHAVIOR_SIZE, DEFAULT_HISTORY, HISTORY_FEATURES, NUM_PHASES
from src.arena.protocol import NUM_TAGS
from src.errors import CheckpointError
from src.numerics.checkpoint import load_checkpoint, save_checkpoint
from src.numerics.layers import init_matrix
from src.numerics.tensor import Tensor

NUM_STANCES = 3
CHECKPOINT_KIND = "diplomat-hcn/1"


@dataclass(frozen=True)
class PolicyShape:
    d: int = 64
    heads: int = 4
    d_m: int = 32
    max_agents: int = 8
    max_issues: int = 4
    max_values: int = 6
    num_buckets: int = 3
    history: int = DEFAULT_HISTORY

    def __post_init__(self):
        if self.d % self.heads != 0:
            raise ValueError(f"d={self.d} must be divisible by heads={self.heads}")
        if self.max_agents < 2 or self.max_issues < 1 or self.max_values < 2:
            raise ValueError("Shape envelope too small")

    @property
    def head_dim(self) -> int:
        return self.d // self.heads

    @property
    def standing_size(self) -> int:
        return self.max_issues * self.max_values

    @property
    def self_size(self) -> int:
        return self.max_issues + 1 + NUM_PHASES + 1 + self.standing_size + 1

    @property
    def env_size(self) -> int:
        return self.self_size + BEHAVIOR_SIZE

    @property
    def context_size(self) -> int:
        return self.num_buckets * self.max_issues

    def admits(self, num_agents: int, value_counts: Sequence[int]) -> bool:
        return (num_agents <= self.max_agents
                and len(value_counts) <= self.max_issues
                and all(v <= self.max_values for v in value_counts))

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'PolicyShape':
        return cls(**{k: int(v) for k, v in data.items()})


def parameter_shapes(shape: PolicyShape) -> List[Tuple[str, Tuple[int, ...]]]:
    """Every parameter in declaration order"""
    d, dm, two_d = shape.d, shape.d_m, 2 * shape.d
    spec: List[Tuple[str, Tuple[int, ...]]] = [
        ('env_w1', (shape.env_size, d)), ('env_b1', (1, d)),
        ('env_w2', (d, d)), ('env_b2', (1, d)),
        ('w_e', (d, d)),
        ('msg_embed', (NUM_TAGS, dm)), ('msg_proj', (HISTORY_FEATURES, dm)), ('msg_b', (1, dm)),
        ('lstm_wx', (dm, 4 * d)), ('lstm_wh', (d, 4 * d)), ('lstm_b', (1, 4 * d)),
        ('w_c', (shape.context_size, d)),
    ]
    for k in range(shape.heads):
        spec += [(f'attn_q{k}', (d, shape.head_dim)),
                 (f'attn_k{k}', (d, shape.head_dim)),
                 (f'attn_v{k}', (d, shape.head_dim))]
    spec += [
        ('post_w1', (d, d)), ('post_b1', (1, d)), ('post_w2', (d, d)), ('post_b2', (1, d)),
        ('coalition_w', (d, 1)), ('coalition_b', (1, 1)),
        ('stance_w', (two_d, NUM_STANCES)), ('stance_b', (1, NUM_STANCES)),
        ('move_w', (two_d, NUM_TAGS)), ('move_b', (1, NUM_TAGS)), ('stance_bias', (NUM_STANCES, NUM_TAGS)),
    ]
    for m in range(shape.max_issues):
        spec += [(f'value_issue_w{m}', (two_d, shape.max_values)), (f'value_issue_b{m}', (1, shape.max_values))]
    spec += [
        ('issue_w', (two_d, shape.max_issues)), ('issue_b', (1, shape.max_issues)),
        ('conc_w', (two_d, 2)), ('conc_b', (1, 2)),
        ('value_w', (two_d, 1)), ('value_b', (1, 1)),
    ]
    return spec


class HcnParams:
    """Named parameter tensors plus the shape envelope they were built for"""

    def __init__(self, shape: PolicyShape, tensors: Mapping[str, Tensor]):
        self.shape = shape
        self.tensors: Dict[str, Tensor] = OrderedDict(tensors)
        expected = parameter_shapes(shape)
        if [name for name, _ in expected] != list(self.tensors):
            raise CheckpointError("Parameter names do not match the network layout")
        for name, dims in expected:
            if self.tensors[name].shape != dims:
                raise CheckpointError(f"Parameter {name} has shape {self.tensors[name].shape}, expected {dims}")

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors.values())

    @classmethod
    def initialize(cls, shape: PolicyShape, seed: int = 0) -> 'HcnParams':
        rng = np.random.default_rng(seed)
        tensors = OrderedDict()
        for name, dims in parameter_shapes(shape):
            # every (1, n) parameter is a bias row
            if dims[0] == 1 or name == 'stance_bias':
                data = np.zeros(dims)
            elif name in ('conc_w', 'value_w') or name.startswith(('move_w', 'value_issue_w', 'issue_w')):
                data = init_matrix(rng, dims[0], dims[1], gain=0.1)
            else:
                data = init_matrix(rng, dims[0], dims[1])
            tensors[name] = Tensor(data, requires_grad=True, name=name)
        # forget-gate bias 1 keeps early cell state
        d = shape.d
        tensors['lstm_b'].data[0, d:2 * d] = 1.0
        return cls(shape, tensors)

    @classmethod
    def zeros(cls, shape: PolicyShape) -> 'HcnParams':
        return cls(shape, OrderedDict(
            (name, Tensor(np.zeros(dims), requires_grad=True, name=name)) for name, dims in parameter_shapes(shape)
        ))

    @classmethod
    def from_arrays(cls, shape: PolicyShape, arrays: Mapping[str, np.ndarray]) -> 'HcnParams':
        tensors = OrderedDict()
        for name, _ in parameter_shapes(shape):
            if name not in arrays:
                raise CheckpointError(f"Missing parameter {name}")
            tensors[name] = Tensor(arrays[name], requires_grad=True, name=name)
        return cls(shape, tensors)

    def arrays(self) -> Dict[str, np.ndarray]:
        return OrderedDict((name, t.data.copy()) for name, t in self.tensors.items())

    def copy(self) -> 'HcnParams':
        return HcnParams.from_arrays(self.shape, self.arrays())

    def frozen(self) -> 'HcnParams':
        """Read-only snapshot; forward passes on it record no graph"""
        return HcnParams(self.shape, OrderedDict(
            (name, Tensor(t.data, name=name)) for name, t in self.tensors.items()
        ))

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.grad = None

    def grads(self) -> Dict[str, np.ndarray]:
        return OrderedDict(
            (name, t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
            for name, t in self.tensors.items()
        )

    def num_parameters(self) -> int:
        return int(sum(t.data.size for t in self.tensors.values()))

    def save(self, path: Union[str, Path], extra: Optional[Dict[str, Any]] = None) -> Path:
        manifest = {'kind': CHECKPOINT_KIND, 'shape': self.shape.to_dict()}
        manifest.update(extra or {})
        return save_checkpoint(path, self.arrays(), manifest)

    @classmethod
    def load(cls, path: Union[str, Path]) -> Tuple['HcnParams', Dict[str, Any]]:
        arrays, manifest = load_checkpoint(path)
        if manifest.get('kind') != CHECKPOINT_KIND:
            raise CheckpointError(f"{path} is not a policy checkpoint")
        try:
            shape = PolicyShape.from_dict(manifest['shape'])
        except (KeyError, TypeError, ValueError) as e:
            raise CheckpointError(f"{path}: bad shape envelope in manifest: {e}") from e
        return cls.from_arrays(shape, arrays), manifest


def check_compatible(params: HcnParams, num_agents: int, value_counts: Sequence[int]) -> None:
    if not params.shape.admits(num_agents, value_counts):
        raise CheckpointError(
            f"Scenario with {num_agents} agents and value counts {tuple(value_counts)} "
            f"exceeds the policy envelope {params.shape.to_dict()}"
        )
