"""PPO self-play training with a curriculum and an opponent pool."""

from .curriculum import Curriculum, CurriculumStage, curriculum_advance
from .gae import compute_gae
from .pool import OpponentPool, PoolConfig
from .ppo import PpoConfig, ppo_update

__all__ = [
    'Curriculum',
    'CurriculumStage',
    'OpponentPool',
    'PoolConfig',
    'PpoConfig',
    'compute_gae',
    'curriculum_advance',
    'ppo_update',
]
