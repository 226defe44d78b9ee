"""
Agent line-ups from compact spec strings such as
"conceder:2.0,random,alternating,hcn:runs/a/policy.ddck".

Seats take the entries in order, cycling when there are fewer entries
than agents.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import structlog

from src.errors import ConfigError
from src.policy.agent import HcnAgent
from src.policy.hcn import ArchitectureFlags
from src.policy.params import HcnParams

from .alternating import AlternatingOffersAgent
from .conceder import ConcederAgent
from .random_agent import RandomAgent

logger = structlog.get_logger()

KINDS = ("random", "conceder", "alternating", "hcn")


@dataclass(frozen=True)
class AgentSpec:
    kind: str
    argument: Optional[str] = None

    def __str__(self) -> str:
        return self.kind if self.argument is None else f"{self.kind}:{self.argument}"


def parse_agent_specs(text: str) -> List[AgentSpec]:
    specs = []
    for raw in text.split(','):
        raw = raw.strip()
        if not raw:
            continue
        kind, _, argument = raw.partition(':')
        kind = kind.strip().lower()
        if kind not in KINDS:
            raise ConfigError(f"Unknown agent kind '{kind}', expected one of {', '.join(KINDS)}", field="agents")
        if kind == "hcn" and not argument:
            raise ConfigError("hcn agents need a checkpoint path, e.g. hcn:policy.ddck", field="agents")
        if kind == "conceder" and argument:
            try:
                if float(argument) <= 0:
                    raise ValueError
            except ValueError:
                raise ConfigError(f"Conceder beta must be a positive number, got '{argument}'", field="agents") from None
        specs.append(AgentSpec(kind, argument or None))
    if not specs:
        raise ConfigError("Agent spec is empty", field="agents")
    return specs


class AgentFactory:
    """Builds agents from specs, loading each checkpoint once"""

    def __init__(self, flags: ArchitectureFlags = ArchitectureFlags(), deterministic: bool = False,
                 params: Optional[HcnParams] = None):
        self.flags = flags
        self.deterministic = deterministic
        self.params = params
        self._loaded: Dict[str, HcnParams] = {}

    def _params_for(self, argument: Optional[str]) -> HcnParams:
        if argument is None:
            if self.params is None:
                raise ConfigError("hcn agent without a checkpoint", field="agents")
            return self.params
        if argument not in self._loaded:
            params, _ = HcnParams.load(Path(argument))
            self._loaded[argument] = params.frozen()
            logger.info("Policy checkpoint loaded", path=argument, parameters=params.num_parameters())
        return self._loaded[argument]

    def build(self, spec: AgentSpec, rng: np.random.Generator):
        if spec.kind == "random":
            return RandomAgent(rng)
        if spec.kind == "conceder":
            return ConcederAgent(float(spec.argument) if spec.argument else 1.0)
        if spec.kind == "alternating":
            return AlternatingOffersAgent()
        return HcnAgent(self._params_for(spec.argument), rng=rng, deterministic=self.deterministic, flags=self.flags)

    def lineup(self, specs: Sequence[AgentSpec], num_agents: int, seed: int) -> List:
        return [self.build(specs[i % len(specs)], np.random.default_rng([int(seed), i])) for i in range(num_agents)]
