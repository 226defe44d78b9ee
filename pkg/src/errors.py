"""Exception hierarchy for diplomat."""
from typing import Optional, Sequence


class DiplomatError(Exception):
    """Base class for every error raised by the arena"""


class ScenarioError(DiplomatError, ValueError):
    """Invalid issue, preference profile or scenario"""


class InvalidDealError(DiplomatError, ValueError):
    """Deal index outside an issue's value grid"""


class EnumerationRefusedError(DiplomatError):
    """Deal space too large to enumerate"""

    def __init__(self, cardinality: int, limit: int):
        self.cardinality = cardinality
        self.limit = limit
        super().__init__(f"Deal space has {cardinality} deals, limit is {limit}")


class OracleRefusedError(EnumerationRefusedError):
    """Brute-force oracle refused because the deal space is too large"""


class ProtocolError(DiplomatError):
    """Base for negotiation protocol errors"""


class ProtocolViolationError(ProtocolError):
    """Message not allowed for this agent in this phase"""

    def __init__(self, agent: int, phase: str, tag: str, reason: str = "illegal move"):
        self.agent = agent
        self.phase = phase
        self.tag = tag
        super().__init__(f"Agent {agent} cannot send {tag} during {phase}: {reason}")


class ProtocolClosedError(ProtocolError):
    """Negotiation already terminated"""


class OutOfEpisodeError(ProtocolError):
    """Round lies past the total round budget"""


class ShapeError(DiplomatError, ValueError):
    """Tensor shapes incompatible for an operation"""

    def __init__(self, op: str, shape_a: Sequence[int], shape_b: Optional[Sequence[int]] = None):
        self.op = op
        self.shape_a = tuple(shape_a)
        self.shape_b = tuple(shape_b) if shape_b is not None else None
        if self.shape_b is None:
            message = f"{op}: unsupported shape {self.shape_a}"
        else:
            message = f"{op}: incompatible shapes {self.shape_a} and {self.shape_b}"
        super().__init__(message)


class NumericFaultError(DiplomatError, ArithmeticError):
    """NaN or Inf produced by a numerics operation"""

    def __init__(self, op: str):
        self.op = op
        super().__init__(f"Non-finite value produced by {op}")


class ContractError(DiplomatError):
    """API contract broken by the caller"""


class ConfigError(DiplomatError):
    """Malformed run configuration"""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.message = message
        self.field = field
        self.line = line
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field:
            location.append(f"field '{field}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")


class CheckpointError(DiplomatError):
    """Corrupt or incompatible parameter checkpoint"""


class UnknownFlagError(DiplomatError, ValueError):
    """Ablation flag not recognised"""


class DomainError(DiplomatError, ValueError):
    """Input outside a function's mathematical domain"""
