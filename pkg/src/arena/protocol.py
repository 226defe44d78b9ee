"""
Progressive negotiation protocol: a deterministic state machine over
phases, messages and termination.

Every round each agent sends exactly one message; messages of a round are
applied in ascending agent id order. The author of a proposal accepts it
implicitly. Reject demotes the standing proposal but keeps it in the log.
"""
import enum
from dataclasses import dataclass, field, replace
from typing import Any, ClassVar, Dict, FrozenSet, Optional, Sequence, Tuple, Union

import structlog

from src.errors import (
    InvalidDealError, OutOfEpisodeError, ProtocolClosedError, ProtocolViolationError,
)

from .domain import Deal, Scenario, validate_deal

logger = structlog.get_logger()

DEFAULT_BUCKETS = 3


class Phase(enum.IntEnum):
    INITIALIZATION = 0
    EXPLORATION = 1
    PROPOSAL_EXCHANGE = 2
    ARGUMENTATION = 3
    CONVERGENCE = 4

    @property
    def label(self) -> str:
        return _PHASE_LABELS[self]


_PHASE_LABELS = {
    Phase.INITIALIZATION: "Initialization",
    Phase.EXPLORATION: "Exploration",
    Phase.PROPOSAL_EXCHANGE: "ProposalExchange",
    Phase.ARGUMENTATION: "Argumentation",
    Phase.CONVERGENCE: "Convergence",
}


class MoveTag(enum.IntEnum):
    PROPOSE = 0
    ACCEPT = 1
    REJECT = 2
    COUNTEROFFER = 3
    ARGUE = 4
    REVEAL = 5
    PASS = 6

    @property
    def label(self) -> str:
        return self.name.capitalize()


NUM_TAGS = len(MoveTag)
ALL_TAGS: FrozenSet[MoveTag] = frozenset(MoveTag)
NEEDS_STANDING = frozenset({MoveTag.ACCEPT, MoveTag.REJECT, MoveTag.COUNTEROFFER})
NEEDS_DEAL = frozenset({MoveTag.PROPOSE, MoveTag.COUNTEROFFER})

PHASE_TAGS: Dict[Phase, FrozenSet[MoveTag]] = {
    Phase.INITIALIZATION: frozenset({MoveTag.REVEAL, MoveTag.PASS}),
    Phase.EXPLORATION: frozenset({MoveTag.REVEAL, MoveTag.ARGUE, MoveTag.PASS}),
    Phase.PROPOSAL_EXCHANGE: frozenset({MoveTag.PROPOSE, MoveTag.ACCEPT, MoveTag.REJECT,
                                        MoveTag.COUNTEROFFER, MoveTag.PASS}),
    Phase.ARGUMENTATION: frozenset({MoveTag.ARGUE, MoveTag.ACCEPT, MoveTag.REJECT, MoveTag.PASS}),
    Phase.CONVERGENCE: frozenset({MoveTag.ACCEPT, MoveTag.COUNTEROFFER, MoveTag.PASS}),
}


class Direction(enum.IntEnum):
    RAISE = 1
    LOWER = -1


# ---------- messages ----------

@dataclass(frozen=True)
class Propose:
    deal: Deal
    tag: ClassVar[MoveTag] = MoveTag.PROPOSE


@dataclass(frozen=True)
class Accept:
    proposal_id: int
    tag: ClassVar[MoveTag] = MoveTag.ACCEPT


@dataclass(frozen=True)
class Reject:
    proposal_id: int
    tag: ClassVar[MoveTag] = MoveTag.REJECT


@dataclass(frozen=True)
class Counteroffer:
    proposal_id: int
    deal: Deal
    tag: ClassVar[MoveTag] = MoveTag.COUNTEROFFER


@dataclass(frozen=True)
class Argue:
    issue_id: int
    direction: Direction
    strength: float
    tag: ClassVar[MoveTag] = MoveTag.ARGUE


@dataclass(frozen=True)
class Reveal:
    issue_id: int
    bucket: int
    tag: ClassVar[MoveTag] = MoveTag.REVEAL


@dataclass(frozen=True)
class Pass:
    tag: ClassVar[MoveTag] = MoveTag.PASS


Message = Union[Propose, Accept, Reject, Counteroffer, Argue, Reveal, Pass]


def message_to_dict(msg: Message) -> Dict[str, Any]:
    data: Dict[str, Any] = {'tag': msg.tag.label}
    if isinstance(msg, (Accept, Reject, Counteroffer)):
        data['proposal_id'] = msg.proposal_id
    if isinstance(msg, (Propose, Counteroffer)):
        data['deal'] = list(msg.deal)
    if isinstance(msg, Argue):
        data.update(issue_id=msg.issue_id, direction=msg.direction.name.lower(), strength=msg.strength)
    if isinstance(msg, Reveal):
        data.update(issue_id=msg.issue_id, bucket=msg.bucket)
    return data


def message_from_dict(data: Dict[str, Any]) -> Message:
    tag = data['tag']
    if tag == "Propose":
        return Propose(deal=tuple(data['deal']))
    if tag == "Accept":
        return Accept(proposal_id=int(data['proposal_id']))
    if tag == "Reject":
        return Reject(proposal_id=int(data['proposal_id']))
    if tag == "Counteroffer":
        return Counteroffer(proposal_id=int(data['proposal_id']), deal=tuple(data['deal']))
    if tag == "Argue":
        return Argue(issue_id=int(data['issue_id']), direction=Direction[data['direction'].upper()],
                     strength=float(data['strength']))
    if tag == "Reveal":
        return Reveal(issue_id=int(data['issue_id']), bucket=int(data['bucket']))
    if tag == "Pass":
        return Pass()
    raise ValueError(f"Unknown message tag {tag!r}")


# ---------- outcomes ----------

@dataclass(frozen=True)
class Agreement:
    deal: Deal
    round: int


@dataclass(frozen=True)
class Failure:
    round: int


class _Ongoing:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Ongoing"


Ongoing = _Ongoing()
Outcome = Union[Agreement, Failure]


def outcome_to_dict(outcome: Union[Outcome, _Ongoing]) -> Dict[str, Any]:
    if isinstance(outcome, Agreement):
        return {'outcome': 'Agreement', 'deal': list(outcome.deal), 'round': outcome.round}
    if isinstance(outcome, Failure):
        return {'outcome': 'Failure', 'round': outcome.round}
    return {'outcome': 'Ongoing'}


# ---------- state ----------

@dataclass(frozen=True)
class ProposalRecord:
    id: int
    author: int
    deal: Deal
    round: int


@dataclass(frozen=True)
class LogEntry:
    round: int
    phase: Phase
    agent: int
    message: Message


@dataclass(frozen=True)
class LegalMoves:
    """Tags an agent may send now, plus the proposal they must reference"""
    tags: FrozenSet[MoveTag]
    target: Optional[int] = None

    def __contains__(self, tag: object) -> bool:
        return tag in self.tags

    def mask(self) -> Tuple[bool, ...]:
        return tuple(tag in self.tags for tag in MoveTag)


@dataclass(frozen=True)
class ProtocolState:
    num_agents: int
    value_counts: Tuple[int, ...]
    budgets: Tuple[int, ...]
    num_buckets: int = DEFAULT_BUCKETS
    open_protocol: bool = False
    round: int = 0
    next_agent: int = 0
    proposal_log: Tuple[ProposalRecord, ...] = ()
    standing_proposal: Optional[int] = None
    acceptances: FrozenSet[int] = field(default_factory=frozenset)
    message_log: Tuple[LogEntry, ...] = ()
    terminated: Optional[Outcome] = None

    @property
    def total_budget(self) -> int:
        return sum(self.budgets)

    @property
    def phase(self) -> Phase:
        if self.round >= self.total_budget:
            return Phase.CONVERGENCE
        return phase_of(self.round, self.budgets)

    @property
    def standing(self) -> Optional[ProposalRecord]:
        if self.standing_proposal is None:
            return None
        return self.proposal_log[self.standing_proposal]


def initial_state(scenario: Scenario, num_buckets: int = DEFAULT_BUCKETS,
                  open_protocol: bool = False) -> ProtocolState:
    """Fresh protocol state for a scenario.

    open_protocol lifts the per-phase move table (every tag legal in every
    phase); referent rules for Accept/Reject/Counteroffer still apply.
    """
    return ProtocolState(
        num_agents=scenario.num_agents,
        value_counts=scenario.value_counts,
        budgets=scenario.round_budgets,
        num_buckets=num_buckets,
        open_protocol=open_protocol,
    )


def phase_of(round: int, budgets: Sequence[int]) -> Phase:
    """Phase whose cumulative budget interval contains the round"""
    if round < 0:
        raise OutOfEpisodeError(f"Round {round} is negative")
    boundary = 0
    for phase, budget in zip(Phase, budgets):
        boundary += budget
        if round < boundary:
            return phase
    raise OutOfEpisodeError(f"Round {round} is past the total budget {boundary}")


def legal_moves(state: ProtocolState, agent: int) -> LegalMoves:
    if state.terminated is not None:
        raise ProtocolClosedError("Negotiation already terminated")
    tags = set(ALL_TAGS if state.open_protocol else PHASE_TAGS[state.phase])
    standing = state.standing
    if standing is None or standing.author == agent:
        tags -= NEEDS_STANDING
    target = standing.id if standing is not None and standing.author != agent else None
    return LegalMoves(tags=frozenset(tags), target=target)


def _check_arguments(state: ProtocolState, agent: int, msg: Message, legal: LegalMoves) -> None:
    phase = state.phase.label
    if isinstance(msg, (Accept, Reject, Counteroffer)) and msg.proposal_id != legal.target:
        raise ProtocolViolationError(agent, phase, msg.tag.label,
                                     f"proposal {msg.proposal_id} is not the standing proposal")
    if isinstance(msg, (Propose, Counteroffer)):
        try:
            validate_deal(state.value_counts, msg.deal)
        except InvalidDealError as e:
            raise ProtocolViolationError(agent, phase, msg.tag.label, str(e)) from e
    if isinstance(msg, (Argue, Reveal)) and not 0 <= msg.issue_id < len(state.value_counts):
        raise ProtocolViolationError(agent, phase, msg.tag.label, f"issue {msg.issue_id} does not exist")
    if isinstance(msg, Argue) and not 0.0 <= msg.strength <= 1.0:
        raise ProtocolViolationError(agent, phase, msg.tag.label, "strength must lie in [0, 1]")
    if isinstance(msg, Reveal) and not 0 <= msg.bucket < state.num_buckets:
        raise ProtocolViolationError(agent, phase, msg.tag.label, f"bucket {msg.bucket} out of range")


def is_legal(state: ProtocolState, agent: int, msg: Message) -> bool:
    """True when apply_message would accept the message"""
    if state.terminated is not None or agent != state.next_agent:
        return False
    legal = legal_moves(state, agent)
    if msg.tag not in legal:
        return False
    try:
        _check_arguments(state, agent, msg, legal)
    except ProtocolViolationError:
        return False
    return True


def apply_message(state: ProtocolState, agent: int, msg: Message) -> ProtocolState:
    """Apply one agent's message and return the successor state"""
    if state.terminated is not None:
        raise ProtocolClosedError("Negotiation already terminated")
    phase = state.phase
    if agent != state.next_agent:
        raise ProtocolViolationError(agent, phase.label, msg.tag.label,
                                     f"out of turn, agent {state.next_agent} moves next")
    legal = legal_moves(state, agent)
    if msg.tag not in legal:
        raise ProtocolViolationError(agent, phase.label, msg.tag.label)
    _check_arguments(state, agent, msg, legal)

    proposal_log = state.proposal_log
    standing = state.standing_proposal
    acceptances = state.acceptances
    terminated: Optional[Outcome] = None

    if isinstance(msg, (Propose, Counteroffer)):
        record = ProposalRecord(id=len(proposal_log), author=agent, deal=tuple(msg.deal), round=state.round)
        proposal_log = proposal_log + (record,)
        standing = record.id
        acceptances = frozenset({agent})
    elif isinstance(msg, Accept):
        acceptances = acceptances | {agent}
        if len(acceptances) == state.num_agents:
            terminated = Agreement(deal=proposal_log[standing].deal, round=state.round)
    elif isinstance(msg, Reject):
        standing = None
        acceptances = frozenset()

    entry = LogEntry(round=state.round, phase=phase, agent=agent, message=msg)
    next_agent = agent + 1
    next_round = state.round
    if terminated is None and next_agent == state.num_agents:
        next_agent = 0
        next_round += 1
        if next_round >= state.total_budget:
            terminated = Failure(round=next_round)

    new_state = replace(
        state,
        round=next_round,
        next_agent=next_agent,
        proposal_log=proposal_log,
        standing_proposal=standing,
        acceptances=acceptances,
        # copied per message; at most num_agents * total_budget entries
        message_log=state.message_log + (entry,),
        terminated=terminated,
    )
    if terminated is not None:
        logger.debug("Protocol terminated", outcome=type(terminated).__name__, round=terminated.round)
    return new_state


def outcome(state: ProtocolState) -> Union[Outcome, _Ongoing]:
    return state.terminated if state.terminated is not None else Ongoing
