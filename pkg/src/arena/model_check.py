"""
Explicit-state model check of the negotiation protocol.

Explores every legal message sequence of a small instance. Paths are
merged on a control key (round, mover, standing proposal author and deal,
acceptances, outcome); everything the future depends on is in the key, so
exploring keys covers every sequence. Each reachable state is also probed
with the full candidate message set to confirm that illegal messages are
refused.
"""
import itertools
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Optional, Set, Tuple

import structlog

from src.errors import ProtocolError

from .domain import Scenario
from .protocol import (
    Accept, Agreement, Argue, Counteroffer, Direction, Failure, Message, Pass, Propose, ProtocolState,
    Reject, Reveal, apply_message, initial_state, is_legal,
)

logger = structlog.get_logger()

ARGUE_STRENGTHS = (0.0, 0.5, 1.0)


@dataclass
class ModelCheckReport:
    reachable_states: int = 0
    transitions: int = 0
    terminal_agreements: int = 0
    terminal_failures: int = 0
    nonterminating_paths: int = 0
    accepted_illegal: int = 0
    rejected_legal: int = 0
    max_depth: int = 0
    sequences: int = 0
    violations: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.nonterminating_paths == 0 and self.accepted_illegal == 0 and self.rejected_legal == 0


def control_key(state: ProtocolState) -> Hashable:
    standing = state.standing
    return (
        state.round,
        state.next_agent,
        None if standing is None else (standing.author, standing.deal),
        tuple(sorted(state.acceptances)),
        state.terminated,
    )


def candidate_messages(state: ProtocolState) -> List[Message]:
    """Every message shape with every argument, legal or not"""
    deals = list(itertools.product(*(range(n) for n in state.value_counts)))
    ids = sorted({record.id for record in state.proposal_log} | {0})
    issues = range(len(state.value_counts))
    messages: List[Message] = [Pass()]
    messages += [Propose(deal=d) for d in deals]
    messages += [Accept(proposal_id=i) for i in ids]
    messages += [Reject(proposal_id=i) for i in ids]
    messages += [Counteroffer(proposal_id=i, deal=d) for i in ids for d in deals]
    messages += [Argue(issue_id=m, direction=direction, strength=s)
                 for m in issues for direction in Direction for s in ARGUE_STRENGTHS]
    messages += [Reveal(issue_id=m, bucket=b) for m in issues for b in range(state.num_buckets)]
    return messages


def check_protocol(scenario: Scenario, num_buckets: int = 3, open_protocol: bool = False) -> ModelCheckReport:
    """Explore all legal sequences of the scenario's protocol"""
    report = ModelCheckReport()
    start = initial_state(scenario, num_buckets=num_buckets, open_protocol=open_protocol)
    total = start.total_budget * start.num_agents

    # number of distinct legal sequences reaching each key
    frontier: Dict[Hashable, Tuple[ProtocolState, int]] = {control_key(start): (start, 1)}
    seen: Set[Hashable] = set()
    depth = 0
    while frontier:
        next_frontier: Dict[Hashable, Tuple[ProtocolState, int]] = {}
        for key, (state, paths) in frontier.items():
            seen.add(key)
            if state.terminated is not None:
                if isinstance(state.terminated, Agreement):
                    report.terminal_agreements += paths
                elif isinstance(state.terminated, Failure):
                    report.terminal_failures += paths
                report.sequences += paths
                continue
            if depth >= total:
                report.nonterminating_paths += paths
                report.violations.append(f"depth {depth} exceeded without termination at {key}")
                continue
            agent = state.next_agent
            for msg in candidate_messages(state):
                legal = is_legal(state, agent, msg)
                try:
                    successor = apply_message(state, agent, msg)
                except ProtocolError:
                    if legal:
                        report.rejected_legal += 1
                        report.violations.append(f"legal {msg} refused at {key}")
                    continue
                if not legal:
                    report.accepted_illegal += 1
                    report.violations.append(f"illegal {msg} accepted at {key}")
                    continue
                report.transitions += 1
                succ_key = control_key(successor)
                previous: Optional[Tuple[ProtocolState, int]] = next_frontier.get(succ_key)
                count = paths + (previous[1] if previous else 0)
                next_frontier[succ_key] = (successor, count)
        frontier = next_frontier
        depth += 1
    report.reachable_states = len(seen)
    report.max_depth = depth - 1
    logger.info("Protocol model check finished",
                states=report.reachable_states,
                transitions=report.transitions,
                sequences=report.sequences,
                agreements=report.terminal_agreements,
                failures=report.terminal_failures,
                passed=report.passed)
    return report
