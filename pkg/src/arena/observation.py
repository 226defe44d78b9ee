"""
Per-agent observations.

The vector concatenates, in order: own weights (M), own reservation (1),
phase one-hot (5), round fraction (1), standing-proposal one-hot per issue
(sum of value counts), own utility of the standing proposal (1), then per
opponent a behavior block (last tag one-hot 7, last Argue direction and
strength 2, acceptance flag 1) and finally per opponent the flattened
weight-bucket posterior (B*M). Opponents are ordered by id, self skipped.
"""
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from src.rewards.beliefs import BeliefState, estimated_utility, expected_weights, summary_block

from .domain import Scenario, utility
from .protocol import (
    Accept, Argue, Counteroffer, LogEntry, Message, MoveTag, NUM_TAGS, Phase, Propose, ProtocolState, Reject,
    Reveal, legal_moves,
)

NUM_PHASES = len(Phase)
BEHAVIOR_SIZE = NUM_TAGS + 3
HISTORY_FEATURES = 6
DEFAULT_HISTORY = 16


@dataclass(frozen=True)
class ObservationLayout:
    """Offsets of every block inside the observation vector"""
    num_agents: int
    value_counts: Tuple[int, ...]
    num_buckets: int = 3

    @property
    def num_issues(self) -> int:
        return len(self.value_counts)

    @property
    def num_opponents(self) -> int:
        return self.num_agents - 1

    @property
    def standing_size(self) -> int:
        return sum(self.value_counts)

    @property
    def self_size(self) -> int:
        return self.num_issues + 1 + NUM_PHASES + 1 + self.standing_size + 1

    @property
    def belief_size(self) -> int:
        return self.num_buckets * self.num_issues

    @property
    def length(self) -> int:
        return self.self_size + self.num_opponents * (BEHAVIOR_SIZE + self.belief_size)

    @property
    def behavior_offset(self) -> int:
        return self.self_size

    @property
    def belief_offset(self) -> int:
        return self.self_size + self.num_opponents * BEHAVIOR_SIZE

    def behavior_slice(self, k: int) -> slice:
        start = self.behavior_offset + k * BEHAVIOR_SIZE
        return slice(start, start + BEHAVIOR_SIZE)

    def belief_slice(self, k: int) -> slice:
        start = self.belief_offset + k * self.belief_size
        return slice(start, start + self.belief_size)


def observation_length(num_agents: int, value_counts: Sequence[int], num_buckets: int = 3) -> int:
    return ObservationLayout(num_agents, tuple(value_counts), num_buckets).length


@dataclass(frozen=True)
class Observation:
    """
    What one agent sees at the start of a round.

    opponents holds public feature rows for every other agent in id order:
    belief-estimated weights, reservation 0, the shared phase/round/standing
    blocks and the belief-estimated utility of the standing proposal. It has
    the same width as the self block so one encoder serves both.
    history holds the last H public messages as continuous features with
    their tags in history_tags.
    """
    agent: int
    layout: ObservationLayout
    vector: np.ndarray
    legal_mask: Tuple[bool, ...]
    opponents: np.ndarray
    history: np.ndarray
    history_tags: Tuple[int, ...]

    @property
    def self_block(self) -> np.ndarray:
        return self.vector[:self.layout.self_size]

    def behavior_block(self, k: int) -> np.ndarray:
        return self.vector[self.layout.behavior_slice(k)]

    def belief_block(self, k: int) -> np.ndarray:
        return self.vector[self.layout.belief_slice(k)]


def opponents_of(agent: int, num_agents: int) -> List[int]:
    return [j for j in range(num_agents) if j != agent]


def _shared_blocks(state: ProtocolState, layout: ObservationLayout) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    phase = np.zeros(NUM_PHASES)
    phase[int(state.phase)] = 1.0
    round_frac = np.array([state.round / state.total_budget])
    standing = np.zeros(layout.standing_size)
    record = state.standing
    if record is not None:
        offset = 0
        for count, index in zip(layout.value_counts, record.deal):
            standing[offset + index] = 1.0
            offset += count
    return phase, round_frac, standing


def _referenced_deal(state: ProtocolState, msg: Message):
    if isinstance(msg, (Propose, Counteroffer)):
        return msg.deal
    if isinstance(msg, (Accept, Reject)) and 0 <= msg.proposal_id < len(state.proposal_log):
        return state.proposal_log[msg.proposal_id].deal
    return None


def last_messages(state: ProtocolState) -> Dict[int, LogEntry]:
    latest: Dict[int, LogEntry] = {}
    for entry in state.message_log:
        latest[entry.agent] = entry
    return latest


def _behavior_block(state: ProtocolState, opponent: int, latest: Dict[int, LogEntry],
                    last_argue: Dict[int, Argue]) -> np.ndarray:
    block = np.zeros(BEHAVIOR_SIZE)
    entry = latest.get(opponent)
    if entry is not None:
        block[int(entry.message.tag)] = 1.0
    argue = last_argue.get(opponent)
    if argue is not None:
        block[NUM_TAGS] = float(int(argue.direction))
        block[NUM_TAGS + 1] = argue.strength
    if state.standing is not None and opponent in state.acceptances:
        block[NUM_TAGS + 2] = 1.0
    return block


def message_features(state: ProtocolState, entry: LogEntry, agent: int, scenario: Scenario) -> np.ndarray:
    """[is_self, argue direction, argue strength, reveal bucket fraction, own utility of referenced deal, round fraction]"""
    msg = entry.message
    features = np.zeros(HISTORY_FEATURES)
    features[0] = 1.0 if entry.agent == agent else 0.0
    if isinstance(msg, Argue):
        features[1] = float(int(msg.direction))
        features[2] = msg.strength
    if isinstance(msg, Reveal):
        features[3] = msg.bucket / max(1, state.num_buckets - 1)
    deal = _referenced_deal(state, msg)
    if deal is not None:
        features[4] = utility(scenario.profiles[agent], deal)
    features[5] = entry.round / state.total_budget
    return features


def build_observation(scenario: Scenario, state: ProtocolState, agent: int, belief: BeliefState,
                      history_window: int = DEFAULT_HISTORY) -> Observation:
    """Observation of `agent` for the current state"""
    layout = ObservationLayout(scenario.num_agents, scenario.value_counts, state.num_buckets)
    profile = scenario.profiles[agent]
    phase, round_frac, standing = _shared_blocks(state, layout)
    record = state.standing
    own_standing = utility(profile, record.deal) if record is not None else 0.0

    latest = last_messages(state)
    last_argue: Dict[int, Argue] = {}
    for entry in state.message_log:
        if isinstance(entry.message, Argue):
            last_argue[entry.agent] = entry.message

    parts: List[np.ndarray] = [
        np.asarray(profile.weights),
        np.array([profile.reservation]),
        phase,
        round_frac,
        standing,
        np.array([own_standing]),
    ]
    opponents = opponents_of(agent, scenario.num_agents)
    for j in opponents:
        parts.append(_behavior_block(state, j, latest, last_argue))
    for j in opponents:
        parts.append(summary_block(belief, j))
    vector = np.concatenate(parts)

    public_rows = []
    for j in opponents:
        estimated = estimated_utility(belief, j, record.deal) if record is not None else 0.0
        public_rows.append(np.concatenate([
            expected_weights(belief, j), [0.0], phase, round_frac, standing, [estimated],
        ]))
    public = np.stack(public_rows) if public_rows else np.zeros((0, layout.self_size))

    window = state.message_log[-history_window:] if history_window > 0 else ()
    if window:
        history = np.stack([message_features(state, entry, agent, scenario) for entry in window])
    else:
        history = np.zeros((0, HISTORY_FEATURES))
    history_tags = tuple(int(entry.message.tag) for entry in window)

    if state.terminated is None:
        mask = legal_moves(state, agent).mask()
    else:
        mask = tuple(tag is MoveTag.PASS for tag in MoveTag)

    return Observation(
        agent=agent,
        layout=layout,
        vector=vector,
        legal_mask=mask,
        opponents=public,
        history=history,
        history_tags=history_tags,
    )
