"""
Pads observations into the policy's shape envelope.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.arena.observation import BEHAVIOR_SIZE, NUM_PHASES, Observation, ObservationLayout
from src.arena.protocol import NUM_TAGS, MoveTag
from src.errors import CheckpointError

from .params import PolicyShape


@dataclass(frozen=True)
class PolicyInput:
    """Network-ready arrays for one decision"""
    env: np.ndarray                   # (1, env_size)
    context: np.ndarray               # (1, context_size)
    history_tags: Tuple[int, ...]
    history: np.ndarray               # (H, HISTORY_FEATURES)
    opponents_env: np.ndarray         # (N-1, env_size)
    opponents_context: np.ndarray     # (N-1, context_size)
    move_mask: np.ndarray             # (7,) bool
    issue_mask: np.ndarray            # (max_issues,) bool
    value_mask: np.ndarray            # (max_issues, max_values) bool
    num_issues: int

    @property
    def num_opponents(self) -> int:
        return self.opponents_env.shape[0]


def pad_self_block(block: np.ndarray, layout: ObservationLayout, shape: PolicyShape) -> np.ndarray:
    """Re-lay a self-shaped block (own or public) into the envelope"""
    m = layout.num_issues
    out = np.zeros(shape.self_size)
    out[:m] = block[:m]
    pos_in, pos_out = m, shape.max_issues
    fixed = 1 + NUM_PHASES + 1
    out[pos_out:pos_out + fixed] = block[pos_in:pos_in + fixed]
    pos_in += fixed
    pos_out += fixed
    for count in layout.value_counts:
        out[pos_out:pos_out + count] = block[pos_in:pos_in + count]
        pos_in += count
        pos_out += shape.max_values
    pos_out += (shape.max_issues - m) * shape.max_values
    out[pos_out] = block[pos_in]
    return out


def pad_belief_block(block: np.ndarray, layout: ObservationLayout, shape: PolicyShape) -> np.ndarray:
    grid = np.zeros((shape.max_issues, shape.num_buckets))
    grid[:layout.num_issues] = block.reshape(layout.num_issues, layout.num_buckets)
    return grid.reshape(-1)


def _own_last_message(observation: Observation) -> np.ndarray:
    """Behavior block for the observer built from its own latest message in the window"""
    block = np.zeros(BEHAVIOR_SIZE)
    for tag, features in zip(reversed(observation.history_tags), observation.history[::-1]):
        if features[0] == 1.0:
            block[tag] = 1.0
            if tag == int(MoveTag.ARGUE):
                block[NUM_TAGS] = features[1]
                block[NUM_TAGS + 1] = features[2]
            break
    return block


def build_policy_input(observation: Observation, shape: PolicyShape) -> PolicyInput:
    layout = observation.layout
    if not shape.admits(layout.num_agents, layout.value_counts):
        raise CheckpointError(
            f"Observation for {layout.num_agents} agents, value counts {layout.value_counts} "
            f"lies outside the policy envelope"
        )
    if layout.num_buckets != shape.num_buckets:
        raise CheckpointError(f"Policy expects {shape.num_buckets} buckets, scenario uses {layout.num_buckets}")

    env = np.concatenate([pad_self_block(observation.self_block, layout, shape), _own_last_message(observation)])
    opponents_env = []
    opponents_context = []
    for k in range(layout.num_opponents):
        opponents_env.append(np.concatenate([
            pad_self_block(observation.opponents[k], layout, shape), observation.behavior_block(k),
        ]))
        opponents_context.append(pad_belief_block(observation.belief_block(k), layout, shape))
    opp_context = np.stack(opponents_context) if opponents_context else np.zeros((0, shape.context_size))
    context = opp_context.mean(axis=0, keepdims=True) if opponents_context else np.zeros((1, shape.context_size))

    history = observation.history[-shape.history:] if shape.history > 0 else observation.history[:0]
    tags = observation.history_tags[-shape.history:] if shape.history > 0 else ()

    value_mask = np.zeros((shape.max_issues, shape.max_values), dtype=bool)
    for m, count in enumerate(layout.value_counts):
        value_mask[m, :count] = True
    issue_mask = np.zeros(shape.max_issues, dtype=bool)
    issue_mask[:layout.num_issues] = True

    return PolicyInput(
        env=env.reshape(1, -1),
        context=context,
        history_tags=tuple(tags),
        history=np.asarray(history).reshape(-1, observation.history.shape[1]),
        opponents_env=np.stack(opponents_env) if opponents_env else np.zeros((0, shape.env_size)),
        opponents_context=opp_context,
        move_mask=np.asarray(observation.legal_mask, dtype=bool),
        issue_mask=issue_mask,
        value_mask=value_mask,
        num_issues=layout.num_issues,
    )
