"""
Hierarchical consensus network.

Micro level: per-agent encoder and multi-head attention over the other
agents. Meso level: a coalition gate over opponents that biases attention
scores. Macro level: a stance (firm, neutral, conceding) that biases move
logits and shifts the concession mean.
"""
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.arena.actions import MASKED_LOGIT
from src.numerics import tensor as T
from src.numerics.layers import linear, lstm_cell, mlp2
from src.numerics.tensor import Tensor

from .features import PolicyInput
from .params import HcnParams

LOG_STD_MIN, LOG_STD_MAX = -5.0, 1.0
STANCE_SHIFT = np.array([[-0.2], [0.0], [0.2]])
FIRM, NEUTRAL, CONCEDING = 0, 1, 2


@dataclass(frozen=True)
class ArchitectureFlags:
    """Switches used by the ablation harness"""
    hierarchy: bool = True
    attention: bool = True


@dataclass
class PolicyOutput:
    move_log_probs: Tensor            # (1, 7), illegal tags at about -1e9
    value_log_probs: List[Tensor]     # per envelope issue, (1, max_values)
    issue_log_probs: Tensor           # (1, max_issues)
    conc_mean: Tensor                 # (1, 1), pre-squash
    conc_log_std: Tensor              # (1, 1)
    stance: Tensor                    # (1, 3)
    coalition: Tensor                 # (1, N-1)
    value: Tensor                     # (1, 1)
    attention: np.ndarray             # (heads, N-1)
    move_mask: np.ndarray
    num_issues: int

    @property
    def move_probs(self) -> np.ndarray:
        return np.exp(self.move_log_probs.data[0])


def message_embedding(tag: int, features: np.ndarray, params: HcnParams) -> Tensor:
    """Tag embedding plus projected continuous features, tanh squashed"""
    embed = params['msg_embed'][tag:tag + 1]
    projected = T.matmul(Tensor(features.reshape(1, -1)), params['msg_proj'])
    return T.tanh(T.add(T.add(embed, projected), params['msg_b']))


def encode_history(history_tags: Sequence[int], history: np.ndarray, params: HcnParams) -> Tensor:
    d = params.shape.d
    h = Tensor(np.zeros((1, d)))
    c = Tensor(np.zeros((1, d)))
    for tag, features in zip(history_tags, history):
        x = message_embedding(int(tag), features, params)
        h, c = lstm_cell(x, h, c, params['lstm_wx'], params['lstm_wh'], params['lstm_b'])
    return h


def encode(env: np.ndarray, history_tags: Sequence[int], history: np.ndarray, context: np.ndarray,
           params: HcnParams) -> Tensor:
    """
    Environment MLP plus context projection plus the message LSTM state, per row.

    An empty history contributes the LSTM zero state, which is 0.
    """
    env_term = T.matmul(mlp2(Tensor(env), params['env_w1'], params['env_b1'],
                             params['env_w2'], params['env_b2']), params['w_e'])
    context_term = T.matmul(Tensor(context), params['w_c'])
    z = T.add(env_term, context_term)
    if len(history_tags):
        z = T.add(z, encode_history(history_tags, history, params))
    return z


def attend(z: Tensor, others: Tensor, log_gate: Optional[Tensor], params: HcnParams,
           flags: ArchitectureFlags = ArchitectureFlags()) -> Tuple[Tensor, np.ndarray]:
    """
    Multi-head attention of one agent over the other agents' encodings.

    log_gate (1, n) is added to every head's scores. Returns the attended
    feature (1, d) and the attention weights (heads, n).
    """
    shape = params.shape
    n = others.shape[0]
    if n == 0:
        return Tensor(np.zeros((1, shape.d))), np.zeros((shape.heads, 0))
    scale = 1.0 / math.sqrt(shape.head_dim)
    heads = []
    weights = []
    for k in range(shape.heads):
        values = T.matmul(others, params[f'attn_v{k}'])
        if not flags.attention:
            heads.append(T.mean(values, axis=0, keepdims=True))
            weights.append(np.full(n, 1.0 / n))
            continue
        query = T.matmul(z, params[f'attn_q{k}'])
        keys = T.matmul(others, params[f'attn_k{k}'])
        scores = T.scale(T.matmul(query, T.transpose_last(keys)), scale)
        if log_gate is not None:
            scores = T.add(scores, log_gate)
        attn = T.softmax(scores, axis=-1)
        heads.append(T.matmul(attn, values))
        weights.append(attn.data[0].copy())
    combined = T.concat(heads, axis=-1)
    out = mlp2(combined, params['post_w1'], params['post_b1'], params['post_w2'], params['post_b2'])
    return out, np.stack(weights)


def _masked_log_softmax(logits: Tensor, mask: np.ndarray) -> Tensor:
    return T.log_softmax(T.mask_fill(logits, ~mask.reshape(1, -1), MASKED_LOGIT), axis=-1)


def forward(inputs: PolicyInput, params: HcnParams, flags: ArchitectureFlags = ArchitectureFlags(),
            stance_override: Optional[Sequence[float]] = None) -> PolicyOutput:
    """Full policy evaluation for one decision"""
    shape = params.shape
    z = encode(inputs.env, inputs.history_tags, inputs.history, inputs.context, params)
    n = inputs.num_opponents
    if n > 0:
        others = encode(inputs.opponents_env, (), inputs.history[:0], inputs.opponents_context, params)
    else:
        others = Tensor(np.zeros((0, shape.d)))

    # meso: coalition gate
    if n == 0:
        log_gate = None
        coalition = Tensor(np.zeros((1, 0)))
    elif flags.hierarchy:
        gate_logits = T.reshape(linear(others, params['coalition_w'], params['coalition_b']), (1, n))
        log_gate = T.log_softmax(gate_logits, axis=-1)
        coalition = T.exp(log_gate)
    else:
        log_gate = Tensor(np.full((1, n), -math.log(n)))
        coalition = Tensor(np.full((1, n), 1.0 / n))

    attended, attention = attend(z, others, log_gate, params, flags)
    joint = T.concat([z, attended], axis=-1)

    # macro: stance
    if stance_override is not None:
        stance = Tensor(np.asarray(stance_override, dtype=float).reshape(1, 3))
    elif flags.hierarchy:
        stance = T.softmax(linear(joint, params['stance_w'], params['stance_b']), axis=-1)
    else:
        stance = Tensor(np.array([[0.0, 1.0, 0.0]]))

    move_logits = T.add(linear(joint, params['move_w'], params['move_b']),
                        T.matmul(stance, params['stance_bias']))
    move_log_probs = _masked_log_softmax(move_logits, inputs.move_mask)

    value_log_probs = []
    for m in range(shape.max_issues):
        logits = linear(joint, params[f'value_issue_w{m}'], params[f'value_issue_b{m}'])
        mask = inputs.value_mask[m] if inputs.value_mask[m].any() else np.ones(shape.max_values, dtype=bool)
        value_log_probs.append(_masked_log_softmax(logits, mask))
    issue_log_probs = _masked_log_softmax(linear(joint, params['issue_w'], params['issue_b']), inputs.issue_mask)

    conc = linear(joint, params['conc_w'], params['conc_b'])
    conc_mean = T.add(conc[:, 0:1], T.matmul(stance, Tensor(STANCE_SHIFT)))
    conc_log_std = T.clip(conc[:, 1:2], LOG_STD_MIN, LOG_STD_MAX)
    value = linear(joint, params['value_w'], params['value_b'])

    return PolicyOutput(
        move_log_probs=move_log_probs,
        value_log_probs=value_log_probs,
        issue_log_probs=issue_log_probs,
        conc_mean=conc_mean,
        conc_log_std=conc_log_std,
        stance=stance,
        coalition=coalition,
        value=value,
        attention=attention,
        move_mask=inputs.move_mask,
        num_issues=inputs.num_issues,
    )
