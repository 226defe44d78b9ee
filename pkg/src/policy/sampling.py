"""
Stochastic action selection and log-probability recomputation.

An action's log-probability sums only the components it uses: the move tag
always, the per-issue deal sketch for Propose/Counteroffer, the issue focus
for Argue/Reveal and the concession density for Propose/Counteroffer/Argue.
"""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.arena.actions import AgentAction, masked_choice
from src.arena.protocol import MoveTag, NEEDS_DEAL
from src.numerics import tensor as T
from src.numerics.tensor import Tensor

from .features import PolicyInput
from .hcn import ArchitectureFlags, PolicyOutput, forward
from .params import HcnParams

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
GAUSSIAN_ENTROPY_CONST = 0.5 * math.log(2.0 * math.pi * math.e)

USES_ISSUE = frozenset({MoveTag.ARGUE, MoveTag.REVEAL})
USES_CONCESSION = frozenset({MoveTag.PROPOSE, MoveTag.COUNTEROFFER, MoveTag.ARGUE})


def squash_log_jacobian(x: float) -> float:
    """log d sigmoid(x)/dx = log c + log(1 - c), evaluated stably"""
    return -abs(x) - 2.0 * math.log1p(math.exp(-abs(x)))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    ex = math.exp(x)
    return ex / (1.0 + ex)


def categorical_entropy(log_probs: Tensor) -> Tensor:
    """-sum p log p over the last axis of a (1, k) log-probability row"""
    return T.scale(T.sum(T.mul(T.exp(log_probs), log_probs)), -1.0)


def gaussian_log_prob(x: float, mean: Tensor, log_std: Tensor) -> Tensor:
    z = T.mul(T.sub(Tensor([[x]]), mean), T.exp(T.scale(log_std, -1.0)))
    return T.sub(T.scale(T.square(z), -0.5), T.add(log_std, LOG_SQRT_2PI))


def action_log_prob(output: PolicyOutput, action: AgentAction) -> Tensor:
    """Differentiable log-probability of a stored action, shape (1, 1)"""
    tag = int(action.tag)
    total = output.move_log_probs[:, tag:tag + 1]
    if action.tag in NEEDS_DEAL and action.sketch is not None:
        for m, index in enumerate(action.sketch[:output.num_issues]):
            total = T.add(total, output.value_log_probs[m][:, index:index + 1])
    if action.tag in USES_ISSUE:
        total = T.add(total, output.issue_log_probs[:, action.issue:action.issue + 1])
    if action.tag in USES_CONCESSION:
        density = gaussian_log_prob(action.raw_concession, output.conc_mean, output.conc_log_std)
        total = T.add(total, T.sub(density, squash_log_jacobian(action.raw_concession)))
    return total


def policy_entropy(output: PolicyOutput) -> Tensor:
    """Move, sketch and issue categorical entropies plus the concession Gaussian entropy, shape (1, 1)"""
    total = T.reshape(categorical_entropy(output.move_log_probs), (1, 1))
    for m in range(output.num_issues):
        total = T.add(total, categorical_entropy(output.value_log_probs[m]))
    total = T.add(total, categorical_entropy(output.issue_log_probs))
    return T.add(total, T.add(output.conc_log_std, GAUSSIAN_ENTROPY_CONST))


def sample_action(output: PolicyOutput, rng: Optional[np.random.Generator] = None,
                  deterministic: bool = False) -> Tuple[AgentAction, float, float]:
    """
    Draw an action (argmax and mean when deterministic).

    Returns:
        (action, log_prob, entropy)
    """
    chooser = None if deterministic else rng
    if chooser is None and not deterministic:
        raise ValueError("Sampling needs an rng unless deterministic")
    tag = MoveTag(masked_choice(output.move_log_probs.data[0], output.move_mask, chooser))

    sketch = []
    for m in range(output.num_issues):
        log_probs = output.value_log_probs[m].data[0]
        sketch.append(masked_choice(log_probs, log_probs > -1e8, chooser))
    issue_log_probs = output.issue_log_probs.data[0]
    issue = masked_choice(issue_log_probs, issue_log_probs > -1e8, chooser)

    mean = float(output.conc_mean.data[0, 0])
    std = math.exp(float(output.conc_log_std.data[0, 0]))
    x = mean if deterministic else float(rng.normal(mean, std))
    concession = min(1.0, max(0.0, _sigmoid(x)))

    action = AgentAction(tag=tag, concession=concession, issue=issue, sketch=tuple(sketch), raw_concession=x)
    log_prob = action_log_prob(output, action).item()
    entropy = policy_entropy(output).item()
    return action, log_prob, entropy


def evaluate_actions(inputs: Sequence[PolicyInput], actions: Sequence[AgentAction], params: HcnParams,
                     flags: ArchitectureFlags = ArchitectureFlags()) -> Tuple[Tensor, Tensor, Tensor]:
    """
    Recompute log-probabilities, entropies and values of stored actions.

    Returns three (B, 1) tensors connected to the parameters.
    """
    if len(inputs) != len(actions):
        raise ValueError(f"{len(inputs)} inputs for {len(actions)} actions")
    log_probs: List[Tensor] = []
    entropies: List[Tensor] = []
    values: List[Tensor] = []
    for policy_input, action in zip(inputs, actions):
        output = forward(policy_input, params, flags)
        log_probs.append(action_log_prob(output, action))
        entropies.append(policy_entropy(output))
        values.append(output.value)
    return T.concat(log_probs, axis=0), T.concat(entropies, axis=0), T.concat(values, axis=0)
