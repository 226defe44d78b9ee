"""Central finite-difference checks for reverse-mode gradients."""
from typing import Callable, Dict, Sequence, Tuple

import numpy as np

from .tensor import Tensor, backward, zero_grad

DEFAULT_STEP = 1e-5
NORM_FLOOR = 1e-6


def numeric_gradient(fn: Callable[[], Tensor], target: Tensor, step: float = DEFAULT_STEP) -> np.ndarray:
    """d fn() / d target by central differences, perturbing target.data in place"""
    grad = np.zeros_like(target.data)
    flat = target.data.reshape(-1)
    out = grad.reshape(-1)
    for k in range(flat.size):
        original = flat[k]
        flat[k] = original + step
        plus = fn().item()
        flat[k] = original - step
        minus = fn().item()
        flat[k] = original
        out[k] = (plus - minus) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    diff = np.linalg.norm(analytic - numeric)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), NORM_FLOOR)
    return float(diff / scale)


def check_gradients(fn: Callable[[], Tensor], inputs: Sequence[Tensor],
                    step: float = DEFAULT_STEP) -> Dict[str, float]:
    """
    Compare analytic and numeric gradients of a scalar function.

    Args:
        fn: Builds the scalar output from `inputs` afresh on every call
        inputs: Leaf tensors with requires_grad set
        step: Finite-difference step

    Returns:
        Relative error per input, keyed by name (or position)
    """
    zero_grad(inputs)
    backward(fn())
    errors = {}
    for k, tensor in enumerate(inputs):
        analytic = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        numeric = numeric_gradient(fn, tensor, step)
        errors[tensor.name or str(k)] = relative_error(analytic, numeric)
    return errors


# tolerances for single ops and for recurrent chains
OP_TOLERANCE = 1e-4
CHAIN_TOLERANCE = 1e-3


def op_battery(seed: int) -> Dict[str, Tuple[float, float]]:
    """
    Gradient errors of every tensor op and a 3-step LSTM chain.

    Returns op name -> (worst relative error, tolerance).
    """
    from . import tensor as T
    from .layers import lstm_cell

    rng = np.random.default_rng(seed)

    def leaf(*dims, name, positive=False):
        data = rng.normal(size=dims)
        if positive:
            data = np.abs(data) + 0.5
        return Tensor(data, requires_grad=True, name=name)

    a, b = leaf(3, 4, name='a'), leaf(3, 4, name='b')
    m = leaf(4, 2, name='m')
    p = leaf(3, 4, name='p', positive=True)
    row = leaf(1, 4, name='row')
    w = Tensor(rng.normal(size=(3, 4)))
    mask = np.zeros((3, 4), dtype=bool)
    mask[:, -1] = True

    def weighted(x):
        weights = Tensor(np.linspace(-1.0, 1.0, int(np.prod(x.shape))).reshape(x.shape))
        return T.sum(T.mul(x, weights))

    cases: Dict[str, Tuple[Callable[[], Tensor], Sequence[Tensor]]] = {
        'matmul': (lambda: weighted(T.matmul(a, m)), [a, m]),
        'add_broadcast': (lambda: weighted(T.add(a, row)), [a, row]),
        'sub': (lambda: weighted(T.sub(a, b)), [a, b]),
        'mul': (lambda: weighted(T.mul(a, b)), [a, b]),
        'scale': (lambda: weighted(T.scale(a, -2.5)), [a]),
        'tanh': (lambda: weighted(T.tanh(a)), [a]),
        'relu': (lambda: weighted(T.relu(a)), [a]),
        'sigmoid': (lambda: weighted(T.sigmoid(a)), [a]),
        'exp': (lambda: weighted(T.exp(a)), [a]),
        'log': (lambda: weighted(T.log(p)), [p]),
        'softmax': (lambda: weighted(T.softmax(a, axis=-1)), [a]),
        'log_softmax': (lambda: weighted(T.log_softmax(a, axis=-1)), [a]),
        'sum_axis': (lambda: weighted(T.sum(a, axis=0, keepdims=True)), [a]),
        'mean': (lambda: weighted(T.mean(a, axis=-1, keepdims=True)), [a]),
        'concat': (lambda: weighted(T.concat([a, b], axis=-1)), [a, b]),
        'slice': (lambda: weighted(a[:, 1:3]), [a]),
        'mask_fill': (lambda: weighted(T.mask_fill(a, mask, 0.0)), [a]),
        'reshape': (lambda: weighted(T.reshape(a, (4, 3))), [a]),
        'transpose': (lambda: weighted(T.transpose_last(a)), [a]),
        'clip': (lambda: weighted(T.clip(a, -0.5, 0.5)), [a]),
        'minimum': (lambda: weighted(T.minimum(a, b)), [a, b]),
        'square': (lambda: weighted(T.square(a)), [a]),
        'weighted_sum': (lambda: T.sum(T.mul(a, w)), [a]),
    }

    d, d_in = 3, 2
    x_seq = [leaf(1, d_in, name=f'x{t}') for t in range(3)]
    wx, wh = leaf(d_in, 4 * d, name='wx'), leaf(d, 4 * d, name='wh')
    bias = leaf(1, 4 * d, name='bias')

    def chain():
        h = Tensor(np.zeros((1, d)))
        c = Tensor(np.zeros((1, d)))
        for x in x_seq:
            h, c = lstm_cell(x, h, c, wx, wh, bias)
        return weighted(T.concat([h, c], axis=-1))

    results = {}
    for name, (fn, inputs) in cases.items():
        results[name] = (max(check_gradients(fn, inputs).values()), OP_TOLERANCE)
    results['lstm_chain'] = (max(check_gradients(chain, x_seq + [wx, wh, bias]).values()), CHAIN_TOLERANCE)
    return results
