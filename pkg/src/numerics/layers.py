"""Building blocks composed from tensor ops: dense layers, a 2-layer MLP and an LSTM cell."""
from typing import Callable, Tuple

import numpy as np

from src.errors import ShapeError

from . import tensor as T
from .tensor import Tensor


def init_matrix(rng: np.random.Generator, fan_in: int, fan_out: int, gain: float = 1.0) -> np.ndarray:
    """Glorot-uniform initial weights"""
    limit = gain * np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def linear(x: Tensor, w: Tensor, b: Tensor = None) -> Tensor:
    out = T.matmul(x, w)
    return out if b is None else T.add(out, b)


def mlp2(x: Tensor, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor,
         activation: Callable[[Tensor], Tensor] = T.tanh) -> Tensor:
    """Two dense layers with the activation after each"""
    return activation(linear(activation(linear(x, w1, b1)), w2, b2))


def lstm_cell(x: Tensor, h: Tensor, c: Tensor, wx: Tensor, wh: Tensor, b: Tensor) -> Tuple[Tensor, Tensor]:
    """
    One LSTM step on row vectors.

    Gate blocks in the 4d pre-activation are ordered i, f, g, o:
    c' = f * c + i * g, h' = o * tanh(c').

    Args:
        x: Input, shape (batch, d_in)
        h: Hidden state, shape (batch, d)
        c: Cell state, shape (batch, d)
        wx: Input weights, shape (d_in, 4d)
        wh: Recurrent weights, shape (d, 4d)
        b: Bias, shape (1, 4d)

    Returns:
        (h', c')
    """
    d = h.shape[-1]
    if wx.shape[-1] != 4 * d or wh.shape != (d, 4 * d) or c.shape != h.shape:
        raise ShapeError("lstm_cell", wx.shape, wh.shape)
    z = T.add(T.add(T.matmul(x, wx), T.matmul(h, wh)), b)
    i = T.sigmoid(z[:, 0:d])
    f = T.sigmoid(z[:, d:2 * d])
    g = T.tanh(z[:, 2 * d:3 * d])
    o = T.sigmoid(z[:, 3 * d:4 * d])
    c_next = T.add(T.mul(f, c), T.mul(i, g))
    h_next = T.mul(o, T.tanh(c_next))
    return h_next, c_next
