"""Float64 tensors with reverse-mode differentiation, layers, Adam and checkpoints."""

from .tensor import Graph, Tensor, backward, zero_grad

__all__ = ['Graph', 'Tensor', 'backward', 'zero_grad']
