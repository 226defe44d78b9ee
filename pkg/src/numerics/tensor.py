"""
Dense float64 tensors with define-by-run reverse-mode differentiation.

Each op returns a new Tensor; when any input requires a gradient the result
remembers its parents and a backward closure. Nodes are numbered as they are
created, so sorting a graph by number gives a topological order.
"""
import itertools
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import ContractError, NumericFaultError, ShapeError

MAX_RANK = 3

_node_ids = itertools.count()

ArrayLike = Union[np.ndarray, float, int, Sequence]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


def _check_finite(op: str, data: np.ndarray) -> None:
    if not np.all(np.isfinite(data)):
        raise NumericFaultError(op)


class Tensor:
    def __init__(self, data: ArrayLike, requires_grad: bool = False, name: Optional[str] = None,
                 _parents: Tuple['Tensor', ...] = (), _backward: Optional[BackwardFn] = None,
                 _op: str = "leaf"):
        array = np.array(data, dtype=np.float64)
        if array.ndim > MAX_RANK:
            raise ShapeError(_op, array.shape)
        _check_finite(_op, array)
        self.data = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self.op = _op
        self._parents = _parents
        self._backward = _backward
        self.id = next(_node_ids)

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"<Tensor{label} shape={self.shape} op={self.op}>"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float('nan')

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> 'Tensor':
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        Graph.from_root(self).backward()

    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(as_tensor(other), self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(as_tensor(other), self)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(as_tensor(other), self)
    def __neg__(self): return scale(self, -1.0)
    def __matmul__(self, other): return matmul(self, other)
    def __getitem__(self, key): return slice_tensor(self, key)


def as_tensor(value: Union[Tensor, ArrayLike]) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(op: str, data: np.ndarray, parents: Sequence[Tensor], backward: BackwardFn) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=tuple(parents), _backward=backward, _op=op)
    return Tensor(data, _op=op)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


class Graph:
    """
    Reverse sweep over every node reachable from a scalar root.

    Nodes are kept in creation order; gradients of interior nodes are reset
    before each sweep while leaf gradients accumulate until zeroed.
    """

    def __init__(self, nodes: List[Tensor], root: Tensor):
        self.nodes = nodes
        self.root = root

    @classmethod
    def from_root(cls, root: Tensor) -> 'Graph':
        seen = {}
        stack = [root]
        while stack:
            node = stack.pop()
            if node.id in seen:
                continue
            seen[node.id] = node
            stack.extend(p for p in node._parents if p.requires_grad)
        nodes = [seen[k] for k in sorted(seen)]
        return cls(nodes, root)

    def leaves(self) -> List[Tensor]:
        return [n for n in self.nodes if n.is_leaf and n.requires_grad]

    def backward(self) -> None:
        root = self.root
        if root.data.size != 1:
            raise ContractError(f"backward needs a scalar root, got shape {root.shape}")
        if not root.requires_grad:
            return
        for node in self.nodes:
            if not node.is_leaf:
                node.grad = None
        root.grad = np.ones_like(root.data)
        for node in reversed(self.nodes):
            if node.is_leaf or node.grad is None:
                continue
            grads = node._backward(node.grad)
            for parent, grad in zip(node._parents, grads):
                if grad is None or not parent.requires_grad:
                    continue
                parent.grad = grad.copy() if parent.grad is None else parent.grad + grad


def backward(root: Tensor) -> None:
    Graph.from_root(root).backward()


def zero_grad(tensors: Iterable[Tensor]) -> None:
    for t in tensors:
        t.grad = None


# ---------- ops ----------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape)
    if a.ndim == 3 and b.ndim == 3 and a.shape[0] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    data = np.matmul(a.data, b.data)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2)) if a.requires_grad else None
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g) if b.requires_grad else None
        if ga is not None:
            ga = _unbroadcast(ga, a.shape)
        if gb is not None:
            gb = _unbroadcast(gb, b.shape)
        return ga, gb

    return _result("matmul", data, (a, b), backward)


def add(a: Tensor, b: Union[Tensor, ArrayLike]) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result("add", a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Union[Tensor, ArrayLike]) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result("sub", a.data - b.data, (a, b), backward)


def mul(a: Tensor, b: Union[Tensor, ArrayLike]) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _result("mul", a.data * b.data, (a, b), backward)


def scale(a: Tensor, factor: float) -> Tensor:
    a = as_tensor(a)
    return _result("scale", a.data * factor, (a,), lambda g: (g * factor,))


def tanh(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _result("tanh", out, (a,), lambda g: (g * (1.0 - out * out),))


def relu(a: Tensor) -> Tensor:
    a = as_tensor(a)
    positive = a.data > 0
    return _result("relu", np.where(positive, a.data, 0.0), (a,), lambda g: (g * positive,))


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def sigmoid(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = _stable_sigmoid(a.data)
    return _result("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def exp(a: Tensor) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over='ignore'):
        out = np.exp(a.data)
    _check_finite("exp", out)
    return _result("exp", out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    a = as_tensor(a)
    with np.errstate(divide='ignore', invalid='ignore'):
        out = np.log(a.data)
    _check_finite("log", out)
    return _result("log", out, (a,), lambda g: (g / a.data,))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _result("softmax", out, (a,), backward)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    probs = np.exp(out)

    def backward(g):
        return (g - probs * g.sum(axis=axis, keepdims=True),)

    return _result("log_softmax", out, (a,), backward)


def sum(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _result("sum", out, (a,), backward)


def mean(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else a.shape[axis]
    return scale(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat", ())
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("concat", tensors[0].shape, tensors[-1].shape) from None
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(np.take(g, np.arange(lo, hi), axis=axis) for lo, hi in zip(bounds[:-1], bounds[1:]))

    return _result("concat", out, tensors, backward)


def slice_tensor(a: Tensor, key) -> Tensor:
    a = as_tensor(a)
    out = a.data[key]

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, key, g)
        return (full,)

    return _result("slice", np.array(out), (a,), backward)


def mask_fill(a: Tensor, mask: ArrayLike, value: float) -> Tensor:
    """Replace entries where mask is True by a constant"""
    a = as_tensor(a)
    mask_arr = np.broadcast_to(np.asarray(mask, dtype=bool), a.shape)
    out = np.where(mask_arr, value, a.data)
    return _result("mask_fill", out, (a,), lambda g: (np.where(mask_arr, 0.0, g),))


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", a.shape, tuple(shape)) from None
    return _result("reshape", out, (a,), lambda g: (g.reshape(a.shape),))


def transpose_last(a: Tensor) -> Tensor:
    a = as_tensor(a)
    if a.ndim < 2:
        raise ShapeError("transpose_last", a.shape)
    return _result("transpose", np.swapaxes(a.data, -1, -2), (a,), lambda g: (np.swapaxes(g, -1, -2),))


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    a = as_tensor(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return _result("clip", np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,))


def minimum(a: Tensor, b: Union[Tensor, ArrayLike]) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("minimum", a, b)
    take_a = a.data <= b.data

    def backward(g):
        return _unbroadcast(np.where(take_a, g, 0.0), a.shape), _unbroadcast(np.where(take_a, 0.0, g), b.shape)

    return _result("minimum", np.minimum(a.data, b.data), (a, b), backward)


def square(a: Tensor) -> Tensor:
    a = as_tensor(a)
    return _result("square", a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))
