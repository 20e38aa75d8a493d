"""Dense float64 arrays with reverse-mode gradients.

A ``Tensor`` wraps a ``numpy`` float64 array. Ops on tensors record backward
closures on the implicit tape (the op graph hanging off each result), and
``backward()`` on a scalar walks that graph once in reverse topological
order, accumulating into ``.grad`` of every tensor that requires gradients.

Only the ops the model needs are provided; there is no broadcasting beyond
what those ops use, and no public general-purpose autodiff API.
"""

from __future__ import annotations

import contextlib

import numpy as np

from .errors import ShapeError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (inference, finite differences)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._backward = None
        self._prev = ()

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def zero_grad(self):
        self.grad = None

    def accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def make_node(data: np.ndarray, parents: tuple, backward) -> Tensor:
    """Result tensor wired into the tape.

    `backward` receives the output gradient and must call ``accumulate`` on
    each parent that requires a gradient. When recording is off, or no parent
    needs gradients, the closure is dropped and the result is a plain leaf.
    """
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._prev = tuple(p for p in parents if p.requires_grad)
        out._backward = backward
    return out


def backward(root: Tensor):
    """Backpropagate from a scalar tensor through the recorded graph."""
    if root.data.size != 1:
        raise ShapeError(f"backward() needs a scalar root, got shape {root.data.shape}")
    # Iterative topo sort: deep graphs must not hit the recursion limit.
    topo = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._prev:
            if id(p) not in visited:
                stack.append((p, False))
    root.accumulate(np.ones_like(root.data))
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient back down to `shape` (inverse of numpy broadcasting)."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def back(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.data.shape))

    return make_node(out, (a, b), back)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data

    def back(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(-g, b.data.shape))

    return make_node(out, (a, b), back)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data

    def back(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.data, b.data.shape))

    return make_node(out, (a, b), back)


def scale(a: Tensor, s: float) -> Tensor:
    out = a.data * s

    def back(g):
        a.accumulate(g * s)

    return make_node(out, (a,), back)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(
            f"matmul needs rank >= 2 operands, got {a.data.shape} @ {b.data.shape}"
        )
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul inner dims disagree: {a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data

    def back(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g @ b.data.swapaxes(-1, -2), a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(a.data.swapaxes(-1, -2) @ g, b.data.shape))

    return make_node(out, (a, b), back)


def transpose(a: Tensor) -> Tensor:
    out = a.data.T.copy()

    def back(g):
        a.accumulate(g.T)

    return make_node(out, (a,), back)


def swapaxes(a: Tensor, ax1: int, ax2: int) -> Tensor:
    out = np.ascontiguousarray(a.data.swapaxes(ax1, ax2))

    def back(g):
        a.accumulate(g.swapaxes(ax1, ax2))

    return make_node(out, (a,), back)


def reshape(a: Tensor, shape: tuple) -> Tensor:
    out = a.data.reshape(shape)

    def back(g):
        a.accumulate(g.reshape(a.data.shape))

    return make_node(out, (a,), back)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def back(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t.accumulate(g[tuple(idx)])

    return make_node(out, tuple(tensors), back)


def mean(a: Tensor) -> Tensor:
    out = np.asarray(a.data.mean())
    n = a.data.size

    def back(g):
        a.accumulate(np.full_like(a.data, float(g) / n))

    return make_node(out, (a,), back)


def total(a: Tensor) -> Tensor:
    out = np.asarray(a.data.sum())

    def back(g):
        a.accumulate(np.full_like(a.data, float(g)))

    return make_node(out, (a,), back)
