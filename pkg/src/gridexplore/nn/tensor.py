# Reverse-mode automatic differentiation over dense numpy arrays.
# Dynamic graph: every op records a backward closure; Tensor.backward()
# replays them in reverse topological order, accumulating into .grad.
from __future__ import annotations

import numpy as np


class GraphError(Exception):
    """Shape mismatch or illegal use of the computation graph."""


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class no_grad:
    """Context manager: ops inside build no graph (pure eval forward)."""

    def __enter__(self):
        self._prev = Tensor._grad_enabled
        Tensor._grad_enabled = False

    def __exit__(self, *args):
        Tensor._grad_enabled = self._prev


class Tensor:
    _grad_enabled = True

    __slots__ = ("data", "grad", "_backward", "_prev")

    def __init__(self, data, _prev=()):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data)
        self.grad = None
        self._backward = None
        self._prev = _prev if Tensor._grad_enabled else ()

    # ------------------------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor({self.data!r})"

    def _accum(self, g):
        self.grad = g if self.grad is None else self.grad + g

    @staticmethod
    def _wrap(other) -> "Tensor":
        return other if isinstance(other, Tensor) else Tensor(np.asarray(other))

    def _make(self, data, prev, backward):
        out = Tensor(data, prev)
        if Tensor._grad_enabled:
            out._backward = backward
        return out

    # -- arithmetic -----------------------------------------------------
    def __add__(self, other):
        other = self._wrap(other)
        out_data = self.data + other.data

        def backward(out):
            self._accum(_unbroadcast(out.grad, self.data.shape))
            other._accum(_unbroadcast(out.grad, other.data.shape))

        return self._make(out_data, (self, other), backward)

    __radd__ = __add__

    def __mul__(self, other):
        other = self._wrap(other)
        out_data = self.data * other.data

        def backward(out):
            self._accum(_unbroadcast(out.grad * other.data, self.data.shape))
            other._accum(_unbroadcast(out.grad * self.data, other.data.shape))

        return self._make(out_data, (self, other), backward)

    __rmul__ = __mul__

    def __neg__(self):
        def backward(out):
            self._accum(-out.grad)

        return self._make(-self.data, (self,), backward)

    def __sub__(self, other):
        return self + (-self._wrap(other))

    def __rsub__(self, other):
        return self._wrap(other) + (-self)

    def __truediv__(self, other):
        other = self._wrap(other)
        out_data = self.data / other.data

        def backward(out):
            self._accum(_unbroadcast(out.grad / other.data, self.data.shape))
            other._accum(
                _unbroadcast(-out.grad * self.data / (other.data**2), other.data.shape)
            )

        return self._make(out_data, (self, other), backward)

    def __pow__(self, power):
        assert np.isscalar(power)
        out_data = self.data**power

        def backward(out):
            self._accum(power * self.data ** (power - 1) * out.grad)

        return self._make(out_data, (self,), backward)

    def __matmul__(self, other):
        other = self._wrap(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise GraphError("matmul expects 2-D operands")
        if self.data.shape[1] != other.data.shape[0]:
            raise GraphError(
                f"matmul shape mismatch: {self.data.shape} @ {other.data.shape}"
            )
        out_data = self.data @ other.data

        def backward(out):
            self._accum(out.grad @ other.data.T)
            other._accum(self.data.T @ out.grad)

        return self._make(out_data, (self, other), backward)

    # -- nonlinearities -------------------------------------------------
    def relu(self):
        mask = self.data > 0
        out_data = np.where(mask, self.data, 0)

        def backward(out):
            self._accum(mask * out.grad)

        return self._make(out_data, (self,), backward)

    def tanh(self):
        out_data = np.tanh(self.data)

        def backward(out):
            self._accum((1 - out_data**2) * out.grad)

        return self._make(out_data, (self,), backward)

    def sigmoid(self):
        out_data = np.where(
            self.data >= 0,
            1.0 / (1.0 + np.exp(-np.abs(self.data))),
            np.exp(-np.abs(self.data)) / (1.0 + np.exp(-np.abs(self.data))),
        )

        def backward(out):
            self._accum(out_data * (1 - out_data) * out.grad)

        return self._make(out_data, (self,), backward)

    def exp(self):
        out_data = np.exp(self.data)

        def backward(out):
            self._accum(out_data * out.grad)

        return self._make(out_data, (self,), backward)

    def log(self):
        def backward(out):
            self._accum(out.grad / self.data)

        return self._make(np.log(self.data), (self,), backward)

    def sqrt(self):
        out_data = np.sqrt(self.data)

        def backward(out):
            self._accum(out.grad / (2 * out_data))

        return self._make(out_data, (self,), backward)

    def clip(self, lo, hi):
        """Clamp; gradient is zero outside [lo, hi] (PPO-style clipping)."""
        mask = (self.data >= lo) & (self.data <= hi)

        def backward(out):
            self._accum(mask * out.grad)

        return self._make(np.clip(self.data, lo, hi), (self,), backward)

    def minimum(self, other):
        other = self._wrap(other)
        take_self = self.data <= other.data
        out_data = np.where(take_self, self.data, other.data)

        def backward(out):
            self._accum(_unbroadcast(np.where(take_self, out.grad, 0), self.data.shape))
            other._accum(
                _unbroadcast(np.where(take_self, 0, out.grad), other.data.shape)
            )

        return self._make(out_data, (self, other), backward)

    # -- reductions -----------------------------------------------------
    def sum(self, axis=None, keepdims=False):
        out_data = self.data.sum(axis=axis, keepdims=keepdims)

        def backward(out):
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._accum(np.broadcast_to(g, self.data.shape).copy())

        return self._make(out_data, (self,), backward)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else np.prod(
            [self.data.shape[a] for a in np.atleast_1d(axis)]
        )
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- shape ops ------------------------------------------------------
    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        orig = self.data.shape

        def backward(out):
            self._accum(out.grad.reshape(orig))

        return self._make(self.data.reshape(shape), (self,), backward)

    def transpose(self, axes):
        inv = np.argsort(axes)

        def backward(out):
            self._accum(out.grad.transpose(inv))

        return self._make(self.data.transpose(axes), (self,), backward)

    def __getitem__(self, idx):
        out_data = self.data[idx]

        def backward(out):
            g = np.zeros_like(self.data)
            np.add.at(g, idx, out.grad)
            self._accum(g)

        return self._make(out_data, (self,), backward)

    def pad2d(self, pad: int):
        """Zero-pad the two spatial axes of an NHWC tensor."""
        width = ((0, 0), (pad, pad), (pad, pad), (0, 0))
        out_data = np.pad(self.data, width)

        def backward(out):
            self._accum(out.grad[:, pad:-pad or None, pad:-pad or None, :])

        return self._make(out_data, (self,), backward)

    def take_rows(self, indices: np.ndarray):
        """Select one column per row: out[i] = self[i, indices[i]]."""
        rows = np.arange(self.data.shape[0])
        out_data = self.data[rows, indices]

        def backward(out):
            g = np.zeros_like(self.data)
            np.add.at(g, (rows, indices), out.grad)
            self._accum(g)

        return self._make(out_data, (self,), backward)

    # -- composite numerics ---------------------------------------------
    def log_softmax(self):
        """Row-wise log softmax over the last axis, numerically stable."""
        shifted = self.data - self.data.max(axis=-1, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
        out_data = shifted - lse

        def backward(out):
            p = np.exp(out_data)
            self._accum(out.grad - p * out.grad.sum(axis=-1, keepdims=True))

        return self._make(out_data, (self,), backward)

    def bce_with_logits(self, targets: np.ndarray):
        """Mean binary cross-entropy on raw logits; stable softplus form."""
        z = self.data
        loss = np.maximum(z, 0) - z * targets + np.log1p(np.exp(-np.abs(z)))
        out_data = np.asarray(loss.mean())

        def backward(out):
            sig = 1.0 / (1.0 + np.exp(-z))
            self._accum((sig - targets) / z.size * out.grad)

        return self._make(out_data, (self,), backward)

    # -- graph traversal ------------------------------------------------
    def backward(self, grad=None):
        if not Tensor._grad_enabled:
            raise GraphError("backward called inside no_grad")
        if self._prev == () and self._backward is None:
            raise GraphError("backward on a leaf with no recorded graph")
        self.grad = (
            np.ones_like(self.data) if grad is None else np.asarray(grad)
        )
        # iterative topo sort: recursion would overflow on long BPTT chains
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for child in node._prev:
                if id(child) not in visited:
                    stack.append((child, False))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node)

    def detach(self) -> "Tensor":
        return Tensor(self.data)


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    tensors = [Tensor._wrap(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(out):
        for t, g in zip(tensors, np.split(out.grad, splits, axis=axis)):
            t._accum(g)

    out = Tensor(out_data, tuple(tensors))
    if Tensor._grad_enabled:
        out._backward = backward
    return out
