"""Reverse-mode autodiff over float64 numpy arrays.

Each operation returns a new `Tensor` carrying a backward closure; calling
`backward()` on a scalar loss topologically sorts the graph and runs the
closures in reverse. The tape is single-use: a second backward through the
same graph raises. No higher-order derivatives.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_grad_enabled = True


def is_grad_enabled() -> bool:
    return _grad_enabled


@contextmanager
def no_grad():
    """Disable tape recording inside the block (evaluation fast path)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _as_array(value) -> np.ndarray:
    if isinstance(value, np.ndarray) and value.dtype == np.float64:
        return value
    return np.asarray(value, dtype=np.float64)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to the shape it was broadcast from."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Tensor:
    """Dense float64 array plus optional gradient buffer and tape hook."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents", "_consumed")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._backward = None
        self._parents = ()
        self._consumed = False

    # -- introspection -----------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    # -- autograd ----------------------------------------------------------

    def backward(self):
        if self.data.size != 1:
            raise ValueError(f"backward() needs a scalar loss, got shape {self.data.shape}")
        if self._consumed:
            raise RuntimeError("backward() called twice on a consumed tape")
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        for node in topo:
            if node._consumed:
                raise RuntimeError("graph reuses a tensor from a consumed tape")
        if self.requires_grad:
            self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()
                node._backward = None
                node._parents = ()
                node._consumed = True
        self._consumed = True

    # -- operators ---------------------------------------------------------

    def __add__(self, other):
        return add(self, _lift(other))

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, _lift(other))

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    # -- shaped reductions / views ------------------------------------------

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)

    # -- pointwise ----------------------------------------------------------

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def relu(self):
        return relu(self)

    def sigmoid(self):
        return sigmoid(self)

    def tanh(self):
        return tanh(self)


def _lift(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _accum(t: Tensor, g: np.ndarray, own: bool = False):
    """Add g into t.grad. Pass own=True only for freshly allocated arrays."""
    if t.grad is None:
        if own and g.flags.owndata and g.flags.writeable:
            t.grad = g
        else:
            t.grad = g.copy()
    else:
        t.grad += g


def _from_op(data: np.ndarray, parents: tuple, make_backward) -> Tensor:
    """Build the op result; record the tape hook only when a parent needs it.

    make_backward is called with the output tensor and must return the
    closure, so closures can read out.grad at backward time.
    """
    requires = _grad_enabled and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=requires)
    if requires:
        out._parents = tuple(parents)
        out._backward = make_backward(out)
    return out


# ---------------------------------------------------------------------------
# primitive ops
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    def bw(out):
        def run():
            g = out.grad
            if a.requires_grad:
                _accum(a, _unbroadcast(g, a.data.shape))
            if b.requires_grad:
                _accum(b, _unbroadcast(g, b.data.shape))
        return run

    return _from_op(a.data + b.data, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def bw(out):
        def run():
            g = out.grad
            if a.requires_grad:
                _accum(a, _unbroadcast(g, a.data.shape))
            if b.requires_grad:
                _accum(b, _unbroadcast(-g, b.data.shape), own=True)
        return run

    return _from_op(a.data - b.data, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def bw(out):
        def run():
            g = out.grad
            if a.requires_grad:
                _accum(a, _unbroadcast(g * b.data, a.data.shape), own=True)
            if b.requires_grad:
                _accum(b, _unbroadcast(g * a.data, b.data.shape), own=True)
        return run

    return _from_op(a.data * b.data, (a, b), bw)


def div(a: Tensor, b: Tensor) -> Tensor:
    def bw(out):
        def run():
            g = out.grad
            if a.requires_grad:
                _accum(a, _unbroadcast(g / b.data, a.data.shape), own=True)
            if b.requires_grad:
                _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape), own=True)
        return run

    return _from_op(a.data / b.data, (a, b), bw)


def neg(a: Tensor) -> Tensor:
    def bw(out):
        def run():
            _accum(a, -out.grad, own=True)
        return run

    return _from_op(-a.data, (a,), bw)


def power(a: Tensor, exponent) -> Tensor:
    p = float(exponent)

    def bw(out):
        def run():
            _accum(a, out.grad * p * a.data ** (p - 1.0), own=True)
        return run

    return _from_op(a.data**p, (a,), bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with numpy stacked-batch broadcasting; operands >= 2-d."""
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ValueError(
            f"matmul needs >=2-d operands, got shapes {a.data.shape} and {b.data.shape}"
        )
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ValueError(f"matmul: inner dims differ, {a.data.shape} @ {b.data.shape}")

    def bw(out):
        def run():
            g = out.grad
            if a.requires_grad:
                da = g @ np.swapaxes(b.data, -1, -2)
                _accum(a, _unbroadcast(da, a.data.shape), own=True)
            if b.requires_grad:
                db = np.swapaxes(a.data, -1, -2) @ g
                _accum(b, _unbroadcast(db, b.data.shape), own=True)
        return run

    return _from_op(a.data @ b.data, (a, b), bw)


def tsum(a: Tensor, axis=None, keepdims=False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(out):
        def run():
            g = out.grad
            if not keepdims and axis is not None:
                g = np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(g, a.data.shape))
        return run

    return _from_op(data, (a,), bw)


def tmean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    data = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size / data.size

    def bw(out):
        def run():
            g = out.grad
            if not keepdims and axis is not None:
                g = np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(g, a.data.shape) / count, own=True)
        return run

    return _from_op(data, (a,), bw)


def reshape(a: Tensor, shape: tuple) -> Tensor:
    def bw(out):
        def run():
            _accum(a, out.grad.reshape(a.data.shape))
        return run

    return _from_op(a.data.reshape(shape), (a,), bw)


def transpose(a: Tensor, axes: tuple) -> Tensor:
    inverse = tuple(int(np.argsort(axes)[i]) for i in range(len(axes)))

    def bw(out):
        def run():
            _accum(a, out.grad.transpose(inverse))
        return run

    return _from_op(a.data.transpose(axes), (a,), bw)


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)

    def bw(out):
        def run():
            _accum(a, out.grad * data, own=True)
        return run

    return _from_op(data, (a,), bw)


def log(a: Tensor) -> Tensor:
    def bw(out):
        def run():
            _accum(a, out.grad / a.data, own=True)
        return run

    return _from_op(np.log(a.data), (a,), bw)


def relu(a: Tensor) -> Tensor:
    def bw(out):
        def run():
            _accum(a, out.grad * (a.data > 0.0), own=True)
        return run

    return _from_op(np.maximum(a.data, 0.0), (a,), bw)


def sigmoid(a: Tensor) -> Tensor:
    data = 1.0 / (1.0 + np.exp(-a.data))

    def bw(out):
        def run():
            _accum(a, out.grad * data * (1.0 - data), own=True)
        return run

    return _from_op(data, (a,), bw)


def tanh(a: Tensor) -> Tensor:
    data = np.tanh(a.data)

    def bw(out):
        def run():
            _accum(a, out.grad * (1.0 - data * data), own=True)
        return run

    return _from_op(data, (a,), bw)
