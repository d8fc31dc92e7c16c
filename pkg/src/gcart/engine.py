"""Minimal dense-tensor reverse-mode differentiation.

Tensors wrap contiguous float64 numpy arrays. Operations execute eagerly;
while a Tape is active (context manager), any op touching a tensor that
requires gradients records a node with its vector-Jacobian closure. The tape
is dynamic: it is rebuilt every training step and replayed backwards once.

Nodes are stored in creation order, which is already topological for eager
execution, so backward() is a single reverse sweep with in-order gradient
accumulation. That fixed order makes replays bit-identical.
"""

from __future__ import annotations

import itertools

import numpy as np

_ids = itertools.count()
_tape_stack: list["Tape"] = []

# When enabled, every forward op asserts its output is finite.
_debug_finite = False


def set_debug_checks(flag: bool):
    global _debug_finite
    _debug_finite = bool(flag)


class Tensor:
    __slots__ = ("data", "requires_grad", "id")

    # keep numpy from absorbing Tensors into object arrays; mixed
    # expressions go through the reflected operators below instead
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.id = next(_ids)

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar; constants are wrapped on the fly
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, _as_tensor(-1.0))


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _Node:
    __slots__ = ("op", "out_id", "inputs", "vjp")

    def __init__(self, op, out_id, inputs, vjp):
        self.op = op
        self.out_id = out_id
        self.inputs = inputs  # tuple of Tensors
        self.vjp = vjp        # g_out -> tuple of grads aligned with inputs


class Tape:
    """Recording of primitive ops plus the gradient map backward() fills in."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self.grads: dict[int, np.ndarray] = {}

    def __enter__(self):
        _tape_stack.append(self)
        return self

    def __exit__(self, *exc):
        assert _tape_stack.pop() is self
        return False

    def backward(self, loss: Tensor):
        """Populate gradients of `loss` w.r.t. everything recorded before it."""
        if loss.data.size != 1:
            raise ValueError(f"backward() needs a scalar loss, got shape {loss.data.shape}")
        self.grads = {loss.id: np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            g = self.grads.get(node.out_id)
            if g is None:
                continue
            for t, gt in zip(node.inputs, node.vjp(g)):
                if gt is None or not t.requires_grad:
                    continue
                acc = self.grads.get(t.id)
                if acc is None:
                    # vjps may hand back views of (or the) upstream gradient;
                    # own the accumulator so later += cannot alias it
                    self.grads[t.id] = np.array(gt)
                else:
                    acc += gt
        return self.grads

    def grad(self, t: Tensor):
        return self.grads.get(t.id)


def _active_tape():
    return _tape_stack[-1] if _tape_stack else None


def record_op(op: str, out_data: np.ndarray, inputs, vjp) -> Tensor:
    """Wrap a forward result, recording it when a tape is listening.

    `vjp(g)` must return one gradient array (or None) per input, each with
    that input's exact shape. This is also the extension point fused kernels
    use to register themselves as primitives.
    """
    if _debug_finite and not np.all(np.isfinite(out_data)):
        raise FloatingPointError(f"non-finite values produced by op {op!r}")
    out = Tensor(out_data)
    tape = _active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.nodes.append(_Node(op, out.id, tuple(inputs), vjp))
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a gradient back to `shape` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data
    return record_op("add", out, (a, b), lambda g: (
        _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data
    return record_op("sub", out, (a, b), lambda g: (
        _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data
    return record_op("mul", out, (a, b), lambda g: (
        _unbroadcast(g * b.data, a.data.shape),
        _unbroadcast(g * a.data, b.data.shape)))


def div(a: Tensor, b: Tensor) -> Tensor:
    if np.any(b.data == 0.0):
        raise ZeroDivisionError("div: denominator contains exact zero")
    out = a.data / b.data

    def vjp(g):
        ga = _unbroadcast(g / b.data, a.data.shape)
        gb = _unbroadcast(-g * out / b.data, b.data.shape)
        return ga, gb

    return record_op("div", out, (a, b), vjp)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul expects 2-D tensors")
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch {a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data
    return record_op("matmul", out, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return record_op("exp", out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0.0):
        raise ValueError("log: argument must be strictly positive")
    out = np.log(a.data)
    return record_op("log", out, (a,), lambda g: (g / a.data,))


def pow(a: Tensor, p: float) -> Tensor:  # noqa: A001 - engine namespace
    out = a.data ** p
    return record_op("pow", out, (a,), lambda g: (g * p * a.data ** (p - 1.0),))


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)
    # subgradient at 0 is taken as 0
    return record_op("relu", out, (a,), lambda g: (g * (a.data > 0.0),))


def max0(a: Tensor) -> Tensor:
    """Hinge max(0, x); same rule as relu, kept as its own named primitive."""
    out = np.maximum(a.data, 0.0)
    return record_op("max0", out, (a,), lambda g: (g * (a.data > 0.0),))


def softplus(a: Tensor) -> Tensor:
    x = a.data
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))

    def vjp(g):
        z = np.exp(-np.abs(x))
        sig = np.where(x >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))
        return (g * sig,)

    return record_op("softplus", out, (a,), vjp)


def sum(a: Tensor, axis=None) -> Tensor:  # noqa: A001 - engine namespace
    out = a.data.sum(axis=axis)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy(),)

    return record_op("sum", out, (a,), vjp)


def mean(a: Tensor, axis=None) -> Tensor:
    out = a.data.mean(axis=axis)
    count = a.data.size if axis is None else a.data.shape[axis]

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g / count, a.data.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis) / count, a.data.shape).copy(),)

    return record_op("mean", out, (a,), vjp)


def reshape(a: Tensor, shape) -> Tensor:
    out = a.data.reshape(shape)
    return record_op("reshape", out, (a,), lambda g: (g.reshape(a.data.shape),))


PRIMITIVES = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "div": div,
    "matmul": matmul,
    "exp": exp,
    "log": log,
    "pow": pow,
    "relu": relu,
    "softplus": softplus,
    "sum": sum,
    "mean": mean,
    "max0": max0,
    "reshape": reshape,
}


def forward_primitive(op: str, *inputs, **kwargs) -> Tensor:
    """Dispatch a primitive by name."""
    try:
        fn = PRIMITIVES[op]
    except KeyError:
        raise ValueError(f"unknown primitive {op!r}") from None
    return fn(*inputs, **kwargs)
