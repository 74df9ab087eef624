"""
Reverse-mode differentiation over numpy arrays.

Every primitive computes its forward value eagerly. When a Tape is active on
the current thread and any input requires a gradient, the primitive appends a
Record holding its inputs, its output and a local backward rule. `backward`
then walks the tape in reverse.

All values are float64.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

DTYPE = np.float64


class ContractError(ValueError):
    """Raised when an operation is called outside its contract (shapes, arity, counts)."""


class NonFiniteError(FloatingPointError):
    """Raised when an operation produces NaN or Inf."""


class Tensor:
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.array(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(other, mul(self, -1.0))

    def __neg__(self):
        return mul(self, -1.0)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ContractError("division is only defined by a constant")
        return mul(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, key):
        return take(self, key)


@dataclass
class Record:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tape:
    """Ordered log of primitive applications. Use as a context manager to make it active."""

    def __init__(self):
        self.records: list[Record] = []

    def __len__(self) -> int:
        return len(self.records)

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        _tape_stack().pop()


_local = threading.local()


def _tape_stack() -> list[Tape]:
    if not hasattr(_local, "stack"):
        _local.stack = []
    return _local.stack


def active_tape() -> Tape | None:
    stack = _tape_stack()
    return stack[-1] if stack else None


@contextmanager
def allow_non_finite():
    """Let primitives return NaN or Inf instead of raising, for diagnostics."""
    _local.permissive = getattr(_local, "permissive", 0) + 1
    try:
        with np.errstate(all="ignore"):
            yield
    finally:
        _local.permissive -= 1


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _emit(op: str, inputs: tuple[Tensor, ...], data: np.ndarray, backward) -> Tensor:
    if not getattr(_local, "permissive", 0) and not np.all(np.isfinite(data)):
        raise NonFiniteError(f"{op} produced a non-finite value")
    out = Tensor(data)
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.records.append(Record(op, inputs, out, backward))
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# -----------------------------
# PRIMITIVES
# -----------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _emit("add", (a, b), a.data + b.data, backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _emit("mul", (a, b), a.data * b.data, backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise ContractError(f"matmul expects 1-d or 2-d operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise ContractError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def backward(g):
        A, B = a.data, b.data
        if A.ndim == 1 and B.ndim == 1:
            return g * B, g * A
        if A.ndim == 1:
            return B @ g, np.outer(A, g)
        if B.ndim == 1:
            return np.outer(g, B), A.T @ g
        return g @ B.T, A.T @ g

    return _emit("matmul", (a, b), a.data @ b.data, backward)


def concat(tensors: Sequence, axis: int = 0, new_axis: bool = False) -> Tensor:
    """Join tensors along `axis`; with `new_axis` the inputs are stacked along a fresh axis."""
    tensors = tuple(as_tensor(t) for t in tensors)
    if not tensors:
        raise ContractError("concat needs at least one tensor")

    if new_axis:
        data = np.stack([t.data for t in tensors], axis=axis)

        def backward(g):
            return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

        return _emit("concat", tensors, data, backward)

    data = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _emit("concat", tensors, data, backward)


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    return concat(tensors, axis=axis, new_axis=True)


def take(x, key) -> Tensor:
    """Basic or integer-array indexing (the slice primitive)."""
    x = as_tensor(x)
    data = np.array(x.data[key])

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, key, g)
        return (full,)

    return _emit("slice", (x,), data, backward)


def sum(x, axis: int | None = None) -> Tensor:  # noqa: A001
    x = as_tensor(x)

    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _emit("sum", (x,), np.sum(x.data, axis=axis), backward)


def mean(x, axis: int | None = None) -> Tensor:
    x = as_tensor(x)
    count = x.size if axis is None else x.shape[axis]

    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, x.shape).copy(),)

    return _emit("mean", (x,), np.mean(x.data, axis=axis), backward)


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return _emit("tanh", (x,), out, lambda g: (g * (1.0 - out * out),))


def _sigmoid(values: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * values))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = _sigmoid(x.data)
    return _emit("sigmoid", (x,), out, lambda g: (g * out * (1.0 - out),))


def softplus(x) -> Tensor:
    x = as_tensor(x)
    return _emit("softplus", (x,), np.logaddexp(0.0, x.data), lambda g: (g * _sigmoid(x.data),))


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)
    return _emit("exp", (x,), out, lambda g: (g * out,))


def log(x, lo: float | None = None, hi: float | None = None) -> Tensor:
    """Natural log; `lo`/`hi` clamp the argument first (zero gradient outside the clamp)."""
    x = as_tensor(x)
    clipped = x.data
    if lo is not None or hi is not None:
        clipped = np.clip(x.data, lo, hi)
    inside = clipped == x.data

    def backward(g):
        return (np.where(inside, g / clipped, 0.0),)

    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(clipped)
    return _emit("log", (x,), out, backward)


def _softmax(values: np.ndarray, axis: int) -> np.ndarray:
    shifted = values - values.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    out = _softmax(x.data, axis)

    def backward(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return _emit("softmax", (x,), out, backward)


def embedding(table: Tensor, ids) -> Tensor:
    """Row lookup; `ids` is an integer or integer array."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ContractError(f"token index out of range for table of {table.shape[0]} rows")

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        return (full,)

    return _emit("embedding", (table,), table.data[ids], backward)


def cross_entropy(logits, target) -> Tensor:
    """
    Softmax cross-entropy over the last axis, summed to a scalar.
    `target` is a class index or a constant array of soft counts shaped like `logits`.
    """
    logits = as_tensor(logits)
    if np.isscalar(target) or np.asarray(target).ndim == 0:
        weights = np.zeros_like(logits.data)
        weights[..., int(target)] = 1.0
    else:
        weights = np.asarray(target, dtype=DTYPE)
        if weights.shape != logits.shape:
            raise ContractError(f"soft target shape {weights.shape} != logits shape {logits.shape}")

    shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    probs = np.exp(log_probs)

    def backward(g):
        return (g * (probs * weights.sum(axis=-1, keepdims=True) - weights),)

    return _emit("cross_entropy", (logits,), np.asarray(-np.sum(weights * log_probs)), backward)


# -----------------------------
# REVERSE PASS
# -----------------------------

def backward(loss: Tensor, tape: Tape, params: Iterable[Tensor] | None = None) -> dict[Tensor, np.ndarray]:
    """
    Propagate d(loss)/d(.) through `tape`. Returns a map from every leaf tensor that
    requires a gradient (seen on the tape, or listed in `params`) to its gradient, and
    stores the same array in `.grad`. Leaves the loss does not reach get zeros.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    produced = {id(rec.output) for rec in tape.records}
    leaves: dict[int, Tensor] = {}

    for rec in reversed(tape.records):
        for inp in rec.inputs:
            if inp.requires_grad and id(inp) not in produced:
                leaves[id(inp)] = inp
        g = grads.pop(id(rec.output), None)
        if g is None:
            continue
        for inp, gi in zip(rec.inputs, rec.backward(g)):
            if gi is None or not inp.requires_grad:
                continue
            if id(inp) in grads:
                grads[id(inp)] = grads[id(inp)] + gi
            else:
                grads[id(inp)] = np.array(gi, dtype=DTYPE)

    if loss.requires_grad and id(loss) not in produced:
        leaves[id(loss)] = loss
    for p in params or ():
        leaves[id(p)] = p

    result: dict[Tensor, np.ndarray] = {}
    for key, leaf in leaves.items():
        g = grads.get(key)
        g = np.zeros_like(leaf.data) if g is None else g.reshape(leaf.shape)
        leaf.grad = g
        result[leaf] = g
    return result
