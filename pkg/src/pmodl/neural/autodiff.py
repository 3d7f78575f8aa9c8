"""A small reverse-mode differentiation engine over numpy arrays.

Every operation returns a :class:`Value` that remembers its parents and a
closure computing the parents' gradients from its own. Graphs are built
eagerly by the forward pass and consumed by :func:`backward`.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import UsageError


class Value:
    """Node of a recorded computation."""

    __slots__ = ("data", "parents", "grad_fn", "name", "op")

    def __init__(self, data, parents: tuple = (), grad_fn: Callable | None = None, op: str = "", name: str | None = None):
        self.data = np.asarray(data)
        self.parents = parents
        self.grad_fn = grad_fn
        self.op = op
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        label = self.name or self.op or "const"
        return f"Value({label}, shape={self.data.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def leaf(data, name: str | None = None) -> Value:
    return Value(data, name=name)


def as_value(x) -> Value:
    return x if isinstance(x, Value) else Value(x)


def _pair(a, b) -> tuple[Value, Value]:
    """Wrap operands; bare scalars take the dtype of the other operand."""
    if not isinstance(a, Value) and isinstance(b, Value) and np.ndim(a) == 0:
        a = Value(np.asarray(a, dtype=b.data.dtype))
    if not isinstance(b, Value) and isinstance(a, Value) and np.ndim(b) == 0:
        b = Value(np.asarray(b, dtype=a.data.dtype))
    return as_value(a), as_value(b)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def add(a, b) -> Value:
    a, b = _pair(a, b)
    sa, sb = a.shape, b.shape

    def grad_fn(g, need):
        return (
            _unbroadcast(g, sa) if need[0] else None,
            _unbroadcast(g, sb) if need[1] else None,
        )

    return Value(a.data + b.data, (a, b), grad_fn, "add")


def sub(a, b) -> Value:
    a, b = _pair(a, b)
    sa, sb = a.shape, b.shape

    def grad_fn(g, need):
        return (
            _unbroadcast(g, sa) if need[0] else None,
            _unbroadcast(-g, sb) if need[1] else None,
        )

    return Value(a.data - b.data, (a, b), grad_fn, "sub")


def mul(a, b) -> Value:
    a, b = _pair(a, b)

    def grad_fn(g, need):
        return (
            _unbroadcast(g * b.data, a.shape) if need[0] else None,
            _unbroadcast(g * a.data, b.shape) if need[1] else None,
        )

    return Value(a.data * b.data, (a, b), grad_fn, "mul")


def matmul(a, b) -> Value:
    """``a @ b`` with ``a`` of shape (..., n) and ``b`` a 2D (n, m) matrix."""
    a, b = as_value(a), as_value(b)

    def grad_fn(g, need):
        ga = g @ b.data.T if need[0] else None
        gb = None
        if need[1]:
            a2 = a.data.reshape(-1, a.data.shape[-1])
            gb = a2.T @ g.reshape(-1, g.shape[-1])
        return ga, gb

    return Value(a.data @ b.data, (a, b), grad_fn, "matmul")


def linear(x, w, b) -> Value:
    """Fused ``x @ w + b``; one node instead of two keeps the graph short."""
    x, w, b = as_value(x), as_value(w), as_value(b)

    def grad_fn(g, need):
        g2 = g.reshape(-1, g.shape[-1])
        gx = g @ w.data.T if need[0] else None
        gw = x.data.reshape(-1, x.data.shape[-1]).T @ g2 if need[1] else None
        gb = g2.sum(axis=0) if need[2] else None
        return gx, gw, gb

    return Value(x.data @ w.data + b.data, (x, w, b), grad_fn, "linear")


def leaky_relu(x, slope: float = 0.01) -> Value:
    x = as_value(x)
    data = x.data
    if 0.0 <= slope <= 1.0:
        out = np.maximum(data, data * data.dtype.type(slope))
    else:
        out = np.where(data > 0, data, slope * data)

    def grad_fn(g, need):
        # float mask arithmetic is much faster than np.where on random signs
        d = (data > 0).astype(g.dtype)
        d *= 1.0 - slope
        d += slope
        return (g * d,)

    return Value(out, (x,), grad_fn, "leaky_relu")


def tanh(x) -> Value:
    x = as_value(x)
    out = np.tanh(x.data)

    def grad_fn(g, need):
        return (g * (1.0 - out * out),)

    return Value(out, (x,), grad_fn, "tanh")


def square(x) -> Value:
    x = as_value(x)

    def grad_fn(g, need):
        return (2.0 * x.data * g,)

    return Value(x.data * x.data, (x,), grad_fn, "square")


def sum_(x, axis=None) -> Value:
    x = as_value(x)
    shape = x.shape

    def grad_fn(g, need):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return Value(x.data.sum(axis=axis), (x,), grad_fn, "sum")


def mean(x, axis=None) -> Value:
    x = as_value(x)
    n = x.data.size if axis is None else x.data.shape[axis]
    return mul(sum_(x, axis), 1.0 / n)


def concat(xs: Sequence, axis: int = -1) -> Value:
    xs = [as_value(x) for x in xs]
    sizes = [x.shape[axis] for x in xs]
    splits = np.cumsum(sizes)[:-1]

    def grad_fn(g, need):
        parts = np.split(g, splits, axis=axis)
        return tuple(p if n else None for p, n in zip(parts, need))

    return Value(np.concatenate([x.data for x in xs], axis=axis), tuple(xs), grad_fn, "concat")


def masked_max(x, mask: np.ndarray) -> Value:
    """Max over axis 1 of ``x`` (B, K, F), ignoring entries where ``mask`` (B, K) is False.

    Rows without any valid entry yield zeros. Ties send the gradient to the
    lowest index.
    """
    x = as_value(x)
    data = x.data
    b, k, f = data.shape
    if k == 0:
        return Value(np.zeros((b, f), dtype=data.dtype), (x,), lambda g, need: (np.zeros_like(data),), "masked_max")
    filled = np.where(mask[:, :, None], data, -np.inf)
    idx = filled.argmax(axis=1)  # first maximum
    out = np.take_along_axis(filled, idx[:, None, :], axis=1)[:, 0, :]
    empty = ~mask.any(axis=1)
    out[empty] = 0.0

    def grad_fn(g, need):
        gx = np.zeros_like(data)
        g = g.copy()
        g[empty] = 0.0
        np.put_along_axis(gx, idx[:, None, :], g[:, None, :], axis=1)
        return (gx,)

    return Value(out, (x,), grad_fn, "masked_max")


def max_pool(x, empty: np.ndarray | None = None) -> Value:
    """Max over axis 1 of ``x`` (B, K, F) for inputs whose padding repeats real rows.

    Padding that duplicates a valid entry never changes the maximum, so no mask
    is needed. Rows flagged in ``empty`` (B,) produce zeros. Ties send the
    gradient to the lowest index.
    """
    x = as_value(x)
    data = x.data
    out = data.max(axis=1)
    if empty is not None and empty.any():
        out[empty] = 0.0

    def grad_fn(g, need):
        idx = (data == data.max(axis=1)[:, None, :]).argmax(axis=1)
        g = g.copy()
        if empty is not None:
            g[empty] = 0.0
        gx = np.zeros_like(data, dtype=g.dtype)
        np.put_along_axis(gx, idx[:, None, :], g[:, None, :], axis=1)
        return (gx,)

    return Value(out, (x,), grad_fn, "max_pool")


def affine_const(x, scale, shift) -> Value:
    """``x * scale + shift`` for constant arrays ``scale``/``shift``."""
    x = as_value(x)
    scale = np.asarray(scale, dtype=x.data.dtype)
    shift = np.asarray(shift, dtype=x.data.dtype)

    def grad_fn(g, need):
        return (_unbroadcast(g * scale, x.shape),)

    return Value(x.data * scale + shift, (x,), grad_fn, "affine")


def _toposort(root: Value, needed: set | None) -> list[Value]:
    order: list[Value] = []
    seen: set[int] = set()
    stack: list[tuple[Value, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Value, wrt: Iterable[Value] | None = None) -> dict[str, np.ndarray]:
    """Gradients of a scalar ``loss`` with respect to named leaves.

    If ``wrt`` is given only those leaves are differentiated and the traversal
    skips every node that does not depend on them. Named leaves that are not
    reachable from ``loss`` get zero gradients when listed in ``wrt``.
    """
    if not isinstance(loss, Value):
        raise UsageError("backward needs a Value produced by the graph")
    if loss.data.size != 1:
        raise UsageError(f"backward needs a scalar loss, got shape {loss.data.shape}")

    order = _toposort(loss, None)
    targets = None if wrt is None else {id(v) for v in wrt}

    # a node needs a gradient if it is a target leaf or has a parent that does
    requires: dict[int, bool] = {}
    for node in order:
        if not node.parents:
            requires[id(node)] = node.name is not None if targets is None else id(node) in targets
        else:
            requires[id(node)] = any(requires[id(p)] for p in node.parents)

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    result: dict[str, np.ndarray] = {}
    owner: dict[str, int] = {}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None or not requires[id(node)]:
            continue
        if not node.parents:
            if node.name is not None:
                if owner.setdefault(node.name, id(node)) != id(node):
                    raise UsageError(f"two different leaves are named {node.name!r}; pass wrt=")
                result[node.name] = result.get(node.name, 0) + g
            continue
        need = tuple(requires[id(p)] for p in node.parents)
        pgrads = node.grad_fn(g, need)
        for p, pg, n in zip(node.parents, pgrads, need):
            if not n or pg is None:
                continue
            key = id(p)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    if wrt is not None:
        for v in wrt:
            if v.name is not None and v.name not in result:
                result[v.name] = np.zeros_like(v.data, dtype=float)
    return result
