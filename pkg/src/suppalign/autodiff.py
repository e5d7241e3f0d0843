"""Minimal dense-matrix reverse-mode autodiff.

Everything is a 2-D float64 array; scalars are (1, 1) tensors. A forward
pass records operations on an explicitly opened :class:`Graph` (define-by-run
tape, rebuilt every pass). ``backward`` replays the tape in exact reverse
insertion order, accumulating gradients into the ``grad`` buffers of
requires-grad leaves. Intermediate gradients live in a scratch map owned by
the backward call, so repeated backward passes accumulate leaf gradients
linearly and never double-count through shared subexpressions.

Broadcasting is limited to row-wise bias addition (``add_rowvec``); every
other shape mismatch raises :class:`DimensionError`. Committed op outputs are
checked finite.
"""

from __future__ import annotations

import threading

import numpy as np


class DimensionError(ValueError):
    """Operand shapes incompatible with the requested operation."""


class ContractError(ValueError):
    """An operation precondition was violated (e.g. non-scalar loss)."""


_local = threading.local()


def _graph_stack():
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = []
        _local.stack = stack
    return stack


def active_graph():
    stack = _graph_stack()
    return stack[-1] if stack else None


class no_grad:
    """Context that suspends tape recording (pure inference)."""

    def __enter__(self):
        _graph_stack().append(None)
        return self

    def __exit__(self, exc_type, exc, tb):
        _graph_stack().pop()
        return False


class Tensor:
    """Dense real matrix with an optional gradient buffer."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise DimensionError(f"tensors are 2-D, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("tensor holds non-finite values")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class _Node:
    __slots__ = ("tag", "inputs", "out", "bwd")

    def __init__(self, tag, inputs, out, bwd):
        self.tag = tag
        self.inputs = inputs
        self.out = out
        self.bwd = bwd


class Graph:
    """Append-only op tape; context manager makes it the recording target."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self.last_visit_count = 0

    def __enter__(self):
        _graph_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _graph_stack().pop()
        assert popped is self
        return False

    def backward(self, loss: Tensor) -> None:
        backward(self, loss)


def backward(graph: Graph, loss: Tensor) -> None:
    """Populate leaf gradients for a scalar loss recorded on ``graph``.

    Visits each tape node exactly once, in reverse insertion order. Calling
    again without zeroing accumulates into the same leaf buffers.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    produced = {id(node.out) for node in graph.nodes}
    scratch: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}

    def send(t: Tensor, g: np.ndarray) -> None:
        if id(t) in produced:
            key = id(t)
            if key in scratch:
                scratch[key] = scratch[key] + g
            else:
                scratch[key] = g
        elif t.requires_grad:
            if t.grad is None:
                t.grad = np.zeros_like(t.data)
            t.grad += g

    if id(loss) not in produced and loss.requires_grad:
        send(loss, np.ones((1, 1)))

    visits = 0
    for node in reversed(graph.nodes):
        visits += 1
        g = scratch.pop(id(node.out), None)
        if g is None:
            continue
        for t, gi in zip(node.inputs, node.bwd(g)):
            if gi is not None:
                send(t, gi)
    graph.last_visit_count = visits


def _record(tag, inputs, out_data, bwd) -> Tensor:
    graph = active_graph()
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=needs and graph is not None)
    if graph is not None and needs:
        graph.nodes.append(_Node(tag, tuple(inputs), out, bwd))
    return out


def zero_grads(tensors) -> None:
    for t in tensors:
        t.zero_grad()


# ---------------------------------------------------------------------------
# ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(f"matmul {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def bwd(g):
        return g @ bd.T, ad.T @ g

    return _record("matmul", (a, b), ad @ bd, bwd)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DimensionError(f"add {a.shape} + {b.shape}")
    return _record("add", (a, b), a.data + b.data, lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DimensionError(f"sub {a.shape} - {b.shape}")
    return _record("sub", (a, b), a.data - b.data, lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DimensionError(f"mul {a.shape} * {b.shape}")
    ad, bd = a.data, b.data
    return _record("mul", (a, b), ad * bd, lambda g: (g * bd, g * ad))


def add_rowvec(a: Tensor, v: Tensor) -> Tensor:
    """Row-wise bias addition, the single broadcast the engine allows."""
    if v.data.shape != (1, a.data.shape[1]):
        raise DimensionError(f"add_rowvec {a.shape} + {v.shape}")

    def bwd(g):
        return g, g.sum(axis=0, keepdims=True)

    return _record("add_rowvec", (a, v), a.data + v.data, bwd)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    return _record("scale", (a,), a.data * s, lambda g: (g * s,))


def leaky_relu(a: Tensor, slope: float) -> Tensor:
    if not 0.0 < slope <= 1.0:
        raise ContractError(f"leaky_relu slope must lie in (0,1], got {slope}")
    mask = a.data > 0.0
    out = np.where(mask, a.data, slope * a.data)
    # subgradient at exactly 0 uses the slope branch (mask is False there)
    return _record("leaky_relu", (a,), out, lambda g: (np.where(mask, g, slope * g),))


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _record("sigmoid", (a,), out, lambda g: (g * out * (1.0 - out),))


def softmax_rows(a: Tensor) -> Tensor:
    """Row-wise softmax with max subtraction; rows land on the simplex."""
    if a.data.shape[1] < 2:
        raise DimensionError("softmax_rows needs at least two columns")
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)

    def bwd(g):
        dot = (g * out).sum(axis=1, keepdims=True)
        return (out * (g - dot),)

    return _record("softmax_rows", (a,), out, bwd)


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient passes through only where no clamping bit."""
    mask = (a.data >= lo) & (a.data <= hi)
    out = np.clip(a.data, lo, hi)
    return _record("clamp", (a,), out, lambda g: (g * mask,))


def clamped_log(a: Tensor, floor: float = 1e-12) -> Tensor:
    """ln(max(x, floor)); zero gradient inside the clamped region."""
    safe = np.maximum(a.data, floor)
    mask = a.data >= floor
    return _record("clamped_log", (a,), np.log(safe), lambda g: (g * mask / safe,))


def abs_(a: Tensor) -> Tensor:
    sign = np.sign(a.data)
    return _record("abs", (a,), np.abs(a.data), lambda g: (g * sign,))


def sum_all(a: Tensor) -> Tensor:
    shape = a.data.shape
    return _record(
        "sum_all", (a,), a.data.sum().reshape(1, 1), lambda g: (np.full(shape, g[0, 0]),)
    )


def mean_all(a: Tensor) -> Tensor:
    shape = a.data.shape
    n = a.data.size
    return _record(
        "mean_all",
        (a,),
        a.data.mean().reshape(1, 1),
        lambda g: (np.full(shape, g[0, 0] / n),),
    )


def pick_classes(p: Tensor, labels) -> Tensor:
    """Gather p[i, labels[i]] into an (n, 1) column; backward scatters."""
    idx = np.asarray(labels, dtype=np.int64).ravel()
    n, k = p.data.shape
    if idx.shape[0] != n:
        raise DimensionError(f"{idx.shape[0]} labels for {n} rows")
    if idx.min(initial=0) < 0 or idx.max(initial=0) >= k:
        raise ContractError("label outside [0, K)")
    rows = np.arange(n)
    out = p.data[rows, idx].reshape(n, 1)

    def bwd(g):
        gp = np.zeros_like(p.data)
        gp[rows, idx] = g[:, 0]
        return (gp,)

    return _record("pick_classes", (p,), out, bwd)


def outer_rows(z: Tensor, p: Tensor) -> Tensor:
    """Row-wise flattened outer product: out[i, a*K + b] = z[i,a] * p[i,b]."""
    if z.data.shape[0] != p.data.shape[0]:
        raise DimensionError(f"outer_rows row counts {z.shape} vs {p.shape}")
    n, m = z.data.shape
    k = p.data.shape[1]
    zd, pd = z.data, p.data
    out = (zd[:, :, None] * pd[:, None, :]).reshape(n, m * k)

    def bwd(g):
        g3 = g.reshape(n, m, k)
        return (g3 * pd[:, None, :]).sum(axis=2), (g3 * zd[:, :, None]).sum(axis=1)

    return _record("outer_rows", (z, p), out, bwd)
