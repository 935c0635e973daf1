"""Reverse-mode tape and tensors.

Define-by-run: a fresh Tape is opened per forward pass (``with tape():``),
ops append TapeNodes in creation order, and backward() walks the node list
once in reverse.  Tensors are dense row-major numpy arrays in float32
(training) or float64 (verification); ops never mutate their inputs and
raise NonFiniteError if an output contains NaN/Inf.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

F32 = np.float32
F64 = np.float64


class DiffcoreError(ValueError):
    pass


class NonFiniteError(DiffcoreError):
    """An op produced NaN or Inf."""


class ShapeError(DiffcoreError):
    pass


class Tensor:
    """Dense array with optional participation in the active tape."""

    __slots__ = ("data", "requires_grad", "grad", "name", "_tape", "_nid")

    def __init__(self, data, requires_grad=False, name=None):
        arr = np.asarray(data)
        if arr.dtype not in (F32, F64):
            arr = arr.astype(F64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self._tape = None
        self._nid = -1

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{tag})"


def parameter(data, name=None) -> Tensor:
    return Tensor(np.array(data), requires_grad=True, name=name)


def constant(data, dtype=None) -> Tensor:
    arr = np.asarray(data)
    if dtype is not None:
        arr = arr.astype(dtype)
    return Tensor(arr, requires_grad=False)


class TapeNode:
    __slots__ = ("op", "parents", "vjp", "grad", "grad_owned", "tensor")

    def __init__(self, op, parents, vjp, tensor):
        self.op = op
        self.parents = parents   # parent node ids, creation order
        self.vjp = vjp           # None for leaves
        self.grad = None         # accumulator, allocated on first touch
        self.grad_owned = False  # False while grad aliases a vjp output
        self.tensor = tensor


class Tape:
    def __init__(self):
        self.nodes: list[TapeNode] = []

    def _register_leaf(self, t: Tensor) -> int:
        nid = len(self.nodes)
        self.nodes.append(TapeNode("leaf", (), None, t))
        t._tape = self
        t._nid = nid
        return nid

    def _node_id(self, t: Tensor) -> int:
        if t._tape is self:
            return t._nid
        return self._register_leaf(t)


_ACTIVE: Tape | None = None


@contextmanager
def tape():
    """Open a fresh tape; ops inside record nodes for tracked inputs."""
    global _ACTIVE
    prev = _ACTIVE
    _ACTIVE = Tape()
    try:
        yield _ACTIVE
    finally:
        _ACTIVE = prev


@contextmanager
def no_grad():
    global _ACTIVE
    prev = _ACTIVE
    _ACTIVE = None
    try:
        yield
    finally:
        _ACTIVE = prev


def active_tape() -> Tape | None:
    return _ACTIVE


def check_finite(arr, op):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"op {op!r} produced non-finite values")


def record(op, inputs, out_data, vjp) -> Tensor:
    """Create the output tensor of `op`, recording a node when tracked.

    `vjp(grad_out) -> tuple[np.ndarray | None, ...]` aligned with `inputs`;
    entries for untracked inputs are ignored.
    """
    check_finite(out_data, op)
    t = _ACTIVE
    tracked = [x for x in inputs if isinstance(x, Tensor) and x.requires_grad]
    out = Tensor(out_data, requires_grad=bool(tracked) and t is not None)
    if not out.requires_grad:
        return out
    idx = []
    pids = []
    for i, x in enumerate(inputs):
        if isinstance(x, Tensor) and x.requires_grad:
            idx.append(i)
            pids.append(t._node_id(x))

    def node_vjp(g, _vjp=vjp, _idx=tuple(idx)):
        gs = _vjp(g)
        return [gs[i] for i in _idx]

    nid = len(t.nodes)
    t.nodes.append(TapeNode(op, tuple(pids), node_vjp, out))
    out._tape = t
    out._nid = nid
    return out


def backward(loss: Tensor, params=None):
    """Accumulate gradients of a scalar loss into every reachable leaf.

    Returns a dict {id(param): grad} when `params` is given, with zeros for
    parameters the loss does not reach.
    """
    if loss._tape is None or loss._nid < 0:
        raise DiffcoreError("loss is not on a tape (nothing recorded)")
    if loss.data.shape != ():
        raise ShapeError(f"backward root must be scalar, got {loss.data.shape}")
    t = loss._tape
    nodes = t.nodes
    root = nodes[loss._nid]
    root.grad = np.ones((), dtype=loss.dtype)
    root.grad_owned = True
    for node in reversed(nodes):
        if node.grad is None or node.vjp is None:
            continue
        gs = node.vjp(node.grad)
        for pid, g in zip(node.parents, gs):
            if g is None:
                continue
            p = nodes[pid]
            g = g.astype(p.tensor.dtype, copy=False).reshape(p.tensor.shape)
            if p.grad is None:
                # borrow the vjp output; copy only if a second contribution
                # arrives (vjps may alias one array across parents)
                p.grad = g
            elif not p.grad_owned:
                p.grad = p.grad + g
                p.grad_owned = True
            else:
                p.grad += g
    for node in nodes:
        if node.vjp is None and node.grad is not None:
            node.tensor.grad = node.grad
    if params is None:
        return None
    out = {}
    for p in params:
        node_grad = None
        if p._tape is t and 0 <= p._nid < len(nodes):
            node_grad = nodes[p._nid].grad
        out[id(p)] = node_grad if node_grad is not None else np.zeros_like(p.data)
    return out
