"""N-dimensional float64 tensors with broadcasting and reverse-mode autodiff.

Graphs are built define-by-run: every operation on a tensor that requires
grad returns a new tensor holding references to its inputs and a backward
rule. :func:`backward` linearises the graph reachable from a scalar root into
a :class:`Tape` (topological order) and replays the rules in reverse.

Numerical kernels are numpy; shape semantics (broadcasting, reductions,
gradient un-broadcasting) are defined here.
"""

import itertools
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    IncompatibleShapes,
    InvalidAxis,
    InvalidExponent,
    NonScalarRoot,
    ShapeMismatch,
)

Shape = Tuple[int, ...]
ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]
BackwardRule = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

DEFAULT_EPS = 1e-7

_node_ids = itertools.count()
_SIGMOID_HI = np.nextafter(1.0, 0.0)
_SIGMOID_LO = np.finfo(np.float64).tiny


class Tensor:
    """A float64 array that can take part in an autodiff graph."""

    __slots__ = ("value", "requires_grad", "grad", "node_id", "op", "_parents", "_backward")

    def __init__(self, value, requires_grad: bool = False):
        arr = np.array(value, dtype=np.float64)
        if any(d <= 0 for d in arr.shape):
            raise ShapeMismatch(f"tensor extents must be positive, got shape {arr.shape}")
        self.value = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.node_id = next(_node_ids)
        self.op = "leaf"
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardRule] = None

    @property
    def shape(self) -> Shape:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def size(self) -> int:
        return self.value.size

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def item(self) -> float:
        return float(self.value)

    def numpy(self) -> np.ndarray:
        return self.value.copy()

    def detach(self) -> "Tensor":
        return Tensor(self.value)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({np.array2string(self.value, precision=6)}{flag})"

    def __add__(self, other):
        return ew_binary("add", self, other)

    def __radd__(self, other):
        return ew_binary("add", other, self)

    def __sub__(self, other):
        return ew_binary("sub", self, other)

    def __rsub__(self, other):
        return ew_binary("sub", other, self)

    def __mul__(self, other):
        return ew_binary("mul", self, other)

    def __rmul__(self, other):
        return ew_binary("mul", other, self)

    def __neg__(self):
        return ew_unary("affine_scalar", self, scale=-1.0)


def as_tensor(x: ArrayLike) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_node(value: np.ndarray, parents: Sequence[Tensor], rule: BackwardRule, op: str) -> Tensor:
    """Wrap ``value`` as the output of an operation on ``parents``.

    ``rule`` maps the gradient w.r.t. the output to one gradient per parent
    (``None`` for parents that need none). Nothing is recorded when no parent
    requires grad.
    """
    out = Tensor.__new__(Tensor)
    out.value = np.asarray(value, dtype=np.float64)
    out.grad = None
    out.node_id = next(_node_ids)
    out.op = op
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = rule
    else:
        out._parents = ()
        out._backward = None
    return out


# ---------------------------------------------------------------- broadcasting

def broadcast_shapes(a: Sequence[int], b: Sequence[int]) -> Shape:
    """Trailing-aligned broadcast of two shapes; extent 1 stretches."""
    a, b = tuple(a), tuple(b)
    n = max(len(a), len(b))
    pa = (1,) * (n - len(a)) + a
    pb = (1,) * (n - len(b)) + b
    out = []
    for da, db in zip(pa, pb):
        if da != db and da != 1 and db != 1:
            raise IncompatibleShapes(f"cannot broadcast shapes {a} and {b}")
        out.append(max(da, db))
    return tuple(out)


def unbroadcast(grad: np.ndarray, shape: Shape) -> np.ndarray:
    """Sum ``grad`` over the dimensions that broadcasting added or stretched."""
    if grad.shape == shape:
        return grad
    lead = grad.ndim - len(shape)
    if lead:
        grad = grad.sum(axis=tuple(range(lead)))
    stretched = tuple(i for i, d in enumerate(shape) if d == 1 and grad.shape[i] != 1)
    if stretched:
        grad = grad.sum(axis=stretched, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------- element-wise

def ew_binary(kind: str, a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_shape = broadcast_shapes(a.shape, b.shape)
    av, bv = a.value, b.value
    if kind == "add":
        value = av + bv

        def rule(g):
            return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    elif kind == "sub":
        value = av - bv

        def rule(g):
            return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)

    elif kind == "mul":
        value = av * bv

        def rule(g):
            return unbroadcast(g * bv, a.shape), unbroadcast(g * av, b.shape)

    else:
        raise ValueError(f"unknown binary kind {kind!r}")
    assert value.shape == out_shape
    return make_node(value, (a, b), rule, kind)


def add(a, b):
    return ew_binary("add", a, b)


def sub(a, b):
    return ew_binary("sub", a, b)


def mul(a, b):
    return ew_binary("mul", a, b)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return np.clip(out, _SIGMOID_LO, _SIGMOID_HI)


def ew_unary(kind: str, a: ArrayLike, scale: float = 1.0, shift: float = 0.0) -> Tensor:
    """Element-wise ``neg_complement`` (1-u), ``sigmoid`` or ``affine_scalar``
    (scale*u + shift)."""
    a = as_tensor(a)
    if kind == "neg_complement":
        value = 1.0 - a.value

        def rule(g):
            return (-g,)

    elif kind == "sigmoid":
        value = _sigmoid(a.value)

        def rule(g):
            return (g * value * (1.0 - value),)

    elif kind == "affine_scalar":
        value = scale * a.value + shift

        def rule(g):
            return (g * scale,)

    else:
        raise ValueError(f"unknown unary kind {kind!r}")
    return make_node(value, (a,), rule, kind)


def complement(a):
    return ew_unary("neg_complement", a)


def sigmoid(a):
    return ew_unary("sigmoid", a)


def affine_scalar(a, scale=1.0, shift=0.0):
    return ew_unary("affine_scalar", a, scale=scale, shift=shift)


def elu(a: ArrayLike, alpha: float = 1.0) -> Tensor:
    a = as_tensor(a)
    x = a.value
    neg = x <= 0
    value = np.where(neg, alpha * np.expm1(np.minimum(x, 0.0)), x)

    def rule(g):
        return (g * np.where(neg, value + alpha, 1.0),)

    return make_node(value, (a,), rule, "elu")


def minimum(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Element-wise min; on ties the gradient goes to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    broadcast_shapes(a.shape, b.shape)
    take_a = a.value <= b.value
    value = np.where(take_a, a.value, b.value)

    def rule(g):
        return unbroadcast(g * take_a, a.shape), unbroadcast(g * ~take_a, b.shape)

    return make_node(value, (a, b), rule, "minimum")


def maximum(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Element-wise max; on ties the gradient goes to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    broadcast_shapes(a.shape, b.shape)
    take_a = a.value >= b.value
    value = np.where(take_a, a.value, b.value)

    def rule(g):
        return unbroadcast(g * take_a, a.shape), unbroadcast(g * ~take_a, b.shape)

    return make_node(value, (a, b), rule, "maximum")


def where(mask: np.ndarray, a: ArrayLike, b: ArrayLike) -> Tensor:
    """Select ``a`` where ``mask`` holds, else ``b``. The mask is not differentiated."""
    a, b = as_tensor(a), as_tensor(b)
    mask = np.asarray(mask, dtype=bool)
    shape = broadcast_shapes(broadcast_shapes(a.shape, b.shape), mask.shape)
    value = np.where(mask, a.value, b.value)

    def rule(g):
        g = np.broadcast_to(g, shape)
        return unbroadcast(np.where(mask, g, 0.0), a.shape), unbroadcast(np.where(mask, 0.0, g), b.shape)

    return make_node(value, (a, b), rule, "where")


def clamp(a: ArrayLike, lo: float, hi: float) -> Tensor:
    """Clip to [lo, hi]; gradient passes only where the input was inside."""
    a = as_tensor(a)
    inside = (a.value >= lo) & (a.value <= hi)
    value = np.clip(a.value, lo, hi)

    def rule(g):
        return (g * inside,)

    return make_node(value, (a,), rule, "clamp")


# ------------------------------------------------------------------ reductions

def _axis(a: Tensor, dim: int) -> int:
    if not isinstance(dim, (int, np.integer)) or not -a.ndim <= dim < a.ndim:
        raise InvalidAxis(f"axis {dim} out of range for shape {a.shape}")
    return int(dim) % a.ndim


def reduce_pmean(a: ArrayLike, dim: int, p: float, stabilize: bool = True, eps: float = DEFAULT_EPS) -> Tensor:
    """Generalized mean ``((1/n) sum u_i^p)^(1/p)`` along ``dim``.

    With ``stabilize`` the inputs are first clamped to ``[eps, 1 - eps]`` so
    the result is bounded away from zero and the gradient stays finite.
    """
    a = as_tensor(a)
    ax = _axis(a, dim)
    if not p >= 1:
        raise InvalidExponent(f"p must be >= 1, got {p}")
    x = clamp(a, eps, 1.0 - eps) if stabilize else a
    w = x.value
    n = w.shape[ax]
    s = np.mean(w ** p, axis=ax)
    value = s ** (1.0 / p)

    def rule(g):
        out = np.expand_dims(value, ax)
        with np.errstate(divide="ignore", invalid="ignore"):
            local = (w ** (p - 1.0)) * out ** (1.0 - p) / n
        # all-zero slices (unstabilized only): take the zero subgradient
        local = np.where(np.isfinite(local), local, 0.0)
        return (np.expand_dims(g, ax) * local,)

    return make_node(value, (x,), rule, "reduce_pmean")


def reduce_pmean_error(a: ArrayLike, dim: int, p: float, stabilize: bool = True, eps: float = DEFAULT_EPS) -> Tensor:
    """``1 - ((1/n) sum (1-u_i)^p)^(1/p)`` along ``dim``."""
    return complement(reduce_pmean(complement(a), dim, p, stabilize=stabilize, eps=eps))


def _reduce_arg(a: ArrayLike, dim: int, pick: Callable, op: str) -> Tensor:
    a = as_tensor(a)
    ax = _axis(a, dim)
    idx = np.expand_dims(pick(a.value, axis=ax), ax)  # first index among ties
    value = np.take_along_axis(a.value, idx, axis=ax).squeeze(ax)

    def rule(g):
        full = np.zeros_like(a.value)
        np.put_along_axis(full, idx, np.expand_dims(g, ax), axis=ax)
        return (full,)

    return make_node(value, (a,), rule, op)


def reduce_min(a: ArrayLike, dim: int) -> Tensor:
    return _reduce_arg(a, dim, np.argmin, "reduce_min")


def reduce_max(a: ArrayLike, dim: int) -> Tensor:
    return _reduce_arg(a, dim, np.argmax, "reduce_max")


def reduce_sum(a: ArrayLike, dim: int) -> Tensor:
    a = as_tensor(a)
    ax = _axis(a, dim)
    value = a.value.sum(axis=ax)

    def rule(g):
        return (np.broadcast_to(np.expand_dims(g, ax), a.shape).copy(),)

    return make_node(value, (a,), rule, "reduce_sum")


# ------------------------------------------------------------------- linear

def affine(W: ArrayLike, x: ArrayLike, b: ArrayLike) -> Tensor:
    """``x @ W.T + b`` for ``W: [out, in]``, ``x: [..., in]``, ``b: [out]``."""
    W, x, b = as_tensor(W), as_tensor(x), as_tensor(b)
    if W.ndim != 2 or x.ndim < 1 or b.shape != (W.shape[0],):
        raise ShapeMismatch(f"affine expects W [out,in], x [...,in], b [out]; got {W.shape}, {x.shape}, {b.shape}")
    if x.shape[-1] != W.shape[1]:
        raise ShapeMismatch(f"inner dimensions differ: x {x.shape} vs W {W.shape}")
    value = x.value @ W.value.T + b.value

    def rule(g):
        g2 = g.reshape(-1, W.shape[0])
        x2 = x.value.reshape(-1, W.shape[1])
        return g2.T @ x2, g @ W.value, g2.sum(axis=0)

    return make_node(value, (W, x, b), rule, "affine")


# ------------------------------------------------------------------ movement

def reshape(a: ArrayLike, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    try:
        value = a.value.reshape(tuple(shape))
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from None

    def rule(g):
        return (g.reshape(a.shape),)

    return make_node(value, (a,), rule, "reshape")


def permute(a: ArrayLike, perm: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    perm = tuple(perm)
    if sorted(perm) != list(range(a.ndim)):
        raise InvalidAxis(f"{perm} is not a permutation of the axes of {a.shape}")
    value = np.transpose(a.value, perm)
    inverse = tuple(np.argsort(perm))

    def rule(g):
        return (np.transpose(g, inverse),)

    return make_node(value, (a,), rule, "permute")


def expand(a: ArrayLike, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    shape = tuple(shape)
    if broadcast_shapes(a.shape, shape) != shape:
        raise IncompatibleShapes(f"cannot expand {a.shape} to {shape}")
    value = np.broadcast_to(a.value, shape).copy()

    def rule(g):
        return (unbroadcast(g, a.shape),)

    return make_node(value, (a,), rule, "expand")


def concat(tensors: Sequence[ArrayLike], axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if len(ts) == 1:
        return ts[0]
    ax = _axis(ts[0], axis)
    try:
        value = np.concatenate([t.value for t in ts], axis=ax)
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from None
    splits = np.cumsum([t.shape[ax] for t in ts])[:-1]

    def rule(g):
        return tuple(np.split(g, splits, axis=ax))

    return make_node(value, ts, rule, "concat")


def stack(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeMismatch("cannot stack an empty list")
    try:
        value = np.stack([t.value for t in ts], axis=axis)
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from None

    def rule(g):
        return tuple(np.moveaxis(g, axis, 0))

    return make_node(value, ts, rule, "stack")


# ------------------------------------------------------------------ backward

@dataclass(frozen=True)
class TapeEntry:
    output: Tensor
    inputs: Tuple[int, ...]

    @property
    def node_id(self) -> int:
        return self.output.node_id


class Tape:
    """Operations reachable from a root, in topological order."""

    def __init__(self, root: Tensor):
        self.root = root
        self.entries = []
        seen = set()
        stack_ = [(root, False)]
        while stack_:
            node, expanded = stack_.pop()
            if expanded:
                self.entries.append(TapeEntry(node, tuple(p.node_id for p in node._parents)))
                continue
            if node.node_id in seen:
                continue
            seen.add(node.node_id)
            stack_.append((node, True))
            for parent in reversed(node._parents):
                if parent.requires_grad and parent.node_id not in seen:
                    stack_.append((parent, False))

    def __len__(self):
        return len(self.entries)

    def replay(self, seed: np.ndarray):
        grads = {self.root.node_id: np.asarray(seed, dtype=np.float64)}
        for entry in reversed(self.entries):
            node = entry.output
            g = grads.pop(node.node_id, None)
            if g is None:
                continue
            if node.is_leaf:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                pg = np.asarray(pg, dtype=np.float64).reshape(parent.shape)
                prev = grads.get(parent.node_id)
                grads[parent.node_id] = pg if prev is None else prev + pg


def backward(root: Tensor):
    """Accumulate d(root)/d(leaf) into ``leaf.grad`` for every reachable leaf."""
    if root.ndim != 0:
        raise NonScalarRoot(f"backward needs a scalar root, got shape {root.shape}")
    if not root.requires_grad:
        return
    Tape(root).replay(np.ones(()))
