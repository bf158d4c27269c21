"""Grounding engine.

Every grounded expression is an :class:`LtnObject`: a tensor whose leading
dimensions correspond, in order, to its free variables (terms additionally
carry trailing feature dimensions). Sub-results are aligned to a shared
variable order and broadcast before connectives are applied; quantifiers
aggregate the dimension owned by the quantified variable.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import fuzzy
from . import tensor as T
from .errors import (
    ArityMismatch,
    DuplicateVariableConflict,
    EmptyGrounding,
    OutOfRangeTruth,
    QuantifyingAbsentVariable,
    ShapeMismatch,
    UnboundSymbol,
)
from .fuzzy import SemanticsConfig
from .syntax import And, Atom, Const, Exists, Forall, Func, Iff, Implies, Not, Or, Var
from .tensor import Tensor

Model = Callable[..., Tensor]


@dataclass
class LtnObject:
    value: Tensor
    free_vars: Tuple[str, ...]

    def __post_init__(self):
        self.free_vars = tuple(self.free_vars)
        if len(set(self.free_vars)) != len(self.free_vars):
            raise DuplicateVariableConflict(f"repeated free variable in {self.free_vars}")
        if self.value.ndim < len(self.free_vars):
            raise ShapeMismatch(f"tensor of shape {self.value.shape} cannot carry free variables {self.free_vars}")

    @property
    def shape(self):
        return self.value.shape


@dataclass
class PredicateSymbol:
    """``model`` takes ``arity`` batch-first feature tensors and returns ``[batch]`` truths."""

    name: str
    arity: int
    model: Model


@dataclass
class FunctionSymbol:
    """``model`` takes ``arity`` batch-first feature tensors and returns ``[batch, *features]``."""

    name: str
    arity: int
    model: Model
    output_feature_shape: Optional[Tuple[int, ...]] = None


@dataclass
class Environment:
    """Bindings for every symbol a formula may mention, plus the active semantics.

    ``variables`` map labels to individuals of shape ``[n, *features]``;
    ``constants`` map labels to feature tensors.
    """

    variables: Dict[str, Tensor] = field(default_factory=dict)
    constants: Dict[str, Tensor] = field(default_factory=dict)
    predicates: Dict[str, PredicateSymbol] = field(default_factory=dict)
    functions: Dict[str, FunctionSymbol] = field(default_factory=dict)
    semantics: SemanticsConfig = field(default_factory=SemanticsConfig)

    def __post_init__(self):
        self.variables = {k: _individuals(k, v) for k, v in self.variables.items()}
        self.constants = {k: T.as_tensor(v) for k, v in self.constants.items()}

    def bind(self, **variables) -> "Environment":
        """Copy of this environment with some variables re-grounded."""
        return replace(self, variables={**self.variables, **variables})


def _individuals(label: str, value) -> Tensor:
    t = T.as_tensor(value)
    if t.ndim == 0:
        raise EmptyGrounding(f"variable {label!r} needs a sequence of individuals, got a scalar")
    return t


# ----------------------------------------------------------------- alignment

def align_broadcast(objs: Sequence[LtnObject]) -> Tuple[List[Tensor], Tuple[str, ...]]:
    """Lay every object's variable dimensions out in one shared order.

    The merged order is the union of free variables by first appearance.
    Variables an object lacks become extent-1 dimensions; feature dimensions
    stay trailing.
    """
    merged: List[str] = []
    extents: Dict[str, int] = {}
    for obj in objs:
        for i, v in enumerate(obj.free_vars):
            n = obj.value.shape[i]
            if v not in extents:
                merged.append(v)
                extents[v] = n
            elif extents[v] != n:
                raise DuplicateVariableConflict(f"variable {v!r} has extents {extents[v]} and {n}")
    out = []
    for obj in objs:
        k = len(obj.free_vars)
        t = obj.value
        order = [obj.free_vars.index(v) for v in merged if v in obj.free_vars]
        perm = order + list(range(k, t.ndim))
        if perm != list(range(t.ndim)):
            t = T.permute(t, perm)
        target = tuple(extents[v] if v in obj.free_vars else 1 for v in merged) + t.shape[k:]
        if target != t.shape:
            t = T.reshape(t, target)
        out.append(t)
    return out, tuple(merged)


def _apply_model(model: Model, objs: Sequence[LtnObject], name: str) -> Tuple[Tensor, Tuple[str, ...]]:
    """Run ``model`` on every cell of the joint variable grid of ``objs``."""
    tensors, merged = align_broadcast(objs)
    grid = tuple(max(t.shape[i] for t in tensors) for i in range(len(merged)))
    batch = int(np.prod(grid, dtype=np.int64)) if grid else 1
    flat = []
    for t in tensors:
        feat = t.shape[len(merged):]
        if t.shape[: len(merged)] != grid:
            t = T.expand(t, grid + feat)
        flat.append(T.reshape(t, (batch,) + feat))
    out = model(*flat)
    if not isinstance(out, Tensor):
        raise TypeError(f"model of {name!r} must return a Tensor, got {type(out).__name__}")
    if out.ndim == 0 or out.shape[0] != batch:
        raise ShapeMismatch(f"model of {name!r} returned shape {out.shape} for a batch of {batch}")
    return T.reshape(out, grid + out.shape[1:]), merged


# ---------------------------------------------------------------- evaluation

def eval_term(ast, env: Environment) -> LtnObject:
    if isinstance(ast, Var):
        if ast.label not in env.variables:
            raise UnboundSymbol(f"variable {ast.label!r} is not grounded")
        return LtnObject(env.variables[ast.label], (ast.label,))
    if isinstance(ast, Const):
        if ast.label not in env.constants:
            raise UnboundSymbol(f"constant {ast.label!r} is not grounded")
        return LtnObject(env.constants[ast.label], ())
    if isinstance(ast, Func):
        sym = env.functions.get(ast.name)
        if sym is None:
            raise UnboundSymbol(f"function {ast.name!r} is not grounded")
        if len(ast.args) != sym.arity:
            raise ArityMismatch(f"function {ast.name!r} takes {sym.arity} argument(s), got {len(ast.args)}")
        value, merged = _apply_model(sym.model, [eval_term(a, env) for a in ast.args], ast.name)
        return LtnObject(value, merged)
    raise TypeError(f"not a term: {ast!r}")


_CONNECTIVES = {And: fuzzy.conj, Or: fuzzy.disj, Implies: fuzzy.implies, Iff: fuzzy.iff}


def eval_formula(ast, env: Environment, cfg: Optional[SemanticsConfig] = None) -> LtnObject:
    """Ground ``ast``; the result has one dimension per free variable."""
    cfg = cfg or env.semantics
    if isinstance(ast, Atom):
        sym = env.predicates.get(ast.pred)
        if sym is None:
            raise UnboundSymbol(f"predicate {ast.pred!r} is not grounded")
        if len(ast.args) != sym.arity:
            raise ArityMismatch(f"predicate {ast.pred!r} takes {sym.arity} argument(s), got {len(ast.args)}")
        value, merged = _apply_model(sym.model, [eval_term(a, env) for a in ast.args], ast.pred)
        if value.ndim != len(merged):
            raise ShapeMismatch(f"predicate {ast.pred!r} must return one truth per individual, got {value.shape}")
        try:
            fuzzy.check_truth(value)
        except OutOfRangeTruth as exc:
            raise OutOfRangeTruth(f"predicate {ast.pred!r}: {exc}") from None
        return LtnObject(value, merged)
    if isinstance(ast, Not):
        body = eval_formula(ast.f, env, cfg)
        return LtnObject(fuzzy.neg(cfg, body.value), body.free_vars)
    op = _CONNECTIVES.get(type(ast))
    if op is not None:
        (u, v), merged = align_broadcast([eval_formula(ast.f, env, cfg), eval_formula(ast.g, env, cfg)])
        return LtnObject(op(cfg, u, v), merged)
    if isinstance(ast, (Forall, Exists)):
        kind = "forall" if isinstance(ast, Forall) else "exists"
        return quantify(kind, ast.var, eval_formula(ast.f, env, cfg), cfg)
    raise TypeError(f"not a formula: {ast!r}")


def quantify(kind: str, var: str, body: LtnObject, cfg: SemanticsConfig) -> LtnObject:
    if var not in body.free_vars:
        raise QuantifyingAbsentVariable(f"{kind} {var}: variable {var!r} does not occur free in the body")
    dim = body.free_vars.index(var)
    agg = fuzzy.forall_agg if kind == "forall" else fuzzy.exists_agg
    rest = tuple(v for v in body.free_vars if v != var)
    return LtnObject(agg(cfg, body.value, dim), rest)


def free_vars_of(ast) -> List[str]:
    """Variables not captured by an enclosing quantifier, by first appearance."""
    out: List[str] = []

    def visit(node, bound):
        if isinstance(node, Var):
            if node.label not in bound and node.label not in out:
                out.append(node.label)
        elif isinstance(node, Const):
            pass
        elif isinstance(node, (Func, Atom)):
            for a in node.args:
                visit(a, bound)
        elif isinstance(node, Not):
            visit(node.f, bound)
        elif isinstance(node, (And, Or, Implies, Iff)):
            visit(node.f, bound)
            visit(node.g, bound)
        elif isinstance(node, (Forall, Exists)):
            visit(node.f, bound | {node.var})
        else:
            raise TypeError(f"not an AST node: {node!r}")

    visit(ast, frozenset())
    return out
