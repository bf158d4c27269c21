"""Differentiable fuzzy first-order logic on a small numpy autodiff core."""

from .fuzzy import SemanticsConfig
from .learn import (
    BatchSampler,
    KnowledgeBase,
    MlpModel,
    OptimizerState,
    ParamStore,
    loss,
    satisfaction,
    train,
)
from .logic import Environment, FunctionSymbol, LtnObject, PredicateSymbol, eval_formula, eval_term
from .parser import parse, pretty_print, tokenize
from .syntax import Signature
from .tensor import Tensor

__all__ = [
    "BatchSampler",
    "Environment",
    "FunctionSymbol",
    "KnowledgeBase",
    "LtnObject",
    "MlpModel",
    "OptimizerState",
    "ParamStore",
    "PredicateSymbol",
    "SemanticsConfig",
    "Signature",
    "Tensor",
    "eval_formula",
    "eval_term",
    "loss",
    "parse",
    "pretty_print",
    "satisfaction",
    "tokenize",
    "train",
]
