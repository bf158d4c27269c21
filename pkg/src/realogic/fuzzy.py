"""Fuzzy connectives, quantifier aggregators and the knowledge-base aggregator.

Three operator families are available. ``product`` uses the product t-norm,
probabilistic sum and Reichenbach implication; ``godel`` uses min/max and
Goedel implication; ``lukasiewicz`` uses the bounded sum/difference. Negation
is ``1 - u`` throughout.

Quantifiers default to the generalized-mean pair (p-mean for exists,
p-mean-error for forall) except under ``godel``, which uses max/min. Set
``SemanticsConfig.aggregators`` to pick either pair independently of the
connective family.
"""

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from . import tensor as T
from .errors import EmptyKnowledgeBase, OutOfRangeTruth
from .tensor import Tensor

FAMILIES = ("product", "godel", "lukasiewicz")
AGGREGATORS = ("pmean", "minmax")
RANGE_TOL = 1e-9

_FAMILY_ALIASES = {
    "product": "product",
    "godel": "godel",
    "gödel": "godel",
    "goedel": "godel",
    "lukasiewicz": "lukasiewicz",
    "łukasiewicz": "lukasiewicz",
}


@dataclass(frozen=True)
class SemanticsConfig:
    family: str = "product"
    p_exists: float = 2.0
    p_forall: float = 2.0
    p_satagg: float = 2.0
    epsilon: float = 1e-7
    stabilize: bool = True
    aggregators: Optional[str] = None

    def __post_init__(self):
        family = _FAMILY_ALIASES.get(str(self.family).lower())
        if family is None:
            raise ValueError(f"unknown semantics family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "family", family)
        for name in ("p_exists", "p_forall", "p_satagg"):
            if not getattr(self, name) >= 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0 < self.epsilon < 0.01:
            raise ValueError(f"epsilon must lie in (0, 0.01), got {self.epsilon}")
        if self.aggregators is not None and self.aggregators not in AGGREGATORS:
            raise ValueError(f"aggregators must be one of {AGGREGATORS} or None")

    @property
    def quantifier_aggregators(self) -> str:
        if self.aggregators is not None:
            return self.aggregators
        return "minmax" if self.family == "godel" else "pmean"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SemanticsConfig":
        return cls(**d)


def check_truth(*values: Tensor):
    for v in values:
        arr = v.value
        if np.any(np.isnan(arr)):
            raise OutOfRangeTruth(f"truth values must lie in [0, 1]; got {int(np.isnan(arr).sum())} NaN value(s)")
        if np.any(arr < -RANGE_TOL) or np.any(arr > 1 + RANGE_TOL):
            raise OutOfRangeTruth(
                f"truth values must lie in [0, 1]; got range [{arr.min():.6g}, {arr.max():.6g}]"
            )


def _truths(*xs):
    ts = tuple(T.as_tensor(x) for x in xs)
    check_truth(*ts)
    return ts


def neg(cfg: SemanticsConfig, u) -> Tensor:
    (u,) = _truths(u)
    return T.complement(u)


def conj(cfg: SemanticsConfig, u, v) -> Tensor:
    u, v = _truths(u, v)
    if cfg.family == "product":
        return u * v
    if cfg.family == "godel":
        return T.minimum(u, v)
    return T.maximum(T.affine_scalar(u + v, shift=-1.0), 0.0)


def disj(cfg: SemanticsConfig, u, v) -> Tensor:
    u, v = _truths(u, v)
    if cfg.family == "product":
        return u + v - u * v
    if cfg.family == "godel":
        return T.maximum(u, v)
    return T.minimum(u + v, 1.0)


def implies(cfg: SemanticsConfig, u, v) -> Tensor:
    u, v = _truths(u, v)
    if cfg.family == "product":
        return T.complement(u) + u * v
    if cfg.family == "godel":
        shape = T.broadcast_shapes(u.shape, v.shape)
        return T.where(np.broadcast_to(u.value <= v.value, shape), np.ones(shape), v)
    return T.minimum(T.complement(u) + v, 1.0)


def iff(cfg: SemanticsConfig, u, v) -> Tensor:
    return conj(cfg, implies(cfg, u, v), implies(cfg, v, u))


def exists_agg(cfg: SemanticsConfig, body, dim: int) -> Tensor:
    (body,) = _truths(body)
    if cfg.quantifier_aggregators == "minmax":
        return T.reduce_max(body, dim)
    return T.reduce_pmean(body, dim, cfg.p_exists, stabilize=cfg.stabilize, eps=cfg.epsilon)


def forall_agg(cfg: SemanticsConfig, body, dim: int) -> Tensor:
    (body,) = _truths(body)
    if cfg.quantifier_aggregators == "minmax":
        return T.reduce_min(body, dim)
    return T.reduce_pmean_error(body, dim, cfg.p_forall, stabilize=cfg.stabilize, eps=cfg.epsilon)


def sat_agg(cfg: SemanticsConfig, truths: Sequence) -> Tensor:
    """Aggregate scalar formula truths with p-mean-error (``p_satagg``)."""
    truths = list(truths)
    if not truths:
        raise EmptyKnowledgeBase("cannot aggregate an empty list of formula truths")
    stacked = T.stack([T.reshape(T.as_tensor(t), ()) for t in truths])
    check_truth(stacked)
    return T.reduce_pmean_error(stacked, 0, cfg.p_satagg, stabilize=cfg.stabilize, eps=cfg.epsilon)
