"""Term and formula ASTs plus the symbol signature."""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Tuple, Union

from .errors import SignatureError


@dataclass(frozen=True)
class Var:
    label: str


@dataclass(frozen=True)
class Const:
    label: str


@dataclass(frozen=True)
class Func:
    name: str
    args: Tuple["Term", ...]


Term = Union[Var, Const, Func]


@dataclass(frozen=True)
class Atom:
    pred: str
    args: Tuple[Term, ...]


@dataclass(frozen=True)
class Not:
    f: "Formula"


@dataclass(frozen=True)
class And:
    f: "Formula"
    g: "Formula"


@dataclass(frozen=True)
class Or:
    f: "Formula"
    g: "Formula"


@dataclass(frozen=True)
class Implies:
    f: "Formula"
    g: "Formula"


@dataclass(frozen=True)
class Iff:
    f: "Formula"
    g: "Formula"


@dataclass(frozen=True)
class Forall:
    var: str
    f: "Formula"


@dataclass(frozen=True)
class Exists:
    var: str
    f: "Formula"


Formula = Union[Atom, Not, And, Or, Implies, Iff, Forall, Exists]
Binary = (And, Or, Implies, Iff)
Quantifier = (Forall, Exists)


@dataclass(frozen=True)
class Signature:
    variables: FrozenSet[str] = frozenset()
    constants: FrozenSet[str] = frozenset()
    functions: Dict[str, int] = field(default_factory=dict)
    predicates: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "variables", frozenset(self.variables))
        object.__setattr__(self, "constants", frozenset(self.constants))
        object.__setattr__(self, "functions", dict(self.functions))
        object.__setattr__(self, "predicates", dict(self.predicates))
        groups = [self.variables, self.constants, set(self.functions), set(self.predicates)]
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                clash = groups[i] & groups[j]
                if clash:
                    raise SignatureError(f"symbol(s) declared with two kinds: {sorted(clash)}")
        for name, arity in {**self.functions, **self.predicates}.items():
            if int(arity) < 1:
                raise SignatureError(f"symbol {name!r} must have arity >= 1, got {arity}")

    def kind_of(self, name: str):
        if name in self.variables:
            return "variable"
        if name in self.constants:
            return "constant"
        if name in self.functions:
            return "function"
        if name in self.predicates:
            return "predicate"
        return None

    def to_dict(self) -> dict:
        return {
            "variables": sorted(self.variables),
            "constants": sorted(self.constants),
            "functions": dict(sorted(self.functions.items())),
            "predicates": dict(sorted(self.predicates.items())),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Signature":
        return cls(
            variables=d.get("variables", ()),
            constants=d.get("constants", ()),
            functions=d.get("functions", {}),
            predicates=d.get("predicates", {}),
        )
