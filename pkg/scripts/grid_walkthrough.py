"""Step through the grounding of `forall x: exists y: P(x, y) and Q(y)`.

x ranges over 3 individuals and y over 2; P and Q read fixed truth tables.
Each intermediate tensor is printed with its free variables.
"""

import argparse

import numpy as np

from realogic import tensor as T
from realogic.fuzzy import FAMILIES, SemanticsConfig
from realogic.logic import Environment, PredicateSymbol, eval_formula
from realogic.parser import parse
from realogic.syntax import Signature

P_TABLE = np.array([[0.9, 0.2], [0.4, 0.7], [0.1, 0.6]])
Q_TABLE = np.array([0.3, 0.8])
STEPS = ["P(x, y)", "Q(y)", "P(x, y) and Q(y)", "exists y: P(x, y) and Q(y)", "forall x: exists y: P(x, y) and Q(y)"]


def lookup(table):
    return lambda *args: T.Tensor(table[tuple(a.value[:, 0].astype(int) for a in args)])


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--family", choices=FAMILIES, default="product")
    ap.add_argument("--p", type=float, default=2.0, help="exponent for both quantifiers")
    args = ap.parse_args()

    sig = Signature(variables={"x", "y"}, predicates={"P": 2, "Q": 1})
    env = Environment(
        variables={"x": np.arange(3.0)[:, None], "y": np.arange(2.0)[:, None]},
        predicates={"P": PredicateSymbol("P", 2, lookup(P_TABLE)), "Q": PredicateSymbol("Q", 1, lookup(Q_TABLE))},
        semantics=SemanticsConfig(family=args.family, p_exists=args.p, p_forall=args.p),
    )
    np.set_printoptions(precision=6, suppress=True)
    for text in STEPS:
        obj = eval_formula(parse(text, sig), env)
        print(f"{text}\n  free vars {list(obj.free_vars)}, shape {obj.value.shape}\n  {obj.value.value}\n")


if __name__ == "__main__":
    main()
