"""Config-driven command line: ``realogic train|eval|gradcheck``.

The config is one JSON file::

    {
      "signature": {"variables": ["dog", "cat"], "constants": [],
                    "functions": {}, "predicates": {"Dog": 1}},
      "datasets": {"dog": {"path": "data/blobs.csv", "features": ["x1", "x2"],
                           "filter": {"column": "label", "value": "1"}}, ...},
      "predicates": {"Dog": {"input_dim": 2, "hidden": [16, 16]}},
      "functions": {"f": {"input_dim": 4, "hidden": [8], "output_dim": 2}},
      "constants": {"c": {"value": [0.0, 1.0]}, "e": {"dim": 2, "learnable": true}},
      "semantics": {"family": "product", "p_exists": 2, "p_forall": 2, "p_satagg": 2},
      "training": {"epochs": 200, "batch_size": 32, "optimizer": "adam",
                   "lr": 0.001, "seed": 0},
      "formulas": [{"name": "phi1", "formula": "forall dog: Dog(dog)"}, ...]
    }

Dataset paths are relative to the config file.
"""

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import tensor as T
from .errors import (
    ConfigError,
    DataError,
    EmptyAfterFilter,
    MissingColumn,
    NonNumericCell,
    RealogicError,
    SyntaxProblem,
)
from .fuzzy import SemanticsConfig
from .learn import (
    BatchSampler,
    KnowledgeBase,
    MlpModel,
    OptimizerState,
    ParamStore,
    check_gradients,
    learnable_constant,
    loss,
    satisfaction,
    train,
)
from .logic import Environment, FunctionSymbol, PredicateSymbol
from .parser import parse
from .syntax import Signature

GRADCHECK_TOL = 1e-4


# -------------------------------------------------------------------- config

@dataclass
class DatasetBinding:
    path: str
    features: List[str]
    filter: Optional[Dict[str, str]] = None


@dataclass
class ModelSpec:
    input_dim: int
    hidden: List[int] = field(default_factory=lambda: [16, 16])
    output_dim: int = 1


@dataclass
class ConstantSpec:
    value: Optional[List[float]] = None
    dim: Optional[int] = None
    learnable: bool = False


@dataclass
class TrainingConfig:
    epochs: int = 200
    batch_size: int = 32
    optimizer: str = "adam"
    lr: float = 0.001
    momentum: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"training.optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        if self.epochs < 0 or self.batch_size < 1 or not self.lr > 0:
            raise ConfigError("training needs epochs >= 0, batch_size >= 1 and lr > 0")


@dataclass
class ExperimentConfig:
    signature: Signature
    datasets: Dict[str, DatasetBinding]
    predicates: Dict[str, ModelSpec]
    formulas: List[Tuple[str, str]]
    functions: Dict[str, ModelSpec] = field(default_factory=dict)
    constants: Dict[str, ConstantSpec] = field(default_factory=dict)
    semantics: SemanticsConfig = field(default_factory=SemanticsConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    base_dir: Path = field(default=Path("."), compare=False)

    @classmethod
    def from_dict(cls, d: dict, base_dir=".") -> "ExperimentConfig":
        try:
            return cls(
                signature=Signature.from_dict(d["signature"]),
                datasets={k: DatasetBinding(**v) for k, v in d.get("datasets", {}).items()},
                predicates={k: ModelSpec(**v) for k, v in d.get("predicates", {}).items()},
                functions={k: ModelSpec(**v) for k, v in d.get("functions", {}).items()},
                constants={k: ConstantSpec(**v) for k, v in d.get("constants", {}).items()},
                semantics=SemanticsConfig.from_dict(d.get("semantics", {})),
                training=TrainingConfig(**d.get("training", {})),
                formulas=[(f["name"], f["formula"]) for f in d["formulas"]],
                base_dir=Path(base_dir),
            )
        except KeyError as exc:
            raise ConfigError(f"missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        return {
            "signature": self.signature.to_dict(),
            "datasets": {k: asdict(v) for k, v in self.datasets.items()},
            "predicates": {k: asdict(v) for k, v in self.predicates.items()},
            "functions": {k: asdict(v) for k, v in self.functions.items()},
            "constants": {k: asdict(v) for k, v in self.constants.items()},
            "semantics": self.semantics.to_dict(),
            "training": asdict(self.training),
            "formulas": [{"name": n, "formula": f} for n, f in self.formulas],
        }


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return ExperimentConfig.from_dict(raw, base_dir=path.parent)


# ---------------------------------------------------------------------- data

def _matches(cell: str, wanted) -> bool:
    try:
        return float(cell) == float(wanted)
    except (TypeError, ValueError):
        return cell.strip() == str(wanted)


def load_csv(path, feature_columns: Sequence[str], filter: Optional[Dict[str, str]] = None) -> T.Tensor:
    """Read selected numeric columns of a headed CSV; one row per individual."""
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"dataset not found: {path}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: missing header row")
        header = [h.strip() for h in header]
        wanted = list(feature_columns)
        if filter is not None:
            wanted.append(filter["column"])
        for col in wanted:
            if col not in header:
                raise MissingColumn(f"{path}: no column {col!r} (have {header})")
        idx = [header.index(c) for c in feature_columns]
        fidx = header.index(filter["column"]) if filter is not None else None
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if fidx is not None and not _matches(row[fidx], filter["value"]):
                continue
            values = []
            for i, col in zip(idx, feature_columns):
                try:
                    values.append(float(row[i]))
                except (ValueError, IndexError):
                    cell = row[i] if i < len(row) else ""
                    raise NonNumericCell(
                        f"{path}: non-numeric cell {cell!r} at row {line_no}, column {col!r}", line_no, col
                    ) from None
            rows.append(values)
    if not rows:
        raise EmptyAfterFilter(f"{path}: no rows left after filter {filter}")
    return T.Tensor(np.array(rows, dtype=np.float64))


# ---------------------------------------------------------------- assembling

@dataclass
class Experiment:
    config: ExperimentConfig
    kb: KnowledgeBase
    env: Environment
    params: ParamStore
    data: Dict[str, np.ndarray]
    sampler_seed: int


def build_experiment(config: ExperimentConfig, seed: Optional[int] = None) -> Experiment:
    sig = config.signature
    formulas = []
    for name, text in config.formulas:
        try:
            formulas.append((name, parse(text, sig)))
        except SyntaxProblem as exc:
            raise type(exc)(f"formula {name!r}: {exc.message}", exc.offset, exc.text) from None
    kb = KnowledgeBase(formulas, sig)

    for v in sorted(sig.variables):
        if v not in config.datasets:
            raise ConfigError(f"variable {v!r} has no dataset binding")
    for kind, declared, specs in (("predicate", sig.predicates, config.predicates),
                                  ("function", sig.functions, config.functions)):
        for name in declared:
            if name not in specs:
                raise ConfigError(f"{kind} {name!r} has no model spec")
    for name in sig.constants:
        if name not in config.constants:
            raise ConfigError(f"constant {name!r} has no grounding")

    data = {}
    for label, b in config.datasets.items():
        data[label] = load_csv(config.base_dir / b.path, b.features, b.filter).value

    seed = config.training.seed if seed is None else seed
    init_ss, sampler_ss = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(init_ss)
    params = ParamStore()
    predicates, functions, constants = {}, {}, {}
    for name in sorted(sig.predicates):
        spec = config.predicates[name]
        model = MlpModel(name, spec.input_dim, spec.hidden, params, rng)
        predicates[name] = PredicateSymbol(name, sig.predicates[name], model)
    for name in sorted(sig.functions):
        spec = config.functions[name]
        model = MlpModel(name, spec.input_dim, spec.hidden, params, rng, output_dim=spec.output_dim, mode="function")
        functions[name] = FunctionSymbol(name, sig.functions[name], model, (spec.output_dim,))
    for name in sorted(sig.constants):
        spec = config.constants[name]
        if spec.learnable:
            if spec.dim is None:
                raise ConfigError(f"learnable constant {name!r} needs 'dim'")
            constants[name] = learnable_constant(name, spec.dim, params, rng)
        else:
            if spec.value is None:
                raise ConfigError(f"constant {name!r} needs 'value'")
            constants[name] = T.Tensor(spec.value)

    env = Environment(
        variables={k: T.Tensor(v) for k, v in data.items()},
        constants=constants,
        predicates=predicates,
        functions=functions,
        semantics=config.semantics,
    )
    sampler_seed = int(sampler_ss.generate_state(1)[0])
    return Experiment(config, kb, env, params, data, sampler_seed)


# ------------------------------------------------------------------ commands

def _table(names: Sequence[str], values: Sequence[float], agg: float) -> str:
    width = max([len(n) for n in names] + [len("SatAgg")])
    lines = [f"{n:<{width}}  {v:.6f}" for n, v in zip(names, values)]
    lines.append(f"{'SatAgg':<{width}}  {agg:.6f}")
    return "\n".join(lines)


def cmd_train(config_path, out_dir=None, seed=None) -> int:
    config = load_config(config_path)
    exp = build_experiment(config, seed)
    t = config.training
    out = Path(out_dir) if out_dir is not None else Path(config_path).parent / "out"
    out.mkdir(parents=True, exist_ok=True)
    sampler = BatchSampler(exp.data, t.batch_size, seed=exp.sampler_seed)
    opt = OptimizerState(kind=t.optimizer, lr=t.lr, momentum=t.momentum)
    log = train(exp.kb, exp.env, sampler, exp.params, opt, t.epochs)

    with (out / "metrics.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "mean_loss", "sat_agg", *exp.kb.names])
        for r in log.records:
            writer.writerow([r.epoch, f"{r.mean_loss:.9g}", f"{r.sat_agg:.9g}",
                             *(f"{r.per_formula[n]:.9g}" for n in exp.kb.names)])
    manifest = exp.params.save(out / "params")
    print(f"wrote {out / 'metrics.csv'} and {manifest}")
    if log.final is not None:
        final = log.final
        print(f"final epoch {final.epoch}: mean loss {final.mean_loss:.6f}")
        print(_table(exp.kb.names, [final.per_formula[n] for n in exp.kb.names], final.sat_agg))
    return 0


def cmd_eval(config_path, params_path=None, seed=None) -> int:
    config = load_config(config_path)
    exp = build_experiment(config, seed)
    if params_path is not None:
        try:
            exp.params.load(params_path)
        except FileNotFoundError as exc:
            raise DataError(f"parameter file not found: {exc.filename}") from None
        except (KeyError, ValueError) as exc:
            raise DataError(str(exc)) from None
    truths, agg = satisfaction(exp.kb, exp.env)
    print(_table(exp.kb.names, [t.item() for t in truths], agg.item()))
    return 0


def cmd_gradcheck(config_path, seed=None) -> int:
    config = load_config(config_path)
    exp = build_experiment(config, seed)
    if len(exp.params) == 0:
        print("no learnable parameters")
        return 0
    _, _, rel = check_gradients(lambda: loss(exp.kb, exp.env), exp.params, h=1e-5)
    ok = rel < GRADCHECK_TOL
    print(f"parameters: {exp.params.size()}")
    print(f"max relative error: {rel:.3e} ({'ok' if ok else 'FAIL'}, tolerance {GRADCHECK_TOL:g})")
    return 0 if ok else 1


# ---------------------------------------------------------------------- main

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="realogic", description="Differentiable fuzzy first-order logic experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("train", "train groundings to satisfy the knowledge base"),
                        ("eval", "report formula satisfaction on the full datasets"),
                        ("gradcheck", "compare backprop gradients with finite differences")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="experiment JSON config")
        sp.add_argument("--params", help="parameter manifest (eval)")
        sp.add_argument("--out", help="output directory (train; default: <config dir>/out)")
        sp.add_argument("--seed", type=int, help="override training.seed")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "train":
            return cmd_train(args.config, args.out, args.seed)
        if args.command == "eval":
            return cmd_eval(args.config, args.params, args.seed)
        return cmd_gradcheck(args.config, args.seed)
    except RealogicError as exc:
        print(f"ERROR {exc.code} {args.config}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
