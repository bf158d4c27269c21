"""Knowledge bases, learnable groundings, optimizers and the training loop."""

import json
import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import fuzzy
from . import tensor as T
from .errors import EmptyBatch, EmptyKnowledgeBase, NonFiniteLoss, OpenFormula, ShapeMismatch
from .fuzzy import SemanticsConfig
from .logic import Environment, eval_formula, free_vars_of
from .parser import parse
from .syntax import Signature
from .tensor import Tensor

logger = logging.getLogger(__name__)


# ------------------------------------------------------------ knowledge base

@dataclass
class KnowledgeBase:
    formulas: List[Tuple[str, object]]
    signature: Optional[Signature] = None

    def __post_init__(self):
        self.formulas = list(self.formulas)
        if not self.formulas:
            raise EmptyKnowledgeBase("a knowledge base needs at least one formula")
        names = [n for n, _ in self.formulas]
        if len(set(names)) != len(names):
            raise ValueError(f"formula names must be unique: {names}")
        for name, ast in self.formulas:
            free = free_vars_of(ast)
            if free:
                raise OpenFormula(f"formula {name!r} is not closed: free variable {', '.join(free)}")

    @classmethod
    def from_strings(cls, formulas: Mapping[str, str], signature: Signature) -> "KnowledgeBase":
        return cls([(name, parse(text, signature)) for name, text in formulas.items()], signature)

    @property
    def names(self) -> List[str]:
        return [n for n, _ in self.formulas]


def satisfaction(kb: KnowledgeBase, env: Environment, cfg: Optional[SemanticsConfig] = None):
    """Per-formula truth tensors and their SatAgg aggregate."""
    cfg = cfg or env.semantics
    truths = [eval_formula(ast, env, cfg).value for _, ast in kb.formulas]
    return truths, fuzzy.sat_agg(cfg, truths)


def loss(kb: KnowledgeBase, env: Environment, cfg: Optional[SemanticsConfig] = None) -> Tensor:
    _, agg = satisfaction(kb, env, cfg)
    return T.complement(agg)


# -------------------------------------------------------------- parameters

class ParamStore:
    """Named learnable tensors, kept in registration order."""

    def __init__(self):
        self._params: "OrderedDict[str, Tensor]" = OrderedDict()

    def register(self, name: str, value) -> Tensor:
        if name in self._params:
            raise ValueError(f"parameter {name!r} registered twice")
        t = value if isinstance(value, Tensor) else Tensor(value)
        t.requires_grad = True
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self):
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self) -> List[str]:
        return list(self._params)

    def zero_grad(self):
        for p in self:
            p.grad = None

    def size(self) -> int:
        return sum(p.size for p in self)

    def get_flat(self) -> np.ndarray:
        if not self._params:
            return np.zeros(0)
        return np.concatenate([p.value.ravel() for p in self])

    def set_flat(self, flat: np.ndarray):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.size():
            raise ShapeMismatch(f"expected {self.size()} values, got {flat.size}")
        i = 0
        for p in self:
            p.value = flat[i:i + p.size].reshape(p.shape).copy()
            i += p.size

    def grad_flat(self) -> np.ndarray:
        if not self._params:
            return np.zeros(0)
        return np.concatenate([(p.grad if p.grad is not None else np.zeros(p.shape)).ravel() for p in self])

    def save(self, path) -> Path:
        """Write ``<stem>.bin`` (little-endian float64) and a JSON manifest ``<stem>.json``.

        Returns the manifest path.
        """
        path = Path(path)
        manifest_path = path.with_suffix(".json")
        data_path = path.with_suffix(".bin")
        entries, offset = [], 0
        for name, p in self.items():
            entries.append({"name": name, "shape": list(p.shape), "offset": offset, "count": int(p.size)})
            offset += p.size
        self.get_flat().astype("<f8").tofile(data_path)
        manifest = {"dtype": "f64", "byteorder": "little", "data": data_path.name, "params": entries}
        manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
        return manifest_path

    def load(self, manifest_path):
        """Overwrite registered parameters from a manifest written by :meth:`save`."""
        manifest_path = Path(manifest_path)
        manifest = json.loads(manifest_path.read_text())
        if manifest.get("dtype") != "f64" or manifest.get("byteorder") != "little":
            raise ValueError(f"{manifest_path}: unsupported dtype/byteorder")
        flat = np.fromfile(manifest_path.parent / manifest["data"], dtype="<f8")
        seen = set()
        for entry in manifest["params"]:
            name = entry["name"]
            if name not in self._params:
                raise KeyError(f"{manifest_path}: unknown parameter {name!r}")
            p = self._params[name]
            if tuple(entry["shape"]) != p.shape:
                raise ShapeMismatch(f"{manifest_path}: parameter {name!r} has shape {entry['shape']}, expected {list(p.shape)}")
            chunk = flat[entry["offset"]:entry["offset"] + entry["count"]]
            p.value = chunk.astype(np.float64).reshape(p.shape)
            seen.add(name)
        missing = set(self._params) - seen
        if missing:
            raise KeyError(f"{manifest_path}: missing parameters {sorted(missing)}")


# -------------------------------------------------------------------- models

class MlpModel:
    """Fully connected network usable as a predicate or function grounding.

    Arguments are flattened per individual and concatenated, passed through
    ``affine -> elu`` hidden layers and a final affine layer. In predicate
    mode the output is squashed with a sigmoid and has shape ``[batch]``.
    """

    def __init__(
        self,
        name: str,
        input_dim: int,
        hidden: Sequence[int],
        params: ParamStore,
        rng: np.random.Generator,
        output_dim: int = 1,
        mode: str = "predicate",
    ):
        if mode not in ("predicate", "function"):
            raise ValueError(f"mode must be 'predicate' or 'function', got {mode!r}")
        if mode == "predicate" and output_dim != 1:
            raise ValueError("predicate models have a single output")
        self.name = name
        self.mode = mode
        self.widths = [int(input_dim), *map(int, hidden), int(output_dim)]
        self.layers = []
        for i, (fan_in, fan_out) in enumerate(zip(self.widths[:-1], self.widths[1:])):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            W = params.register(f"{name}.W{i}", rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            b = params.register(f"{name}.b{i}", np.zeros(fan_out))
            self.layers.append((W, b))

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    def __call__(self, *args: Tensor) -> Tensor:
        batch = args[0].shape[0]
        x = T.concat([T.reshape(a, (batch, -1)) for a in args], axis=-1)
        if x.shape[-1] != self.input_dim:
            raise ShapeMismatch(f"{self.name}: expected {self.input_dim} input features, got {x.shape[-1]}")
        for W, b in self.layers[:-1]:
            x = T.elu(T.affine(W, x, b))
        W, b = self.layers[-1]
        x = T.affine(W, x, b)
        if self.mode == "predicate":
            return T.reshape(T.sigmoid(x), (batch,))
        return x


def mlp_forward(model: MlpModel, inputs: Tensor) -> Tensor:
    return model(inputs)


def learnable_constant(name: str, dim: int, params: ParamStore, rng: np.random.Generator) -> Tensor:
    return params.register(name, rng.uniform(-0.1, 0.1, size=(dim,)))


# ---------------------------------------------------------------- optimizers

@dataclass
class OptimizerState:
    kind: str = "adam"
    lr: float = 0.001
    momentum: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    buffers: Dict[str, Dict[str, np.ndarray]] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.kind!r}")


def optimizer_step(opt: OptimizerState, params: ParamStore):
    """Update every parameter from its gradient, then clear gradients."""
    opt.step_count += 1
    t = opt.step_count
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros(p.shape)
        state = opt.buffers.setdefault(name, {})
        if opt.kind == "sgd":
            if opt.momentum:
                v = state["velocity"] = opt.momentum * state.get("velocity", 0.0) + g
            else:
                v = g
            p.value = p.value - opt.lr * v
        else:
            m = state["m"] = opt.beta1 * state.get("m", 0.0) + (1 - opt.beta1) * g
            v = state["v"] = opt.beta2 * state.get("v", 0.0) + (1 - opt.beta2) * g * g
            m_hat = m / (1 - opt.beta1 ** t)
            v_hat = v / (1 - opt.beta2 ** t)
            p.value = p.value - opt.lr * m_hat / (np.sqrt(v_hat) + opt.eps)
    params.zero_grad()


# ------------------------------------------------------------------- batches

class BatchSampler:
    """Shuffled mini-batches, one stream per variable label.

    An epoch has as many steps as the variable with the most batches; streams
    that run out earlier start a fresh shuffled pass.
    """

    def __init__(self, datasets: Mapping[str, np.ndarray], batch_size: int, seed: int = 0):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.datasets = {k: np.asarray(v, dtype=np.float64) for k, v in datasets.items()}
        for k, v in self.datasets.items():
            if v.ndim == 0 or len(v) == 0:
                raise EmptyBatch(f"dataset for variable {k!r} is empty")
        self.batch_size = int(batch_size)
        self.rng = np.random.default_rng(seed)
        self._pending: Dict[str, List[np.ndarray]] = {k: [] for k in self.datasets}

    def _batches(self, n: int) -> int:
        return -(-n // self.batch_size)

    def steps_per_epoch(self) -> int:
        return max(self._batches(len(v)) for v in self.datasets.values())

    def _next(self, label: str) -> np.ndarray:
        queue = self._pending[label]
        if not queue:
            perm = self.rng.permutation(len(self.datasets[label]))
            queue.extend(perm[i:i + self.batch_size] for i in range(0, len(perm), self.batch_size))
        return self.datasets[label][queue.pop(0)]

    def epoch(self) -> Iterator[Dict[str, np.ndarray]]:
        for label in self._pending:
            self._pending[label] = []
        for _ in range(self.steps_per_epoch()):
            yield {label: self._next(label) for label in self.datasets}


# ------------------------------------------------------------------ training

@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    sat_agg: float
    per_formula: Dict[str, float]


@dataclass
class TrainingLog:
    formula_names: List[str]
    records: List[EpochRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def final(self) -> Optional[EpochRecord]:
        return self.records[-1] if self.records else None


def train(
    kb: KnowledgeBase,
    env: Environment,
    sampler: BatchSampler,
    params: ParamStore,
    opt: OptimizerState,
    epochs: int,
    cfg: Optional[SemanticsConfig] = None,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
) -> TrainingLog:
    """Minimise ``1 - SatAgg`` one mini-batch at a time.

    Each step re-grounds the sampled variables, rebuilds the graph, and takes
    one optimizer step. Epoch statistics are arithmetic means over batches.
    """
    cfg = cfg or env.semantics
    log = TrainingLog(kb.names)
    for epoch in range(1, epochs + 1):
        losses, aggs, per = [], [], {n: [] for n in kb.names}
        for step, batch in enumerate(sampler.epoch()):
            for label, data in batch.items():
                if len(data) == 0:
                    raise EmptyBatch(f"epoch {epoch}, step {step}: empty batch for variable {label!r}")
            params.zero_grad()
            truths, agg = satisfaction(kb, env.bind(**batch), cfg)
            batch_loss = T.complement(agg)
            value = batch_loss.item()
            if not math.isfinite(value):
                detail = ", ".join(f"{n}={t.item():.6g}" for n, t in zip(kb.names, truths))
                raise NonFiniteLoss(f"epoch {epoch}, step {step}: loss is {value} ({detail})")
            T.backward(batch_loss)
            optimizer_step(opt, params)
            losses.append(value)
            aggs.append(agg.item())
            for n, t in zip(kb.names, truths):
                per[n].append(t.item())
        record = EpochRecord(
            epoch=epoch,
            mean_loss=float(np.mean(losses)),
            sat_agg=float(np.mean(aggs)),
            per_formula={n: float(np.mean(v)) for n, v in per.items()},
        )
        log.records.append(record)
        logger.debug("epoch %d loss %.6f sat %.6f", epoch, record.mean_loss, record.sat_agg)
        if on_epoch is not None:
            on_epoch(record)
    return log


# ---------------------------------------------------------- gradient checks

def check_gradients(objective: Callable[[], Tensor], params: ParamStore, h: float = 1e-5):
    """Compare backprop gradients of ``objective`` with central differences.

    Returns ``(analytic, numeric, rel_err)`` where ``rel_err`` is the largest
    absolute discrepancy divided by the largest gradient magnitude.
    """
    params.zero_grad()
    T.backward(objective())
    analytic = params.grad_flat()
    params.zero_grad()
    theta = params.get_flat()
    numeric = np.zeros_like(theta)
    for i in range(theta.size):
        bumped = theta.copy()
        bumped[i] += h
        params.set_flat(bumped)
        up = objective().item()
        bumped[i] -= 2 * h
        params.set_flat(bumped)
        down = objective().item()
        numeric[i] = (up - down) / (2 * h)
    params.set_flat(theta)
    scale = max(np.max(np.abs(analytic), initial=0.0), np.max(np.abs(numeric), initial=0.0))
    err = np.max(np.abs(analytic - numeric), initial=0.0)
    rel = 0.0 if err == 0 else err / max(scale, 1e-300)
    return analytic, numeric, float(rel)
