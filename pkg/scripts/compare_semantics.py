"""Train the dog/cat knowledge base under each connective family and p."""

import argparse
import dataclasses
from pathlib import Path

from realogic.cli import build_experiment, load_config
from realogic.fuzzy import FAMILIES
from realogic.learn import BatchSampler, OptimizerState, satisfaction, train

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "configs" / "blobs.json"))
    ap.add_argument("--ps", type=float, nargs="+", default=[1.0, 2.0, 6.0])
    args = ap.parse_args()

    base = load_config(args.config)
    print(f"{'family':<12} {'p':>4}  {'train SatAgg':>12}  {'full-set SatAgg':>15}")
    for family in FAMILIES:
        # godel quantifiers are min/max, so p only matters for SatAgg there
        for p in args.ps if family != "godel" else args.ps[:1]:
            sem = dataclasses.replace(base.semantics, family=family, p_exists=p, p_forall=p, p_satagg=p)
            config = dataclasses.replace(base, semantics=sem)
            exp = build_experiment(config)
            t = config.training
            sampler = BatchSampler(exp.data, t.batch_size, seed=exp.sampler_seed)
            log = train(exp.kb, exp.env, sampler, exp.params, OptimizerState(kind=t.optimizer, lr=t.lr), t.epochs)
            _, full = satisfaction(exp.kb, exp.env)
            print(f"{family:<12} {p:>4g}  {log.final.sat_agg:>12.4f}  {full.item():>15.4f}")


if __name__ == "__main__":
    main()
