"""Regenerate configs/data/blobs.csv (two 2D Gaussian blobs, 50 points each)."""

import argparse
from pathlib import Path

from realogic.datasets import write_blobs_csv

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(ROOT / "configs" / "data" / "blobs.csv"))
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--separation", type=float, default=4.0, help="distance between means in units of sigma")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(write_blobs_csv(args.out, args.n, args.separation, seed=args.seed))
