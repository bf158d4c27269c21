"""Synthetic two-class data standing in for the dog/cat image sets."""

import csv
from pathlib import Path

import numpy as np


def two_blobs(n_per_class: int = 50, separation: float = 4.0, sigma: float = 1.0, seed: int = 0):
    """Two isotropic 2D Gaussians whose means are ``separation * sigma`` apart.

    Returns ``(positives, negatives)``, each ``[n_per_class, 2]``.
    """
    rng = np.random.default_rng(seed)
    half = separation * sigma / 2.0
    pos = rng.normal([half, 0.0], sigma, size=(n_per_class, 2))
    neg = rng.normal([-half, 0.0], sigma, size=(n_per_class, 2))
    return pos, neg


def write_blobs_csv(path, n_per_class: int = 50, separation: float = 4.0, sigma: float = 1.0, seed: int = 0):
    """Write blobs as ``x1,x2,label`` rows (label 1 for positives, 0 for negatives)."""
    pos, neg = two_blobs(n_per_class, separation, sigma, seed)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x1", "x2", "label"])
        for rows, label in ((pos, 1), (neg, 0)):
            for x1, x2 in rows:
                w.writerow([repr(float(x1)), repr(float(x2)), label])
    return path
