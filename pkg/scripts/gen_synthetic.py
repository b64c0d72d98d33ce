#!/usr/bin/env python3
"""Regenerate the bundled synthetic datasets.

Three small equal-length corpora with cleanly separable raw shapes, so
the raw-series benchmark method has headroom over prompt embeddings
produced by the mock backend.  Output is committed; rerunning with the
fixed seed reproduces the same bytes.
"""

import argparse
import os

import numpy as np

SEED = 20260813


def waveshapes(rng):
    """3 classes: sine, square, triangle; length 64."""
    n_per, length = 6, 64
    t = np.linspace(0.0, 2.0 * np.pi, length, endpoint=False)
    out = {"TRAIN": [], "TEST": []}
    for split in ("TRAIN", "TEST"):
        for label, shape in ((1, "sine"), (2, "square"), (3, "triangle")):
            for _ in range(n_per):
                amp = rng.uniform(0.8, 1.2)
                # small jitter only: full random phase would decorrelate
                # same-class series and sink the raw-series baseline
                phase = rng.uniform(-0.2, 0.2)
                if shape == "sine":
                    v = amp * np.sin(t + phase)
                elif shape == "square":
                    v = amp * np.sign(np.sin(t + phase))
                else:
                    v = amp * (2.0 / np.pi) * np.arcsin(np.sin(t + phase))
                v = v + rng.normal(0.0, 0.05, length)
                out[split].append((label, v))
    return out


def trendsteps(rng):
    """2 classes: rising vs falling linear trend; length 48."""
    n_per, length = 6, 48
    x = np.linspace(0.0, 1.0, length)
    out = {"TRAIN": [], "TEST": []}
    for split in ("TRAIN", "TEST"):
        for label, slope_sign in ((1, 1.0), (2, -1.0)):
            for _ in range(n_per):
                slope = slope_sign * rng.uniform(1.5, 2.5)
                intercept = rng.uniform(-0.5, 0.5)
                v = intercept + slope * x + rng.normal(0.0, 0.08, length)
                out[split].append((label, v))
    return out


def pulsecount(rng):
    """3 classes: one, two, or three gaussian bumps; length 56."""
    n_per, length = 5, 56
    x = np.arange(length, dtype=float)
    out = {"TRAIN": [], "TEST": []}
    for split in ("TRAIN", "TEST"):
        for label, bumps in ((1, 1), (2, 2), (3, 3)):
            for _ in range(n_per):
                v = rng.normal(0.0, 0.04, length)
                centers = np.linspace(length / (bumps + 1.0), length * bumps / (bumps + 1.0), bumps)
                for c in centers:
                    c = c + rng.uniform(-2.0, 2.0)
                    width = rng.uniform(2.0, 3.0)
                    v += np.exp(-0.5 * ((x - c) / width) ** 2)
                out[split].append((label, v))
    return out


def write_dataset(root, name, splits):
    base = os.path.join(root, name)
    os.makedirs(base, exist_ok=True)
    for split, rows in splits.items():
        path = os.path.join(base, f"{name}_{split}.tsv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for label, values in rows:
                fh.write("\t".join([str(label)] + [repr(float(v)) for v in values]))
                fh.write("\n")
        print(f"wrote {path} ({len(rows)} series)")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=os.path.join("src", "lamper", "data", "synthetic"),
                        help="output root (default: src/lamper/data/synthetic)")
    args = parser.parse_args()
    rng = np.random.default_rng(SEED)
    write_dataset(args.out, "WaveShapes", waveshapes(rng))
    write_dataset(args.out, "TrendSteps", trendsteps(rng))
    write_dataset(args.out, "PulseCount", pulsecount(rng))


if __name__ == "__main__":
    main()
