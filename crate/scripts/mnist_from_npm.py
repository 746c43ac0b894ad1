#!/usr/bin/env python3
"""Convert the 10k MNIST digits bundled in the npm `mnist` package into IDX files.

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/mnist_from_npm.py package/src/digits data/mnist

Writes train-images-idx3-ubyte / train-labels-idx1-ubyte (8000 samples) and
t10k-images-idx3-ubyte / t10k-labels-idx1-ubyte (2000 samples), split with a
fixed shuffle so the output is reproducible.
"""
import json
import random
import struct
import sys
from pathlib import Path

SIDE = 28
PIXELS = SIDE * SIDE
TRAIN = 8000


def write_idx(out: Path, stem: str, samples):
    with open(out / f"{stem}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(samples), SIDE, SIDE))
        for pixels, _ in samples:
            f.write(bytes(pixels))
    with open(out / f"{stem}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(samples)))
        f.write(bytes(label for _, label in samples))


def main():
    digits, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    samples = []
    for label in range(10):
        raw = json.loads((digits / f"{label}.json").read_text())["data"]
        for start in range(0, len(raw) - PIXELS + 1, PIXELS):
            pixels = [min(255, max(0, round(v * 255))) for v in raw[start:start + PIXELS]]
            samples.append((pixels, label))
    random.Random(0).shuffle(samples)
    write_idx(out, "train", samples[:TRAIN])
    write_idx(out, "t10k", samples[TRAIN:])
    print(f"{len(samples)} samples -> {out} ({TRAIN} train, {len(samples) - TRAIN} test)")


if __name__ == "__main__":
    main()
