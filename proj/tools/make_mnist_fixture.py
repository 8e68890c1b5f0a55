#!/usr/bin/env python3
"""Build a small MNIST subset in IDX format from the digit JSON files shipped
with the `mnist` npm package (https://www.npmjs.com/package/mnist).

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_fixture.py package/src/digits tests/data

The JSON stores pixels as value/255 rounded to three decimals, so
round(v * 255) recovers the original byte exactly.
"""
import argparse
import json
import pathlib
import random
import struct


def write_images(path, images, rows=28, cols=28):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), rows, cols))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir")
    ap.add_argument("out_dir")
    ap.add_argument("--train", type=int, default=1000)
    ap.add_argument("--test", type=int, default=500)
    ap.add_argument("--seed", type=int, default=2014)
    args = ap.parse_args()

    samples = []
    for digit in range(10):
        raw = json.load(open(pathlib.Path(args.digits_dir) / f"{digit}.json"))["data"]
        for i in range(len(raw) // 784):
            px = [min(255, max(0, round(v * 255))) for v in raw[i * 784:(i + 1) * 784]]
            samples.append((px, digit))

    random.Random(args.seed).shuffle(samples)
    need = args.train + args.test
    if need > len(samples):
        raise SystemExit(f"only {len(samples)} samples available")
    train, test = samples[:args.train], samples[args.train:need]

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_images(out / "mnist-train-images.idx3", [s[0] for s in train])
    write_labels(out / "mnist-train-labels.idx1", [s[1] for s in train])
    write_images(out / "mnist-test-images.idx3", [s[0] for s in test])
    write_labels(out / "mnist-test-labels.idx1", [s[1] for s in test])


if __name__ == "__main__":
    main()
