#!/usr/bin/env python3
"""Convert the digits bundled in the npm `mnist` package into gzipped IDX files.

The package stores 10,000 MNIST digits as per-class JSON files with pixel
intensities scaled to [0, 1] and rounded to three decimals. Multiplying by 255
and rounding recovers the original bytes exactly.

Split: within each class, every fifth sample goes to the test set, giving
8,000 training and 2,000 test items. Items are interleaved by class so that
any prefix is roughly balanced.

Usage: npm pack mnist && tar xzf mnist-*.tgz
       python3 scripts/mnist_from_npm.py package/src/digits data/mnist
"""
import gzip
import json
import os
import struct
import sys


def write_idx(path, magic, dims, payload):
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", d) for d in dims)
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header + payload)


def main(src, dst):
    per_class = []
    for digit in range(10):
        with open(os.path.join(src, f"{digit}.json")) as f:
            flat = json.load(f)["data"]
        assert len(flat) % 784 == 0
        imgs = [
            bytes(round(v * 255) for v in flat[i : i + 784])
            for i in range(0, len(flat), 784)
        ]
        per_class.append(imgs)

    train, test = [], []
    longest = max(len(c) for c in per_class)
    for k in range(longest):
        for digit, imgs in enumerate(per_class):
            if k < len(imgs):
                (test if k % 5 == 0 else train).append((imgs[k], digit))

    os.makedirs(dst, exist_ok=True)
    for name, items in (("train", train), ("t10k", test)):
        write_idx(
            os.path.join(dst, f"{name}-images-idx3-ubyte.gz"),
            0x00000803,
            (len(items), 28, 28),
            b"".join(img for img, _ in items),
        )
        write_idx(
            os.path.join(dst, f"{name}-labels-idx1-ubyte.gz"),
            0x00000801,
            (len(items),),
            bytes(label for _, label in items),
        )
        print(name, len(items))


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
