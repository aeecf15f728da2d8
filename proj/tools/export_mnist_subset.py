#!/usr/bin/env python3
"""Rebuild data/mnist/ from the 5,000-digit MNIST subset shipped in the mlxtend wheel.

    pip download mlxtend==0.24.0 --no-deps -d /tmp/mlx
    python3 tools/export_mnist_subset.py /tmp/mlx/mlxtend-0.24.0-py3-none-any.whl data/mnist
"""
import argparse
import gzip
import pathlib
import struct
import zipfile


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("wheel")
    ap.add_argument("out_dir")
    args = ap.parse_args()

    with zipfile.ZipFile(args.wheel) as z:
        rows = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz")).decode().splitlines()
    images, labels = bytearray(), bytearray()
    for row in rows:
        v = [int(float(t)) for t in row.split(",")]
        images += bytes(v[:784])
        labels.append(v[784])
    n = len(rows)

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with gzip.GzipFile(out / "mnist5k-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x803, n, 28, 28))
        f.write(images)
    with gzip.GzipFile(out / "mnist5k-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x801, n))
        f.write(labels)
    print(f"{n} digits -> {out}")


if __name__ == "__main__":
    main()
