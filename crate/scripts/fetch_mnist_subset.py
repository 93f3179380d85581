#!/usr/bin/env python3
"""Convert the 5000-image MNIST sample shipped with mlxtend into IDX files.

Usage:
    pip download --no-deps mlxtend -d /tmp/mlx
    python3 scripts/fetch_mnist_subset.py /tmp/mlx/mlxtend-*.whl data/mnist-5k

The sample holds 500 images per digit, 28x28 pixels, row-major.
"""

import csv
import gzip
import io
import struct
import sys
import zipfile
from pathlib import Path

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def main() -> None:
    wheel, out = Path(sys.argv[1]), Path(sys.argv[2])
    with zipfile.ZipFile(wheel) as z:
        raw = gzip.decompress(z.read(MEMBER)).decode()
    rows = [list(map(int, r)) for r in csv.reader(io.StringIO(raw)) if r]
    pixels = bytearray()
    labels = bytearray()
    for r in rows:
        assert len(r) == 785
        pixels.extend(r[:784])
        labels.append(r[784])
    out.mkdir(parents=True, exist_ok=True)
    # mtime=0 keeps the archives byte-reproducible.
    with open(out / "images-idx3-ubyte.gz", "wb") as f:
        with gzip.GzipFile(fileobj=f, mode="wb", mtime=0) as g:
            g.write(struct.pack(">IIII", 0x803, len(rows), 28, 28) + bytes(pixels))
    with open(out / "labels-idx1-ubyte.gz", "wb") as f:
        with gzip.GzipFile(fileobj=f, mode="wb", mtime=0) as g:
            g.write(struct.pack(">II", 0x801, len(rows)) + bytes(labels))
    print(f"wrote {len(rows)} images to {out}")


if __name__ == "__main__":
    main()
