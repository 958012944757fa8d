"""Build tests/data/mnist_subset.npz from the digit JSON files of the npm
``mnist`` package (cazala/mnist, MIT licensed).

Those files hold real MNIST images scaled to [0, 1] and rounded to three
decimals; multiplying by 255 and rounding recovers the original uint8 pixels.

    npm pack mnist && tar xzf mnist-*.tgz
    python tools/build_mnist_fixture.py package/src/digits tests/data/mnist_subset.npz
"""
import json
import sys
from pathlib import Path

import numpy as np

PER_DIGIT = 300


def main(src, dst):
    images, labels = [], []
    for digit in range(10):
        flat = np.asarray(json.loads((Path(src) / f"{digit}.json").read_text())["data"])
        stack = np.rint(flat * 255).astype(np.uint8).reshape(-1, 28, 28)[:PER_DIGIT]
        images.append(stack)
        labels.append(np.full(len(stack), digit, dtype=np.uint8))
    np.savez_compressed(dst, images=np.concatenate(images), labels=np.concatenate(labels))


if __name__ == "__main__":
    main(*sys.argv[1:3])
