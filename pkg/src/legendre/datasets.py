"""MNIST ingestion and labelled tensor directories."""
import gzip
import os
from pathlib import Path
import re

import numpy as np

from .errors import ParseError
from .tensor import read_tensor_csv, write_tensor_csv

_IDX_DTYPES = {
    0x08: np.uint8,
    0x09: np.int8,
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}

_LABELLED = re.compile(r"^test(\d)_(\d+)\.csv$")


def parse_idx(raw):
    """Decode the IDX binary format used by the MNIST distribution."""
    if len(raw) < 4 or raw[0] != 0 or raw[1] != 0:
        raise ParseError("not an IDX file")
    code, ndim = raw[2], raw[3]
    if code not in _IDX_DTYPES:
        raise ParseError(f"unknown IDX element type 0x{code:02x}")
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise ParseError("truncated IDX header")
    shape = tuple(int.from_bytes(raw[4 + 4 * i: 8 + 4 * i], "big") for i in range(ndim))
    dtype = np.dtype(_IDX_DTYPES[code])
    count = int(np.prod(shape))
    if len(raw) - header != count * dtype.itemsize:
        raise ParseError(f"IDX payload does not match shape {shape}")
    return np.frombuffer(raw, dtype=dtype, offset=header).reshape(shape)


def read_idx(path):
    """Read an IDX file, transparently gunzipping ``*.gz``."""
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as fh:
        return parse_idx(fh.read())


def first_per_digit(images, labels, count):
    """The first ``count`` images of every digit, in dataset order."""
    out = {}
    for digit in range(10):
        idx = np.flatnonzero(np.asarray(labels) == digit)[:count]
        out[digit] = np.asarray(images)[idx]
    return out


def mnist_to_tensors(images, labels, out_dir, layout="stack", count=100, batch_size=10):
    """Write per-digit tensors built from the first ``count`` images of each digit.

    ``stack``   one ``28x28xcount`` tensor per digit, ``test<d>.csv``.
    ``single``  one ``28x28`` tensor per image, ``test<d>_<n>.csv``.
    ``batch``   ``28x28xbatch_size`` tensors of consecutive images, ``test<d>_<n>.csv``.

    Returns the written paths in order.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for digit, stack in first_per_digit(images, labels, count).items():
        stack = stack.astype(np.float64)
        if layout == "stack":
            tensors = [(f"test{digit}.csv", np.moveaxis(stack, 0, -1))]
        elif layout == "single":
            tensors = [(f"test{digit}_{n}.csv", img) for n, img in enumerate(stack)]
        elif layout == "batch":
            tensors = [
                (f"test{digit}_{n}.csv", np.moveaxis(stack[s: s + batch_size], 0, -1))
                for n, s in enumerate(range(0, len(stack) - batch_size + 1, batch_size))
            ]
        else:
            raise ValueError(f"unknown layout {layout!r}")
        for name, tensor in tensors:
            write_tensor_csv(out / name, tensor)
            written.append(out / name)
    return written


def list_labelled(directory):
    """``(digit, path)`` for every ``test<digit>_<n>.csv``, ordered by digit then ``n``."""
    found = []
    for name in os.listdir(directory):
        m = _LABELLED.match(name)
        if m:
            found.append((int(m.group(1)), int(m.group(2)), Path(directory) / name))
    if not found:
        raise FileNotFoundError(f"no test<digit>_<n>.csv files in {directory}")
    found.sort()
    return [(digit, path) for digit, _, path in found]


def load_labelled(directory):
    items = list_labelled(directory)
    return [d for d, _ in items], [read_tensor_csv(p) for _, p in items]
