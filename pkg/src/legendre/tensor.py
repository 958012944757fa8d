"""Dense non-negative tensors, normalization and elementwise error metrics.

Tensors are plain ``numpy.ndarray`` objects in float64, row-major. The text
format used for files is::

    # optional comment lines
    I1 I2 ... IN
    v v v ...

Values after the header are the flat row-major data; they may wrap across
lines arbitrarily and may be separated by commas or whitespace.
"""
from dataclasses import dataclass
import re

import numpy as np

from .errors import (
    AllZeroTensor,
    NegativeEntry,
    ParseError,
    ShapeMismatch,
    SupportViolation,
)

NORMALIZATION_TOL = 1e-12
KL_INPUT_TOL = 1e-9

_SEP = re.compile(r"[,\s]+")


def as_tensor(x):
    """Validate ``x`` as a non-negative dense tensor and return a float64 array."""
    arr = np.array(x, dtype=np.float64)
    if arr.ndim == 0 or arr.size == 0:
        raise ShapeMismatch(f"tensor must have order >= 1 and non-empty extents, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NegativeEntry("tensor contains non-finite values")
    if np.any(arr < 0):
        raise NegativeEntry("tensor contains negative entries")
    return arr


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class NormalizedTensor:
    """A probability mass function over the index grid plus the mass it came from.

    ``probs`` is read-only and sums to one; ``scale`` is the original total.
    """

    probs: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen(self.probs))
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if abs(self.probs.sum() - 1.0) >= NORMALIZATION_TOL:
            raise ValueError("probs must sum to 1")

    @property
    def shape(self):
        return self.probs.shape

    def rescaled(self):
        """Probabilities multiplied back by the original mass."""
        return self.probs * self.scale


def normalize(x):
    """Divide a non-negative tensor by its total mass.

    Raises
    ------
    NegativeEntry
        If any entry is negative.
    AllZeroTensor
        If every entry is zero.
    """
    arr = as_tensor(x)
    total = arr.sum()
    if total <= 0:
        raise AllZeroTensor("cannot normalize a tensor whose entries are all zero")
    return NormalizedTensor(arr / total, float(total))


def _check_same_shape(x, y):
    if x.shape != y.shape:
        raise ShapeMismatch(f"shape {x.shape} does not match {y.shape}")


def rmse(x, y):
    """Root mean squared error between two tensors of equal shape."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_same_shape(x, y)
    return float(np.sqrt(np.mean((x - y) ** 2)))


def kl_divergence(p, q):
    """KL divergence ``sum p log(p / q)`` over the support of ``p``.

    Cells with ``p = 0`` contribute nothing. A cell with ``p > 0`` and
    ``q = 0`` raises :class:`SupportViolation` rather than returning infinity.
    """
    p = np.asarray(getattr(p, "probs", p), dtype=np.float64)
    q = np.asarray(getattr(q, "probs", q), dtype=np.float64)
    _check_same_shape(p, q)
    for name, t in (("P", p), ("Q", q)):
        if np.any(t < 0) or abs(t.sum() - 1.0) > KL_INPUT_TOL:
            raise ValueError(f"{name} is not a normalized distribution")
    support = p > 0
    if np.any(q[support] == 0):
        raise SupportViolation("Q vanishes where P has mass")
    ps, qs = p[support], q[support]
    return float(max(np.sum(ps * (np.log(ps) - np.log(qs))), 0.0))


def parse_tensor_text(text):
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ParseError("empty tensor file")
    try:
        shape = tuple(int(tok) for tok in _SEP.split(lines[0]) if tok)
    except ValueError as exc:
        raise ParseError(f"bad header line {lines[0]!r}") from exc
    if not shape or any(n < 1 for n in shape):
        raise ParseError(f"extents must be positive integers, got {shape}")
    body = " ".join(lines[1:])
    try:
        values = np.array([float(tok) for tok in _SEP.split(body) if tok], dtype=np.float64)
    except ValueError as exc:
        raise ParseError(f"non-numeric value in tensor body: {exc}") from exc
    if values.size != int(np.prod(shape)):
        raise ParseError(f"header declares {int(np.prod(shape))} values, found {values.size}")
    return values.reshape(shape)


def read_tensor_csv(path):
    """Read a tensor file; raises ``OSError`` or :class:`ParseError`."""
    with open(path, encoding="utf-8") as fh:
        return parse_tensor_text(fh.read())


def format_tensor_text(x):
    arr = np.asarray(x, dtype=np.float64)
    rows = arr.reshape(-1, arr.shape[-1])
    out = [" ".join(str(n) for n in arr.shape)]
    out.extend(",".join(repr(float(v)) for v in row) for row in rows)
    return "\n".join(out) + "\n"


def write_tensor_csv(path, x):
    """Write ``x`` with one row of ``I_N`` comma-separated values per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_tensor_text(x))
