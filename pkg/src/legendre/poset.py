"""The index grid as a partially ordered set, and decomposition bases.

Multi-indices in the public API are 1-based tuples, ``(1, ..., 1)`` being the
bottom element. Arrays are indexed 0-based internally.
"""
from dataclasses import dataclass, field
import enum
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, EmptySupport, InvalidCoreSize, ParseError, UnknownScheme


def _check_pair(u, v):
    if len(u) != len(v):
        raise DimensionMismatch(f"indices {tuple(u)} and {tuple(v)} have different lengths")


def zeta(u, v):
    """Incidence function of the grid order: 1 if ``u <= v`` on every axis, else 0."""
    _check_pair(u, v)
    return int(all(a <= b for a, b in zip(u, v)))


def join(u, v):
    """Least upper bound of two indices (elementwise maximum)."""
    _check_pair(u, v)
    return tuple(max(a, b) for a, b in zip(u, v))


@dataclass(frozen=True)
class IndexPoset:
    """The grid ``[I1] x ... x [IN]`` under the elementwise order."""

    shape: tuple

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        if not shape or any(n < 1 for n in shape):
            raise DimensionMismatch(f"invalid shape {self.shape}")
        object.__setattr__(self, "shape", shape)

    @property
    def ndim(self):
        return len(self.shape)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def bottom(self):
        return (1,) * self.ndim

    def check(self, v):
        if len(v) != self.ndim:
            raise DimensionMismatch(f"index {tuple(v)} does not have {self.ndim} coordinates")
        if any(not 1 <= a <= n for a, n in zip(v, self.shape)):
            raise DimensionMismatch(f"index {tuple(v)} outside grid {self.shape}")
        return tuple(int(a) for a in v)

    def zeta(self, u, v):
        return zeta(self.check(u), self.check(v))

    def join(self, u, v):
        return join(self.check(u), self.check(v))

    def to_flat(self, v):
        """0-based row-major position of a 1-based index."""
        return int(np.ravel_multi_index(tuple(a - 1 for a in self.check(v)), self.shape))

    def from_flat(self, i):
        return tuple(int(a) + 1 for a in np.unravel_index(i, self.shape))

    def __iter__(self):
        for i in range(self.size):
            yield self.from_flat(i)


def upset_accumulate(t):
    """``out[v] = sum of t[u] over u >= v``.

    One reverse cumulative sum per axis, O(N |grid|).
    """
    out = np.array(t, dtype=np.float64)
    for axis in range(out.ndim):
        out = np.flip(np.cumsum(np.flip(out, axis), axis=axis), axis)
    return out


def downset_accumulate(t):
    """``out[v] = sum of t[u] over u <= v``."""
    out = np.array(t, dtype=np.float64)
    for axis in range(out.ndim):
        out = np.cumsum(out, axis=axis)
    return out


class BasisMode(enum.Enum):
    """How basis positions are picked on each slice of the last axis.

    The integer values of the first two match the ``-b`` command-line flag.
    """

    EXPLICIT = 0
    RANDOM = 1
    PARTIAL_ORDER = 2
    STRIDE = 3

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            if isinstance(value, int) or (isinstance(value, str) and value.isdigit()):
                return cls(int(value))
            return cls[str(value).upper().replace("-", "_")]
        except (KeyError, ValueError):
            raise UnknownScheme(f"unknown basis mode {value!r}") from None


@dataclass(frozen=True)
class Basis:
    """Ordered set of basis positions (1-based), never containing the bottom.

    Members are ordered by last-axis slice, then row-major within a slice.
    """

    members: tuple
    shape: tuple
    mode: BasisMode = BasisMode.EXPLICIT
    core_size: int = 0
    seed: int = 0
    poset: IndexPoset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        poset = IndexPoset(self.shape)
        members = tuple(poset.check(v) for v in self.members)
        if poset.bottom in members:
            raise ValueError("the bottom index cannot be a basis member")
        if len(set(members)) != len(members):
            raise ValueError("basis members must be distinct")
        object.__setattr__(self, "shape", poset.shape)
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "poset", poset)

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @cached_property
    def coords(self):
        """``(len, N)`` array of 0-based coordinates."""
        arr = np.array(self.members, dtype=np.int64).reshape(len(self), len(self.shape)) - 1
        arr.setflags(write=False)
        return arr

    @cached_property
    def flat(self):
        """0-based row-major positions of the members."""
        if not len(self):
            return np.zeros(0, dtype=np.int64)
        idx = np.ravel_multi_index(tuple(self.coords.T), self.shape).astype(np.int64)
        idx.setflags(write=False)
        return idx

    def mask(self):
        m = np.zeros(self.shape, dtype=bool)
        m.flat[self.flat] = True
        return m

    @classmethod
    def full(cls, shape):
        """Every index except the bottom: the saturated model."""
        poset = IndexPoset(shape)
        return cls(tuple(poset)[1:], poset.shape)

    @classmethod
    def from_flat(cls, flat, shape, mode=BasisMode.EXPLICIT, core_size=0, seed=0):
        poset = IndexPoset(shape)
        return cls(tuple(poset.from_flat(int(i)) for i in flat), poset.shape, mode, core_size, seed)


def _slice_candidates(probs, bottom_flat=0):
    """Per last-axis slice, flat positions of nonzero cells in row-major order."""
    flat = np.arange(probs.size).reshape(probs.shape)
    values = probs.ravel()
    for k in range(probs.shape[-1]):
        idx = flat[..., k].ravel()
        yield idx[(values[idx] > 0) & (idx != bottom_flat)]


def select_basis(p, core_size, mode=BasisMode.RANDOM, seed=0):
    """Choose up to ``core_size`` positions on each slice of the last axis.

    Only cells with nonzero probability are eligible and the bottom index
    never is. Slices with fewer eligible cells contribute all of them.

    * ``PARTIAL_ORDER``: the smallest nonzero probabilities, ties by row-major order.
    * ``RANDOM``: a seeded uniform draw. The draw is a prefix of one seeded
      permutation per slice, so bases for increasing ``core_size`` are nested.
    * ``STRIDE``: evenly spaced cells in row-major order, spacing
      ``max(1, nnz // core_size)``.

    Raises
    ------
    InvalidCoreSize
        If ``core_size < 1``.
    EmptySupport
        If no slice has an eligible cell.
    """
    if int(core_size) != core_size or core_size < 1:
        raise InvalidCoreSize(f"core size must be a positive integer, got {core_size}")
    core_size = int(core_size)
    mode = BasisMode.parse(mode)
    probs = np.asarray(getattr(p, "probs", p), dtype=np.float64)
    rng = np.random.default_rng(seed)
    chosen = []
    for cand in _slice_candidates(probs):
        if mode is BasisMode.PARTIAL_ORDER:
            pick = cand[np.argsort(probs.flat[cand], kind="stable")[:core_size]]
        elif mode is BasisMode.RANDOM:
            pick = rng.permutation(cand)[:core_size]
        elif mode is BasisMode.STRIDE:
            step = max(1, len(cand) // core_size)
            pick = cand[::step][:core_size]
        else:
            raise ValueError(f"mode {mode} cannot select a basis")
        chosen.append(np.sort(pick))
    flat = np.concatenate(chosen) if chosen else np.zeros(0, dtype=np.int64)
    if flat.size == 0:
        raise EmptySupport("no nonzero cell is available for the basis")
    return Basis.from_flat(flat, probs.shape, mode, core_size, int(seed))


def format_basis(basis):
    lines = [f"# basis mode={basis.mode.name.lower()} core_size={basis.core_size} seed={basis.seed}"]
    lines.extend(",".join(str(a) for a in v) for v in basis)
    return "\n".join(lines) + "\n"


def write_basis_csv(path, basis):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_basis(basis))


def parse_basis(text, shape):
    header = {}
    members = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line.lstrip("#").split():
                if "=" in tok:
                    key, val = tok.split("=", 1)
                    header[key] = val
            continue
        try:
            members.append(tuple(int(tok) for tok in line.split(",")))
        except ValueError as exc:
            raise ParseError(f"bad basis line {line!r}") from exc
    return Basis(
        tuple(members),
        tuple(shape),
        BasisMode.parse(header.get("mode", "explicit")),
        int(header.get("core_size", 0)),
        int(header.get("seed", 0)),
    )


def read_basis_csv(path, shape):
    with open(path, encoding="utf-8") as fh:
        return parse_basis(fh.read(), shape)
