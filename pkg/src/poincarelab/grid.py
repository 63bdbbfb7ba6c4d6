"""Dyadic cube trees over a root box and piecewise-constant grid functions.

Cells at depth ``d`` form a regular ``2**d`` per-axis lattice; every integral
is an exact finite sum over cells, so refinement (increasing ``d``) is the
only convergence knob.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

MAX_DIM = 4
MAX_CELL_EXPONENT = 24  # n * depth cap


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class RootBox:
    """Ambient cube: lower corner and side length."""

    lower: tuple
    side: float

    def __post_init__(self):
        if not (1 <= len(self.lower) <= MAX_DIM):
            raise GridError(f"dimension must be in [1, {MAX_DIM}]")
        if not self.side > 0:
            raise GridError("side must be positive")
        object.__setattr__(self, "lower", tuple(float(x) for x in self.lower))

    @property
    def n(self):
        return len(self.lower)

    @classmethod
    def unit(cls, n):
        return cls((0.0,) * n, 1.0)

    @classmethod
    def symmetric(cls, n, halfside=1.0):
        """Box (-halfside, halfside)^n centered at the origin."""
        return cls((-float(halfside),) * n, 2.0 * halfside)


@dataclass(frozen=True)
class CubeIndex:
    """Dyadic cube at ``level`` with integer coordinates in [0, 2**level)."""

    level: int
    coords: tuple

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(int(c) for c in self.coords))
        if self.level < 0:
            raise GridError("level must be nonnegative")
        top = 1 << self.level
        if any(not (0 <= c < top) for c in self.coords):
            raise GridError(f"coords {self.coords} out of range at level {self.level}")

    @property
    def n(self):
        return len(self.coords)

    @classmethod
    def root(cls, n):
        return cls(0, (0,) * n)

    def parent(self):
        if self.level == 0:
            raise GridError("root cube has no parent")
        return CubeIndex(self.level - 1, tuple(c // 2 for c in self.coords))

    def children(self):
        """The 2**n dyadic children, partitioning this cube."""
        out = []
        for offs in itertools.product((0, 1), repeat=self.n):
            out.append(CubeIndex(self.level + 1,
                                 tuple(2 * c + o for c, o in zip(self.coords, offs))))
        return out

    def contains(self, other):
        if other.level < self.level:
            return False
        shift = other.level - self.level
        return all(oc >> shift == c for c, oc in zip(self.coords, other.coords))


class GridFunction:
    """Piecewise-constant function on the depth-``d`` cells of a root box."""

    def __init__(self, root, depth, values):
        if root.n * depth > MAX_CELL_EXPONENT:
            raise GridError(f"n*depth exceeds cap {MAX_CELL_EXPONENT}")
        n, N = root.n, 1 << depth
        arr = np.asarray(values, dtype=float)
        if arr.size != N ** n:
            raise GridError(f"expected {N ** n} values, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise GridError("values must be finite")
        self.root = root
        self.depth = depth
        self.values = arr.reshape((N,) * n)

    @property
    def n(self):
        return self.root.n

    @property
    def cells_per_axis(self):
        return 1 << self.depth

    @property
    def cell_width(self):
        return self.root.side / self.cells_per_axis

    @property
    def cell_volume(self):
        return self.cell_width ** self.n

    def copy_with(self, values):
        return GridFunction(self.root, self.depth, values)

    # -- cube geometry ----------------------------------------------------

    def sidelength(self, q):
        return self.root.side / (1 << q.level)

    def cube_volume(self, q):
        return self.sidelength(q) ** self.n

    def block(self, q):
        """Slice tuple selecting the cells of cube ``q``."""
        if q.level > self.depth:
            raise GridError(f"cube level {q.level} exceeds depth {self.depth}")
        span = 1 << (self.depth - q.level)
        return tuple(slice(c * span, (c + 1) * span) for c in q.coords)

    def cell_midpoints(self):
        """Meshgrid of cell-center coordinates, one array per axis."""
        h = self.cell_width
        axes = [self.root.lower[i] + h * (np.arange(self.cells_per_axis) + 0.5)
                for i in range(self.n)]
        return np.meshgrid(*axes, indexing="ij")

    # -- integrals --------------------------------------------------------

    def average(self, q):
        return float(self.values[self.block(q)].mean())

    def integral(self, q=None):
        if q is None:
            return float(self.values.sum() * self.cell_volume)
        return float(self.values[self.block(q)].sum() * self.cell_volume)

    def weighted_average(self, weight, q):
        """Average of f against a weight: (1/w(Q)) * sum f*w over cells of Q.

        ``weight`` is a cell-value array of the same shape (or anything
        exposing ``cell_values(root, depth)``).
        """
        w = _as_cell_values(weight, self.root, self.depth)
        sl = self.block(q)
        denom = w[sl].sum()
        if denom <= 0:
            raise GridError("zero weight mass on cube")
        return float((self.values[sl] * w[sl]).sum() / denom)

    # -- serialization ----------------------------------------------------

    def to_json_dict(self):
        return {
            "n": self.n,
            "depth": self.depth,
            "root": {"corner": list(self.root.lower), "side": self.root.side},
            "values": [float(v) for v in self.values.ravel()],
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def from_json_dict(cls, d):
        root = RootBox(tuple(d["root"]["corner"]), float(d["root"]["side"]))
        if root.n != int(d["n"]):
            raise GridError("dimension mismatch between 'n' and root corner")
        return cls(root, int(d["depth"]), d["values"])

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def _as_cell_values(weight, root, depth):
    if isinstance(weight, np.ndarray):
        return weight
    if isinstance(weight, GridFunction):
        return weight.values
    return weight.cell_values(root, depth)


def sample(root, depth, func):
    """GridFunction from a callable evaluated at cell midpoints."""
    gf = GridFunction(root, depth, np.zeros((1 << depth) ** root.n))
    pts = gf.cell_midpoints()
    return gf.copy_with(func(*pts))


def block_reduce(values, level, op):
    """Reduce the cell array onto the level-``level`` dyadic blocks.

    ``op`` is a numpy reduction (np.mean, np.amin, ...) applied per block;
    the result has shape ``(2**level,) * n``.
    """
    n = values.ndim
    N = values.shape[0]
    b = N >> level
    if b == 0:
        raise GridError("level exceeds depth")
    shape = []
    for _ in range(n):
        shape.extend((1 << level, b))
    axes = tuple(range(1, 2 * n, 2))
    return op(values.reshape(shape), axis=axes)


def all_cubes(n, depth, min_level=0):
    """All dyadic cube indices with min_level <= level <= depth."""
    for level in range(min_level, depth + 1):
        for coords in itertools.product(range(1 << level), repeat=n):
            yield CubeIndex(level, coords)


def dyadic_descendants(q, depth):
    """All dyadic subcubes of q down to ``depth`` (inclusive, q first)."""
    stack = [q]
    while stack:
        c = stack.pop()
        yield c
        if c.level < depth:
            stack.extend(c.children())


def discrete_gradient(f, order=1):
    """Magnitude of the order-``m`` gradient as a GridFunction.

    Forward differences per axis scaled by the cell width, boundary cells
    copying the last interior difference; the magnitude aggregates the
    absolute values of all order-m mixed differences (l1 over multi-indices).
    """
    m = int(order)
    if m < 1:
        raise GridError("order must be >= 1")
    if (1 << f.depth) <= m:
        raise GridError("grid too coarse for requested order")
    h = f.cell_width

    def diff_axis(arr, axis):
        d = np.diff(arr, axis=axis) / h
        last = np.take(d, [-1], axis=axis)
        return np.concatenate([d, last], axis=axis)

    total = np.zeros_like(f.values)
    for sigma in itertools.product(range(m + 1), repeat=f.n):
        if sum(sigma) != m:
            continue
        d = f.values
        for axis, k in enumerate(sigma):
            for _ in range(k):
                d = diff_axis(d, axis)
        total += np.abs(d)
    return f.copy_with(total)
