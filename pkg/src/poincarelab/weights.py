"""Weight and measure representations plus weight-class characteristics.

Weights are positive densities on the grid: either sampled cell values
(GridWeight) or the radial power law |x|^(delta-n) with quasi-closed-form
cell masses (PowerWeight).  All class constants (A_p, A_1, Fujii-Wilson
A_inf, reverse-Holder exponent, A_{p,1}, RH_inf) are suprema over the
finite dyadic family up to the working depth, optionally augmented with
half-shifted grids; reports record the family used.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .grid import (CubeIndex, GridError, GridFunction, RootBox, block_reduce,
                   all_cubes)


class WeightError(ValueError):
    pass


# ---------------------------------------------------------------------------
# weight / measure representations
# ---------------------------------------------------------------------------

class GridWeight:
    """Weight given by strictly positive cell values."""

    def __init__(self, g: GridFunction):
        if np.any(g.values <= 0):
            raise WeightError("weight cell values must be strictly positive")
        self.g = g

    @property
    def root(self):
        return self.g.root

    @property
    def n(self):
        return self.g.n

    def cell_values(self, root, depth):
        if root != self.g.root or depth != self.g.depth:
            raise WeightError("weight resolved on a different grid")
        return self.g.values

    def cell_masses(self, root, depth):
        return self.cell_values(root, depth) * self.g.cell_volume

    def cube_mass(self, q, depth=None):
        return self.g.integral(q)


_CORNER_INTEGRAL_CACHE = {}


def _corner_singular_unit_integral(n, gamma, sublevels=6):
    """integral over [0,1]^n of |u|^(gamma - n) du for gamma > 0.

    Splits the unit cube into 2^n half-side subcubes; the origin subcube is
    a (1/2)^gamma rescaled copy of the whole, the other 2^n - 1 are handled
    by vectorized midpoint subdivision (integrand smooth away from 0).
    """
    if gamma <= 0:
        raise WeightError("exponent must be positive")
    if n == 1:
        return 1.0 / gamma
    key = (n, float(gamma), sublevels)
    if key in _CORNER_INTEGRAL_CACHE:
        return _CORNER_INTEGRAL_CACHE[key]
    K = 1 << sublevels
    side = 0.5 / K
    mids = side * (np.arange(K) + 0.5)
    shell = 0.0
    for offs in itertools.product((0, 1), repeat=n):
        if all(o == 0 for o in offs):
            continue
        axes = [mids + 0.5 * o for o in offs]
        grids = np.meshgrid(*axes, indexing="ij")
        r2 = sum(g * g for g in grids)
        shell += float((r2 ** ((gamma - n) / 2.0)).sum()) * side ** n
    out = shell / (1.0 - 2.0 ** (-gamma))
    _CORNER_INTEGRAL_CACHE[key] = out
    return out


class PowerWeight:
    """w(x) = |x|^(delta - n) on a root box symmetric about the origin."""

    def __init__(self, delta, n, root=None, subdivision_levels=6):
        if not (0 < delta <= 1):
            raise WeightError("delta must lie in (0, 1]")
        self.delta = float(delta)
        self._n = int(n)
        self.root = root if root is not None else RootBox.symmetric(n)
        if any(lo + self.root.side / 2.0 != 0.0 for lo in self.root.lower):
            raise WeightError("PowerWeight root box must be centered at the origin")
        self.subdivision_levels = subdivision_levels
        self._mass_cache = {}

    @property
    def n(self):
        return self._n

    def cell_masses(self, root, depth):
        if root != self.root:
            raise WeightError("PowerWeight resolved on a different root box")
        key = depth
        if key in self._mass_cache:
            return self._mass_cache[key]
        n, delta = self._n, self.delta
        N = 1 << depth
        h = root.side / N
        edges = root.lower[0] + h * np.arange(N + 1)
        if n == 1:
            F = np.sign(edges) * np.abs(edges) ** delta / delta
            masses = np.diff(F)
        else:
            lows = np.stack(np.meshgrid(*([edges[:-1]] * n), indexing="ij"), axis=-1)
            mids = lows + h / 2.0
            r = np.sqrt(np.sum(mids * mids, axis=-1))
            masses = (r ** (delta - n)) * h ** n
            # cells whose closure touches the origin need singularity-aware
            # subdivision; the grid is origin-symmetric so these are the 2^n
            # cells with a corner at 0
            corner = _corner_singular_unit_integral(n, delta, self.subdivision_levels)
            touching = np.all(np.abs(lows + np.where(lows < 0, h, 0.0)) < h * 1e-9,
                              axis=-1)
            masses[touching] = (h ** delta) * corner
        self._mass_cache[key] = masses
        return masses

    def cell_values(self, root, depth):
        N = 1 << depth
        h = root.side / N
        return self.cell_masses(root, depth) / h ** self._n

    def cube_mass(self, q, depth):
        masses = self.cell_masses(self.root, depth)
        span = 1 << (depth - q.level)
        sl = tuple(slice(c * span, (c + 1) * span) for c in q.coords)
        return float(masses[sl].sum())


class Density:
    """Measure with nonnegative grid density."""

    def __init__(self, g: GridFunction):
        if np.any(g.values < 0):
            raise WeightError("density must be nonnegative")
        self.g = g

    def cell_masses(self, root, depth):
        if root != self.g.root or depth != self.g.depth:
            raise WeightError("measure resolved on a different grid")
        return self.g.values * self.g.cell_volume


class Atomic:
    """Purely atomic measure: point masses inside the root box."""

    def __init__(self, points, masses):
        self.points = [tuple(float(x) for x in p) for p in points]
        self.masses = [float(m) for m in masses]
        if any(m <= 0 for m in self.masses):
            raise WeightError("atom masses must be positive")

    def cell_masses(self, root, depth):
        n = root.n
        N = 1 << depth
        h = root.side / N
        out = np.zeros((N,) * n)
        for p, m in zip(self.points, self.masses):
            idx = []
            for i in range(n):
                k = int((p[i] - root.lower[i]) / h)
                if not (0 <= k < N) and not (k == N and p[i] == root.lower[i] + root.side):
                    raise WeightError("atom outside root box")
                idx.append(min(k, N - 1))
            out[tuple(idx)] += m
        return out


def resolve(w, root, depth):
    """Cell-value array of a weight-like object on the given grid."""
    if isinstance(w, np.ndarray):
        return w
    if isinstance(w, GridFunction):
        return w.values
    return w.cell_values(root, depth)


# ---------------------------------------------------------------------------
# cube families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FamilyDescriptor:
    depth: int
    shifted: bool = False


def _aligned_level_blocks(arrs, level):
    """Per-level dyadic block means/extrema for several arrays at once."""
    return [block_reduce(a[0], level, a[1]) for a in arrs]


def _shifted_level_blocks(arrs, level):
    """Block reductions on the half-shifted grid at the given level.

    Cubes have the level-``level`` sidelength but start at odd multiples of
    the half block, staying inside the box; level must leave blocks of at
    least 2 cells.
    """
    out = []
    n = arrs[0][0].ndim
    N = arrs[0][0].shape[0]
    b = N >> level
    if b < 2:
        return None
    step = b // 2
    for arr, op in arrs:
        win = np.lib.stride_tricks.sliding_window_view(arr, (b,) * n)
        sel = win[tuple(slice(step, None, b) for _ in range(n))]
        out.append(op(sel, axis=tuple(range(n, 2 * n))))
    return out


def family_reductions(arrs, depth, shifted=False):
    """Yield (descriptor, reduced arrays) per level over the cube family.

    ``arrs`` is a list of (cell array, numpy reduction).  Aligned dyadic
    levels always; with ``shifted`` also the half-shifted cubes per level.
    """
    for level in range(depth + 1):
        yield ("dyadic", level), _aligned_level_blocks(arrs, level)
        if shifted and level >= 1:
            sh = _shifted_level_blocks(arrs, level)
            if sh is not None:
                yield ("shifted", level), sh


def _argmax_cube(kind, level, flat_index, shape):
    coords = np.unravel_index(flat_index, shape)
    if kind == "dyadic":
        return CubeIndex(level, tuple(int(c) for c in coords))
    return ("shifted", level, tuple(int(c) for c in coords))


# ---------------------------------------------------------------------------
# weight-class constants
# ---------------------------------------------------------------------------

def ap_constant(w, p, root, depth, shifted=False, return_argmax=False):
    """Muckenhoupt A_p constant over the dyadic family up to ``depth``.

    p > 1: sup of (avg w)(avg w^(1-p'))^(p-1); p = 1: sup of
    (avg w) * max(1/w) per cube.
    """
    if p < 1:
        raise WeightError("p must be >= 1")
    wv = resolve(w, root, depth)
    if p == 1:
        arrs = [(wv, np.mean), (wv, np.amin)]
    else:
        pprime = p / (p - 1.0)
        arrs = [(wv, np.mean), (wv ** (1.0 - pprime), np.mean)]
    best, best_cube = -np.inf, None
    for (kind, level), (A, B) in family_reductions(arrs, depth, shifted):
        vals = A / B if p == 1 else A * B ** (p - 1.0)
        i = int(np.argmax(vals))
        v = float(vals.ravel()[i])
        if v > best:
            best = v
            best_cube = _argmax_cube(kind, level, i, vals.shape)
    if return_argmax:
        return best, best_cube
    return best


def two_weight_ap(u, v, p, root, depth, shifted=False):
    """Two-weight A_p constant sup (avg u)(avg v^(1-p'))^(p-1)."""
    if p <= 1:
        raise WeightError("p must be > 1")
    uv = resolve(u, root, depth)
    vv = resolve(v, root, depth)
    pprime = p / (p - 1.0)
    arrs = [(uv, np.mean), (vv ** (1.0 - pprime), np.mean)]
    best = -np.inf
    for _, (A, B) in family_reductions(arrs, depth, shifted):
        best = max(best, float(np.max(A * B ** (p - 1.0))))
    return best


def rhinf_constant(w, root, depth, shifted=False):
    """RH_inf constant: sup over cubes of (max w on Q)/(avg w on Q)."""
    wv = resolve(w, root, depth)
    best = -np.inf
    for _, (A, B) in family_reductions([(wv, np.amax), (wv, np.mean)], depth, shifted):
        best = max(best, float(np.max(A / B)))
    return best


def ainf_fujii_wilson(w, root, depth):
    """Fujii-Wilson A_inf constant over the dyadic family.

    For each dyadic cube Q: (1/w(Q)) * integral over Q of the discrete
    centered maximal of w restricted to Q (windows clipped to Q).
    """
    from .operators import centered_maximal_values

    wv = resolve(w, root, depth)
    n = wv.ndim
    best = -np.inf
    for level in range(depth + 1):
        b = wv.shape[0] >> level
        for coords in itertools.product(range(1 << level), repeat=n):
            sl = tuple(slice(c * b, (c + 1) * b) for c in coords)
            blockw = wv[sl]
            m = centered_maximal_values(blockw)
            best = max(best, float(m.mean() / blockw.mean()))
    return best


def rh_exponent(ainf, n):
    """Reverse-Holder exponent 1 + 1/(2^(n+1) * ainf - 1)."""
    return 1.0 + 1.0 / (2.0 ** (n + 1) * ainf - 1.0)


def rh_exponent_and_check(w, root, depth):
    """(r_w, worst ratio of avg(w^r_w) to avg(w)^r_w, pass flag <= 2)."""
    wv = resolve(w, root, depth)
    n = wv.ndim
    ainf = ainf_fujii_wilson(wv, root, depth)
    rw = rh_exponent(ainf, n)
    worst = -np.inf
    for _, (A, B) in family_reductions([(wv ** rw, np.mean), (wv, np.mean)], depth):
        worst = max(worst, float(np.max(A / B ** rw)))
    return rw, worst, worst <= 2.0


def ap1_constant(w, p, root, depth):
    """A_{p,1} constant: sup of (avg w) * weak-L^{p'} norm of 1/w, p-th power.

    The weak norm is taken in L^{p',inf}(Q, w dx/|Q|); exact evaluation via
    the step distribution function of 1/w on each cube.
    """
    from .operators import weak_norm_values

    if p <= 1:
        raise WeightError("p must be > 1")
    wv = resolve(w, root, depth)
    n = wv.ndim
    N = wv.shape[0]
    cellvol = (root.side / N) ** n
    pprime = p / (p - 1.0)
    best = -np.inf
    for level in range(depth + 1):
        b = N >> level
        vol = (b ** n) * cellvol
        for coords in itertools.product(range(1 << level), repeat=n):
            sl = tuple(slice(c * b, (c + 1) * b) for c in coords)
            block = wv[sl]
            vals = (1.0 / block).ravel()
            masses = (block * cellvol / vol).ravel()
            wk = weak_norm_values(vals, masses, pprime)
            best = max(best, float(block.mean() * wk ** p))
    return best


@dataclass
class WeightConstantsReport:
    p: float
    ap: float
    ap_argmax: object
    a1: float
    ainf_fw: float
    rh_exponent: float
    rh_worst_ratio: float
    rh_pass: bool
    ap1: float
    rhinf: float
    family: FamilyDescriptor

    def to_dict(self):
        arg = self.ap_argmax
        if isinstance(arg, CubeIndex):
            arg = {"level": arg.level, "coords": list(arg.coords)}
        elif isinstance(arg, tuple):
            arg = {"family": arg[0], "level": arg[1], "coords": list(arg[2])}
        return {
            "p": self.p,
            "ap": self.ap,
            "ap_argmax": arg,
            "a1": self.a1,
            "ainf_fw": self.ainf_fw,
            "rh_exponent": self.rh_exponent,
            "rh_worst_ratio": self.rh_worst_ratio,
            "rh_pass": bool(self.rh_pass),
            "ap1": self.ap1,
            "rhinf": self.rhinf,
            "family": {"depth": self.family.depth, "shifted": self.family.shifted},
        }


def constants_report(w, p, root, depth, shifted=False):
    """Compute the full bundle of weight-class constants."""
    wv = resolve(w, root, depth)
    ap, arg = ap_constant(wv, p, root, depth, shifted, return_argmax=True)
    a1 = ap_constant(wv, 1.0, root, depth, shifted)
    rw, worst, ok = rh_exponent_and_check(wv, root, depth)
    ainf = ainf_fujii_wilson(wv, root, depth)
    ap1 = ap1_constant(wv, p, root, depth) if p > 1 else float("nan")
    rhi = rhinf_constant(wv, root, depth, shifted)
    return WeightConstantsReport(p, ap, arg, a1, ainf, rw, worst, ok, ap1, rhi,
                                 FamilyDescriptor(depth, shifted))


def set_inequality_holds(w, p, root, depth, tol=1e-12):
    """Check |E|/|Q| <= ap^(1/p) (w(E)/w(Q))^(1/p) for dyadic E inside Q."""
    wv = resolve(w, root, depth)
    n = wv.ndim
    ap = ap_constant(wv, p, root, depth)
    cells = wv.size
    total = wv.sum()
    for level in range(depth + 1):
        b = wv.shape[0] >> level
        frac = (b ** n) / cells
        sums = block_reduce(wv, level, np.sum)
        lhs = frac
        rhs = ap ** (1.0 / p) * (sums / total) ** (1.0 / p)
        if np.any(lhs > rhs + tol):
            return False
    return True
