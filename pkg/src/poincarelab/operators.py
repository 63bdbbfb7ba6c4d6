"""Maximal operators, fractional integrals, the Rubio de Francia iteration,
truncations, and Lorentz/Orlicz norm calculators.

All operators act on cell-value arrays of GridFunctions; the centered
maximal uses cube windows clipped to the box (comparable to the ball
version up to a dimensional factor, which is reported where relevant).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .grid import CubeIndex, GridError, GridFunction, block_reduce
from .weights import _corner_singular_unit_integral, resolve


class OperatorError(ValueError):
    pass


@dataclass
class OperatorConfig:
    maximal_kind: str = "centered-discrete"   # dyadic-local | centered-discrete | powered
    powered_epsilon: float = 1.0
    rdf_terms: int = 20
    opnorm_mode: str = "empirical"            # supplied | empirical | ap-bound
    opnorm_value: float | None = None
    ap_bound_cn: float = 1.0
    probe_count: int = 20
    probe_seed: int = 7

    def __post_init__(self):
        if self.rdf_terms < 1:
            raise OperatorError("rdf_terms must be >= 1")
        if not (0 < self.powered_epsilon <= 1):
            raise OperatorError("powered epsilon must lie in (0, 1]")


# ---------------------------------------------------------------------------
# maximal operators
# ---------------------------------------------------------------------------

def _upsample(arr):
    for ax in range(arr.ndim):
        arr = np.repeat(arr, 2, axis=ax)
    return arr


def dyadic_maximal_values(values):
    """Local dyadic maximal on a cell block: per cell, the largest average
    of |values| over dyadic sub-blocks containing it (one top-down pass)."""
    a = np.abs(values)
    depth = int(a.shape[0]).bit_length() - 1
    run = None
    for lev in range(depth + 1):
        bm = block_reduce(a, lev, np.mean)
        run = bm if run is None else np.maximum(_upsample(run), bm)
    return run


def dyadic_maximal(f: GridFunction, q: CubeIndex | None = None):
    """M^d_Q f: max over dyadic P with x in P, P inside Q, of avg |f| over P.

    Returns a GridFunction equal to the maximal on Q and 0 outside.
    """
    if q is None:
        q = CubeIndex.root(f.n)
    out = np.zeros_like(f.values)
    sl = f.block(q)
    out[sl] = dyadic_maximal_values(f.values[sl])
    return f.copy_with(out)


def _box_sums(padded, lo, hi):
    n = lo.shape[0]
    s = None
    for signs in itertools.product((0, 1), repeat=n):
        corner = tuple(hi[i] if signs[i] else lo[i] for i in range(n))
        term = padded[corner]
        if (n - sum(signs)) % 2 == 1:
            term = -term
        s = term if s is None else s + term
    return s


def centered_maximal_values(values):
    """Discrete centered maximal with cube windows clipped to the block.

    Per cell center, the max over window radii r = 0..N-1 (in cells) of the
    average of |values| over the clipped window; computed with an integral
    image so each radius is O(cells).
    """
    a = np.abs(np.asarray(values, dtype=float))
    n = a.ndim
    N = a.shape[0]
    P = a
    for ax in range(n):
        P = np.cumsum(P, axis=ax)
    P = np.pad(P, [(1, 0)] * n)
    idx = np.indices(a.shape)
    best = a.copy()
    for r in range(1, N):
        lo = np.clip(idx - r, 0, None)
        hi = np.clip(idx + r + 1, None, N)
        sums = _box_sums(P, lo, hi)
        cnt = np.prod(hi - lo, axis=0)
        np.maximum(best, sums / cnt, out=best)
    return best


def centered_maximal(f: GridFunction):
    return f.copy_with(centered_maximal_values(f.values))


def centered_maximal_measure(cell_masses, cell_volume):
    """Centered maximal of a measure: sup over clipped cube windows of
    mass(window)/volume(window)."""
    m = np.asarray(cell_masses, dtype=float)
    n = m.ndim
    N = m.shape[0]
    P = m
    for ax in range(n):
        P = np.cumsum(P, axis=ax)
    P = np.pad(P, [(1, 0)] * n)
    idx = np.indices(m.shape)
    best = m / cell_volume
    for r in range(1, N):
        lo = np.clip(idx - r, 0, None)
        hi = np.clip(idx + r + 1, None, N)
        sums = _box_sums(P, lo, hi)
        cnt = np.prod(hi - lo, axis=0)
        np.maximum(best, sums / (cnt * cell_volume), out=best)
    return best


def powered_maximal(f: GridFunction, epsilon):
    """M_eps(f) = M(|f|^eps)^(1/eps) with the centered maximal."""
    if not (0 < epsilon <= 1):
        raise OperatorError("epsilon must lie in (0, 1]")
    return f.copy_with(centered_maximal_values(np.abs(f.values) ** epsilon)
                       ** (1.0 / epsilon))


def maximal(f: GridFunction, cfg: OperatorConfig | None = None):
    cfg = cfg or OperatorConfig()
    if cfg.maximal_kind == "dyadic-local":
        return dyadic_maximal(f)
    if cfg.maximal_kind == "powered":
        return powered_maximal(f, cfg.powered_epsilon)
    return centered_maximal(f)


# ---------------------------------------------------------------------------
# fractional integral
# ---------------------------------------------------------------------------

def fractional_kernel(n, alpha, offsets_per_axis, h):
    """Symmetric discrete kernel k(dx) = |dx|^(alpha-n) between midpoints,
    with the zero-offset entry equal to the exact cell self-integral over
    the cell volume."""
    span = np.arange(-(offsets_per_axis - 1), offsets_per_axis) * h
    grids = np.meshgrid(*([span] * n), indexing="ij")
    dist2 = sum(g * g for g in grids)
    with np.errstate(divide="ignore"):
        K = np.where(dist2 > 0, dist2, 1.0) ** ((alpha - n) / 2.0)
    center = tuple([offsets_per_axis - 1] * n)
    self_integral = ((h / 2.0) ** alpha) * (2 ** n) \
        * _corner_singular_unit_integral(n, alpha)
    K[center] = self_integral / h ** n
    return K


def fractional_integral(g: GridFunction, alpha, q: CubeIndex | None = None):
    """I_alpha(g)(x) = sum over cells y in Q of g(y)|x-y|^(alpha-n) vol,
    midpoint kernel with exact self-cell integral; evaluated at all cell
    centers of Q (zero outside Q)."""
    n = g.n
    if not (0 < alpha < n):
        raise OperatorError("alpha must lie in (0, n)")
    if np.any(g.values < 0):
        raise OperatorError("g must be nonnegative")
    if q is None:
        q = CubeIndex.root(n)
    sl = g.block(q)
    block = g.values[sl]
    s = block.shape[0]
    K = fractional_kernel(n, alpha, s, g.cell_width)
    vals = fftconvolve(block, K, mode="valid") * g.cell_volume
    out = np.zeros_like(g.values)
    out[sl] = np.maximum(vals, 0.0)
    return g.copy_with(out)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def lp_norm(values, masses, p):
    return float((np.abs(values) ** p * masses).sum() ** (1.0 / p))


def _sorted_distribution(values, masses):
    v = np.abs(np.asarray(values, dtype=float)).ravel()
    m = np.asarray(masses, dtype=float).ravel()
    order = np.argsort(v)[::-1]
    v, m = v[order], m[order]
    cum = np.cumsum(m)
    # collapse ties so each row is a distinct value with mass mu{|g| >= v}
    keep = np.ones(v.size, dtype=bool)
    keep[:-1] = v[:-1] != v[1:]
    return v[keep], cum[keep]


def weak_norm_values(values, masses, p):
    """Exact weak-L^p quasinorm sup_t t * mu{|g| > t}^(1/p) for a step
    distribution (sup attained approaching each value level from below)."""
    if np.asarray(masses).sum() <= 0:
        raise OperatorError("empty measure")
    v, cum = _sorted_distribution(values, masses)
    if v.size == 0 or v[0] == 0.0:
        return 0.0
    return float(np.max(v * cum ** (1.0 / p)))


def lorentz_p1_norm_values(values, masses, p):
    """Exact L^{p,1} norm: integral over t of mu{|g| > t}^(1/p) dt."""
    if np.asarray(masses).sum() <= 0:
        raise OperatorError("empty measure")
    v, cum = _sorted_distribution(values, masses)
    v = v[::-1]
    cum = cum[::-1]          # ascending values; cum[k] = mu{|g| >= v[k]}
    prev = np.concatenate([[0.0], v[:-1]])
    return float(np.sum((v - prev) * cum ** (1.0 / p)))


def triple_norm_values(values, masses, p):
    """sup over superlevel sets E of |g| of mu(E)^(1/p - 1) * int_E |g| dmu.

    Restricting to superlevel sets attains the sup for this functional
    (rearrangement); documented computational reduction.  Requires p > 1.
    """
    if p <= 1:
        raise OperatorError("triple norm requires p > 1")
    v = np.abs(np.asarray(values, dtype=float)).ravel()
    m = np.asarray(masses, dtype=float).ravel()
    if m.sum() <= 0:
        raise OperatorError("empty measure")
    order = np.argsort(v)[::-1]
    v, m = v[order], m[order]
    cum_mass = np.cumsum(m)
    cum_int = np.cumsum(v * m)
    pos = cum_mass > 0
    return float(np.max(cum_mass[pos] ** (1.0 / p - 1.0) * cum_int[pos]))


def _restrict(g: GridFunction, measure, q):
    vals = g.values[g.block(q)].ravel()
    masses = np.asarray(measure_cell_masses(measure, g))[g.block(q)].ravel()
    return vals, masses


def measure_cell_masses(measure, g: GridFunction):
    if isinstance(measure, np.ndarray):
        return measure
    if hasattr(measure, "cell_masses"):
        return measure.cell_masses(g.root, g.depth)
    return resolve(measure, g.root, g.depth) * g.cell_volume


def weak_norm(g: GridFunction, p, measure, q=None, normalize=True):
    q = q or CubeIndex.root(g.n)
    vals, masses = _restrict(g, measure, q)
    if normalize:
        masses = masses / masses.sum()
    return weak_norm_values(vals, masses, p)


def lorentz_p1_norm(g: GridFunction, p, measure, q=None, normalize=True):
    q = q or CubeIndex.root(g.n)
    vals, masses = _restrict(g, measure, q)
    if normalize:
        masses = masses / masses.sum()
    return lorentz_p1_norm_values(vals, masses, p)


def triple_norm(g: GridFunction, p, measure, q=None, normalize=True):
    q = q or CubeIndex.root(g.n)
    vals, masses = _restrict(g, measure, q)
    if normalize:
        masses = masses / masses.sum()
    return triple_norm_values(vals, masses, p)


def orlicz_exp_norm_values(values, masses, rel_tol=1e-12):
    """Luxemburg norm for Phi(t) = exp(t) - 1 on a normalized measure:
    the lambda with mean of (exp(|g|/lambda) - 1) equal to 1, by bisection."""
    v = np.abs(np.asarray(values, dtype=float)).ravel()
    m = np.asarray(masses, dtype=float).ravel()
    tot = m.sum()
    if tot <= 0:
        raise OperatorError("empty measure")
    m = m / tot
    gmax = float(v.max()) if v.size else 0.0
    if gmax == 0.0:
        return 0.0

    def excess(lam):
        z = v / lam
        if z.max() > 700.0:
            return np.inf
        return float((m * np.expm1(z)).sum()) - 1.0

    hi = gmax / math.log(2.0)      # excess(hi) <= 0 always
    lo = hi
    while excess(lo) <= 0.0:
        lo *= 0.5
        if lo < 1e-300:
            return 0.0
    while (hi - lo) > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


def orlicz_exp_norm(g: GridFunction, measure=None, q=None, rel_tol=1e-12):
    """exp-L Luxemburg norm of g on Q against the normalized measure
    (Lebesgue dx/|Q| when no measure is given)."""
    q = q or CubeIndex.root(g.n)
    vals = g.values[g.block(q)].ravel()
    if measure is None:
        masses = np.full(vals.shape, 1.0 / vals.size)
    else:
        masses = np.asarray(measure_cell_masses(measure, g))[g.block(q)].ravel()
        masses = masses / masses.sum()
    return orlicz_exp_norm_values(vals, masses, rel_tol)


# ---------------------------------------------------------------------------
# truncation and Rubio de Francia
# ---------------------------------------------------------------------------

def truncate(g: GridFunction, lam):
    """T_lam(g): 0 below lam, g - lam between lam and 2 lam, lam above."""
    if lam <= 0:
        raise OperatorError("lambda must be positive")
    if np.any(g.values < 0):
        raise OperatorError("g must be nonnegative")
    return g.copy_with(np.minimum(np.maximum(g.values - lam, 0.0), lam))


def rdf_probe_corpus(shape, count, seed):
    """Seeded probe functions for empirical maximal-operator norms: random
    positive fields with every fourth entry a single-cell spike."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        if i % 4 == 3:
            vals = np.full(shape, 1e-3)
            idx = tuple(rng.integers(0, s) for s in shape)
            vals[idx] = 1.0
        else:
            vals = rng.random(shape) + 0.05
        out.append(vals)
    return out


def maximal_opnorm(w_masses, p, shape, cfg: OperatorConfig, ap_value=None):
    """||M||_{L^p(w)} estimate per cfg.opnorm_mode."""
    if cfg.opnorm_mode == "supplied":
        if cfg.opnorm_value is None:
            raise OperatorError("supplied mode needs opnorm_value")
        return float(cfg.opnorm_value)
    if cfg.opnorm_mode == "ap-bound":
        if ap_value is None:
            raise OperatorError("ap-bound mode needs the A_p constant")
        pprime = p / (p - 1.0)
        return cfg.ap_bound_cn * pprime * ap_value ** (1.0 / (p - 1.0))
    best = 0.0
    for vals in rdf_probe_corpus(shape, cfg.probe_count, cfg.probe_seed):
        num = lp_norm(centered_maximal_values(vals).ravel(), w_masses.ravel(), p)
        den = lp_norm(vals.ravel(), w_masses.ravel(), p)
        best = max(best, num / den)
    return max(best, 1.0)


def rubio_de_francia(h: GridFunction, w, p, cfg: OperatorConfig | None = None,
                     ap_value=None):
    """Truncated majorant series R(h) = sum_k M^k h / (2 ||M||)^k.

    Returns (R, report) where report records the operator-norm estimate,
    the number of terms, and the geometric tail bound
    (1/(2||M||))^(K+1) / (1 - 1/(2||M||)) * ||h||_{L^p(w)}.
    """
    cfg = cfg or OperatorConfig()
    if p <= 1:
        raise OperatorError("p must be > 1")
    if np.any(h.values < 0) or not np.any(h.values > 0):
        raise OperatorError("h must be nonnegative and not identically zero")
    w_masses = np.asarray(measure_cell_masses(w, h))
    opnorm = maximal_opnorm(w_masses, p, h.values.shape, cfg, ap_value)
    K = cfg.rdf_terms
    term = h.values.copy()
    acc = term.copy()
    ratio = 1.0 / (2.0 * opnorm)
    for k in range(1, K + 1):
        term = centered_maximal_values(term)
        acc = acc + term * ratio ** k
    hnorm = lp_norm(h.values.ravel(), w_masses.ravel(), p)
    tail = ratio ** (K + 1) / (1.0 - ratio) * hnorm
    report = {
        "opnorm": opnorm,
        "opnorm_mode": cfg.opnorm_mode,
        "terms": K,
        "tail_bound": tail,
        "h_norm": hnorm,
    }
    return h.copy_with(acc), report
