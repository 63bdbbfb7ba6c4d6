"""Sobolev-exponent formulas, left/right-hand-side evaluators for the
oscillation-inequality catalog, the power-weight sharpness sweep, and the
weak-to-strong truncation demonstration.

Unknown dimensional constants are never asserted: each check either
verifies a fully explicit bound or reports the measured constant; sweeps
track measured constants for boundedness, which is the falsifiable
content.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import (CubeIndex, GridFunction, RootBox, all_cubes,
                   discrete_gradient, sample)
from .weights import PowerWeight, ap_constant, two_weight_ap, ap1_constant
from .decomposition import orthonormal_basis, project, oscillation
from .operators import (centered_maximal_values, centered_maximal_measure,
                        fractional_integral, lorentz_p1_norm, lp_norm,
                        measure_cell_masses, orlicz_exp_norm, truncate,
                        weak_norm_values)


class InequalityError(ValueError):
    pass


# ---------------------------------------------------------------------------
# exponent algebra
# ---------------------------------------------------------------------------

def sobolev_exponent(kind, p, n, q=1.0, apq=1.0, M=None):
    """Solve 1/p - 1/p* = gap for p*, where gap is 1/n (classical),
    1/(n(q + log apq)) (weighted, natural log), 1/(nq) (weighted, constant
    aware), or 1/(nqM)."""
    if not (1 <= p < n):
        raise InequalityError("requires 1 <= p < n")
    if kind == "classical":
        gap = 1.0 / n
    elif kind == "A":
        if q < 1 or apq < 1:
            raise InequalityError("need q >= 1 and A_q constant >= 1")
        gap = 1.0 / (n * (q + math.log(apq)))
    elif kind == "B":
        if q < 1:
            raise InequalityError("need q >= 1")
        gap = 1.0 / (n * q)
    elif kind == "M":
        if M is None or M <= 1 or q < 1:
            raise InequalityError("need M > 1 and q >= 1")
        gap = 1.0 / (n * q * M)
    else:
        raise InequalityError(f"unknown kind {kind!r}")
    inv = 1.0 / p - gap
    if inv <= 0:
        return math.inf
    return 1.0 / inv


@dataclass
class Exponents:
    p: float
    n: int
    q: float = 1.0
    m: int = 1

    @property
    def p_conjugate(self):
        return math.inf if self.p == 1 else self.p / (self.p - 1.0)

    @property
    def n_conjugate(self):
        return math.inf if self.n == 1 else self.n / (self.n - 1.0)

    @property
    def p_star(self):
        return sobolev_exponent("classical", self.p, self.n)


# ---------------------------------------------------------------------------
# sides
# ---------------------------------------------------------------------------

def _cell_masses(w, f: GridFunction):
    if w is None:
        return np.full(f.values.shape, f.cell_volume)
    return np.asarray(measure_cell_masses(w, f))


def poincare_sides(f: GridFunction, Q=None, u=None, v=None, lhs_exponent=1.0,
                   p=1.0, m=1, center="mean", rhs_kind="gradient",
                   normalized=True, grad=None):
    """(lhs, rhs) of an oscillation inequality on Q.

    lhs: (1/u(Q) int_Q |f - c|^lhs_exponent u)^(1/lhs_exponent) with center
    c in {cube mean, weighted mean, polynomial projection of order m}.
    rhs kinds: "gradient" (two-weight: v inside, u outside), "lorentz"
    (L^{p,1} of the gradient against u), "mixed" (unnormalized, with the
    maximal-function weight (M(u chi_Q))^{p/n'}/u^{p-1}).
    """
    if Q is None:
        Q = CubeIndex.root(f.n)
    sl = f.block(Q)
    umass = _cell_masses(u, f)[sl]
    vmass = umass if v is None else _cell_masses(v, f)[sl]
    block = f.values[sl]
    utot = umass.sum()
    if utot <= 0:
        raise InequalityError("degenerate outer weight mass")
    if grad is None:
        grad = discrete_gradient(f, m)
    gblock = grad.values[sl]
    ell = f.sidelength(Q)

    if center == "projection":
        basis = orthonormal_basis(f, Q, m)
        c = project(f, basis).values[sl]
    elif center == "weighted_mean":
        c = float((block * umass).sum() / utot)
    else:
        c = float(block.mean())
    osc = (np.abs(block - c) ** lhs_exponent * umass).sum()
    lhs = (osc / utot) ** (1.0 / lhs_exponent) if normalized \
        else osc ** (1.0 / lhs_exponent)

    if rhs_kind == "gradient":
        s = (gblock ** p * vmass).sum()
        rhs = ell ** m * ((s / utot) ** (1.0 / p) if normalized
                          else s ** (1.0 / p))
    elif rhs_kind == "lorentz":
        norm_m = umass / utot
        from .operators import lorentz_p1_norm_values
        rhs = ell * lorentz_p1_norm_values(gblock.ravel(), norm_m.ravel(), p)
    elif rhs_kind == "mixed":
        uvals = umass / f.cell_volume
        Mw = centered_maximal_values(uvals)
        nprime = math.inf if f.n == 1 else f.n / (f.n - 1.0)
        mix = np.ones_like(uvals) if nprime == math.inf else Mw ** (p / nprime)
        s = (gblock ** p * mix / uvals ** (p - 1.0) * f.cell_volume).sum()
        rhs = s ** (1.0 / p)
    else:
        raise InequalityError(f"unknown rhs kind {rhs_kind!r}")
    return float(lhs), float(rhs)


# ---------------------------------------------------------------------------
# inequality catalog
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    inequality_id: str
    lhs: float
    rhs: float
    bound: float
    ratio: float
    passed: bool | None
    status: str                      # "verified" | "reported"
    measured_constant: float
    inputs: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "id": self.inequality_id,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "bound": self.bound,
            "ratio": self.ratio,
            "passed": self.passed,
            "status": self.status,
            "measured_constant": self.measured_constant,
            "inputs": self.inputs,
        }


def _result(iid, lhs, rhs, bound, status, inputs):
    ratio = lhs / rhs if rhs > 0 else math.inf if lhs > 0 else 0.0
    prod = bound * rhs
    passed = (lhs <= prod * (1 + 1e-9)) if np.isfinite(bound) else None
    measured = lhs / prod if prod > 0 else math.inf if lhs > 0 else 0.0
    return CheckResult(iid, float(lhs), float(rhs), float(bound), float(ratio),
                       passed, status, float(measured), inputs)


def _functional_hypothesis_norm(f: GridFunction, a_eval, Q, depth=None):
    """max over dyadic P inside Q of avg_P |f - f_P| / a(P)."""
    depth = f.depth if depth is None else depth
    best = 0.0
    for P in all_cubes(f.n, depth):
        if not Q.contains(P):
            continue
        block = f.values[f.block(P)]
        osc = float(np.abs(block - block.mean()).mean())
        best = max(best, osc / a_eval(P))
    return best


def check_inequality(iid, f, Q=None, u=None, v=None, p=1.0, q=1.0, m=1,
                     p0=None, mu=None, alpha=1.0, a_functional=None,
                     depth_cap=None):
    """Evaluate one catalog inequality; see module docstring for the
    verified-vs-reported convention."""
    if Q is None:
        Q = CubeIndex.root(f.n)
    n = f.n
    root, depth = f.root, f.depth
    inputs = {"id": iid, "p": p, "q": q, "m": m}
    uvals = None if u is None else _cell_masses(u, f) / f.cell_volume

    if iid == "pp-two-weight":
        lhs, rhs = poincare_sides(f, Q, u=u, v=v, lhs_exponent=p, p=p, m=1)
        if p > 1:
            un = _cell_masses(u, f) / f.cell_volume
            vn = un if v is None else _cell_masses(v, f) / f.cell_volume
            bound = two_weight_ap(un, vn, p, root, depth) ** (1.0 / p)
        else:
            un = _cell_masses(u, f) / f.cell_volume
            bound = ap_constant(un, 1.0, root, depth)
        return _result(iid, lhs, rhs, bound, "reported", inputs)

    if iid == "pp-measure":
        mu_mass = _cell_masses(mu, f)
        w_mass = _cell_masses(u, f)
        from .functionals import FractionalFunctional
        a = FractionalFunctional(alpha, p, mu_mass, w_mass, root, depth)
        anorm = _functional_hypothesis_norm(f, a.eval, Q)
        lhs, _ = poincare_sides(f, Q, u=u, lhs_exponent=p, p=p)
        rhs = a.eval(Q)
        bound = (n / alpha) * anorm
        return _result(iid, lhs, rhs, bound, "reported", inputs)

    if iid in ("sobolev-A", "sobolev-B"):
        un = _cell_masses(u, f) / f.cell_volume
        apq = ap_constant(un, q, root, depth)
        app = ap_constant(un, p, root, depth)
        kind = "A" if iid == "sobolev-A" else "B"
        pstar = sobolev_exponent(kind, p, n, q=q, apq=apq)
        lhs, rhs = poincare_sides(f, Q, u=u, lhs_exponent=pstar, p=p, m=1)
        bound = app ** (1.0 / p) if kind == "A" \
            else apq ** (1.0 / (n * q)) * app ** (2.0 / p)
        inputs["p_star"] = pstar
        return _result(iid, lhs, rhs, bound, "reported", inputs)

    if iid == "a1-linear":
        un = _cell_masses(u, f) / f.cell_volume
        pstar = sobolev_exponent("classical", p, n)
        lhs, rhs = poincare_sides(f, Q, u=u, lhs_exponent=pstar, p=p,
                                  center="weighted_mean")
        bound = ap_constant(un, 1.0, root, depth)
        inputs["p_star"] = pstar
        return _result(iid, lhs, rhs, bound, "reported", inputs)

    if iid == "mixed":
        pstar = sobolev_exponent("classical", p, n)
        lhs, _ = poincare_sides(f, Q, u=u, lhs_exponent=pstar, p=p,
                                center="weighted_mean", normalized=False)
        _, rhs = poincare_sides(f, Q, u=u, lhs_exponent=pstar, p=p,
                                rhs_kind="mixed")
        inputs["p_star"] = pstar
        return _result(iid, lhs, rhs, math.nan, "reported", inputs)

    if iid == "lorentz":
        un = _cell_masses(u, f) / f.cell_volume
        lhs, rhs = poincare_sides(f, Q, u=u, lhs_exponent=p, p=p,
                                  rhs_kind="lorentz")
        bound = ap1_constant(un, p, root, depth) ** (1.0 / p)
        return _result(iid, lhs, rhs, bound, "reported", inputs)

    if iid == "higher-order":
        lhs, rhs = poincare_sides(f, Q, u=u, v=v, lhs_exponent=p, p=p, m=m,
                                  center="projection")
        un = _cell_masses(u, f) / f.cell_volume
        vn = un if v is None else _cell_masses(v, f) / f.cell_volume
        bound = (two_weight_ap(un, vn, p, root, depth) ** (1.0 / p)
                 if p > 1 else ap_constant(un, 1.0, root, depth))
        return _result(iid, lhs, rhs, bound, "reported", inputs)

    if iid == "exp-JN":
        if a_functional is None:
            raise InequalityError("exp-JN needs an increasing functional")
        hyp = _functional_hypothesis_norm(f, a_functional.eval, Q)
        dev = f.copy_with(np.abs(f.values - f.values[f.block(Q)].mean()))
        lhs = orlicz_exp_norm(dev, q=Q)
        rhs = a_functional.eval(Q)
        return _result(iid, lhs, rhs, max(hyp, 1e-300), "reported", inputs)

    if iid == "kz-downward":
        if p0 is None or p0 <= p:
            raise InequalityError("kz-downward needs p0 > p")
        un = _cell_masses(u, f) / f.cell_volume
        lhs, rhs = poincare_sides(f, Q, u=u, lhs_exponent=p, p=p)
        app = ap_constant(un, p, root, depth)
        bound = app ** ((p0 - 1.0) / (p - 1.0)) if p > 1 else math.nan
        inputs["p0"] = p0
        return _result(iid, lhs, rhs, bound, "reported", inputs)

    if iid == "pointwise-i1":
        if n < 2:
            raise InequalityError("pointwise-i1 needs n >= 2 (alpha = 1 < n)")
        grad = discrete_gradient(f, 1)
        i1 = fractional_integral(grad, 1.0, Q)
        sl = f.block(Q)
        dev = np.abs(f.values[sl] - f.values[sl].mean())
        denom = i1.values[sl]
        mask = denom > 0
        sup = float(np.max(dev[mask] / denom[mask])) if mask.any() else 0.0
        return _result(iid, sup, 1.0, math.nan, "reported", inputs)

    if iid == "i1-vs-m":
        if n < 2:
            raise InequalityError("i1-vs-m needs n >= 2")
        grad = discrete_gradient(f, 1)
        i1 = fractional_integral(grad, 1.0, Q)
        sl = f.block(Q)
        Mg = centered_maximal_values(grad.values)[sl]
        ell = f.sidelength(Q)
        denom = ell * Mg
        mask = denom > 0
        sup = float(np.max(i1.values[sl][mask] / denom[mask])) if mask.any() else 0.0
        return _result(iid, sup, 1.0, math.nan, "reported", inputs)

    if iid == "weak-1n'":
        if n < 2:
            raise InequalityError("weak-1n' needs n >= 2")
        mu_mass = _cell_masses(mu, f)
        nprime = n / (n - 1.0)
        sl = f.block(Q)
        dev = np.abs(f.values[sl] - f.values[sl].mean())
        lhs = weak_norm_values(dev.ravel(), mu_mass[sl].ravel(), nprime)
        Mmu = centered_maximal_measure(mu_mass, f.cell_volume)[sl]
        grad = discrete_gradient(f, 1)
        rhs = float((grad.values[sl] * Mmu ** (1.0 / nprime)).sum()
                    * f.cell_volume)
        return _result(iid, lhs, rhs, math.nan, "reported", inputs)

    raise InequalityError(f"unknown inequality id {iid!r}")


# ---------------------------------------------------------------------------
# sharpness sweep
# ---------------------------------------------------------------------------

def plateau_function(root: RootBox, depth, eps):
    """1 on the max-norm ball of radius eps, affine down to 0 at radius
    2 eps, 0 outside; sampled at cell midpoints."""

    def fn(*coords):
        m = np.maximum.reduce([np.abs(c) for c in coords])
        return np.clip((2.0 * eps - m) / eps, 0.0, 1.0)

    return sample(root, depth, fn)


@dataclass
class SharpnessSweep:
    p: float
    n: int
    epsilon: float
    deltas: list
    lhs: list
    rhs0: list
    a1: list
    beta_hat: float
    fit_residual: float

    def ratios(self):
        return [l / r for l, r in zip(self.lhs, self.rhs0)]

    def normalized_constants(self, beta):
        """Measured constant (lhs/rhs0)/[w]_{A_1}^beta per delta."""
        return [r / a ** beta for r, a in zip(self.ratios(), self.a1)]

    def to_dict(self):
        return {
            "p": self.p,
            "n": self.n,
            "epsilon": self.epsilon,
            "deltas": list(self.deltas),
            "lhs": list(self.lhs),
            "rhs0": list(self.rhs0),
            "a1": list(self.a1),
            "beta_hat": self.beta_hat,
            "fit_residual": self.fit_residual,
        }


def sharpness_point(p, n, eps, delta, depth):
    """(lhs, rhs0, a1) for one power-weight/plateau configuration."""
    root = RootBox.symmetric(n)
    w = PowerWeight(delta, n, root)
    f = plateau_function(root, depth, eps)
    masses = w.cell_masses(root, depth)
    tot = masses.sum()
    pstar = sobolev_exponent("classical", p, n)
    lhs = float(((f.values ** pstar * masses).sum() / tot) ** (1.0 / pstar))
    grad = discrete_gradient(f, 1)
    rhs0 = root.side * float(((grad.values ** p * masses).sum() / tot)
                             ** (1.0 / p))
    a1 = ap_constant(w.cell_values(root, depth), 1.0, root, depth)
    return lhs, rhs0, a1


def sharpness_sweep(p, n, eps, deltas, depth):
    """Power-weight sharpness experiment: fit the exponent beta_hat of the
    measured ratio lhs/rhs0 against the A_1 constant over the delta sweep."""
    if not (0 < eps < 0.5):
        raise InequalityError("eps must lie in (0, 1/2)")
    if not (1 <= p < n):
        raise InequalityError("requires 1 <= p < n")
    if any(not (0 < d < 1) for d in deltas):
        raise InequalityError("deltas must lie in (0, 1)")
    deltas = sorted(deltas, reverse=True)
    lhs, rhs0, a1 = [], [], []
    for d in deltas:
        l, r, a = sharpness_point(p, n, eps, d, depth)
        lhs.append(l)
        rhs0.append(r)
        a1.append(a)
    xs = np.log(a1)
    ys = np.log(np.array(lhs) / np.array(rhs0))
    coef, res = np.polyfit(xs, ys, 1, full=True)[:2]
    resid = float(res[0]) if len(res) else 0.0
    return SharpnessSweep(p, n, eps, deltas, lhs, rhs0, a1, float(coef[0]),
                          resid)


def sharpness_scaling_exponents(p, n, delta, epsilons, depth):
    """Fitted log-log exponents of lhs and rhs0 against eps at fixed delta
    (proof-scaling diagnostics)."""
    ls, rs = [], []
    for eps in sorted(epsilons):
        l, r, _ = sharpness_point(p, n, eps, delta, depth)
        ls.append(l)
        rs.append(r)
    xs = np.log(sorted(epsilons))
    return (float(np.polyfit(xs, np.log(ls), 1)[0]),
            float(np.polyfit(xs, np.log(rs), 1)[0]))


# ---------------------------------------------------------------------------
# weak implies strong
# ---------------------------------------------------------------------------

def weak_implies_strong_demo(g: GridFunction, mu, nu, p):
    """Both sides of the truncation argument: the L^p(mu) norm of g versus
    the total gradient mass against nu, with per-level weak constants of
    the truncations at lambda = 2^k and the disjointness telescoping sum."""
    if np.any(g.values < 0):
        raise InequalityError("g must be nonnegative")
    mu_mass = _cell_masses(mu, g).ravel()
    nu_mass = _cell_masses(nu, g)
    nu_vals = nu_mass / g.cell_volume
    gmax = float(g.values.max())
    report = {
        "strong": lp_norm(g.values.ravel(), mu_mass, p),
        "gradient_total": 0.0,
        "levels": [],
        "telescoped_gradient": 0.0,
    }
    grad = discrete_gradient(g, 1)
    report["gradient_total"] = float((grad.values * nu_mass).sum())
    if gmax == 0.0:
        report["chain_constant"] = 0.0
        return report
    kmax = math.ceil(math.log2(gmax))
    tele = 0.0
    weak_consts = []
    for k in range(kmax - 25, kmax + 1):
        lam = 2.0 ** k
        Tk = truncate(g, lam)
        if not np.any(Tk.values > 0):
            continue
        wk = weak_norm_values(Tk.values.ravel(), mu_mass, p)
        gTk = discrete_gradient(Tk, 1)
        denom = float((gTk.values * nu_mass).sum())
        level_mask = (g.values > lam) & (g.values <= 2.0 * lam)
        tele += float((grad.values * nu_mass)[level_mask].sum())
        weak_consts.append(wk / denom if denom > 0 else math.inf)
        report["levels"].append({"k": k, "lambda": lam, "weak_norm": wk,
                                 "gradient": denom})
    report["telescoped_gradient"] = tele
    report["weak_constants"] = weak_consts
    finite = [c for c in weak_consts if np.isfinite(c)]
    report["max_weak_constant"] = max(finite) if finite else math.inf
    gt = report["gradient_total"]
    report["chain_constant"] = report["strong"] / gt if gt > 0 else math.inf
    return report
