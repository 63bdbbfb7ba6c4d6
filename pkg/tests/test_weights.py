"""Weight representations and weight-class constants."""

import numpy as np
import pytest

from poincarelab.grid import CubeIndex, GridFunction, RootBox, all_cubes
from poincarelab.weights import (Atomic, Density, GridWeight, PowerWeight,
                                 WeightError, _corner_singular_unit_integral,
                                 ainf_fujii_wilson, ap1_constant, ap_constant,
                                 constants_report, resolve, rh_exponent,
                                 rh_exponent_and_check, rhinf_constant,
                                 set_inequality_holds, two_weight_ap)

UNIT1 = RootBox.unit(1)
STEP = np.array([1.0, 3.0])


def test_ap_two_value_oracle():
    # avg w = 2, avg 1/w = 2/3 on the root; both cells give 1
    assert ap_constant(STEP, 2.0, UNIT1, 1) == pytest.approx(4 / 3, abs=1e-12)
    # A_1: avg w * max(1/w) = 2 * 1
    assert ap_constant(STEP, 1.0, UNIT1, 1) == pytest.approx(2.0, abs=1e-12)


def test_ap_identity_weight_is_one():
    for n, depth in ((1, 6), (2, 3)):
        w = np.ones((2 ** depth,) * n)
        for p in (1.0, 1.5, 2.0, 3.0):
            assert ap_constant(w, p, RootBox.unit(n), depth) == \
                pytest.approx(1.0, abs=1e-12)


def test_ap_decreasing_in_p(small_weight_corpus):
    for wv, root, depth in small_weight_corpus[:6]:
        vals = [ap_constant(wv, p, root, depth) for p in (1, 1.5, 2, 3, 4)]
        assert all(a >= b - 1e-10 for a, b in zip(vals, vals[1:]))
        assert all(v >= 1.0 - 1e-12 for v in vals)


def test_ap_argmax_reproduces_supremum():
    rng = np.random.default_rng(2)
    wv = np.exp(rng.normal(0, 1, 32))
    ap, arg = ap_constant(wv, 2.0, UNIT1, 5, return_argmax=True)
    assert isinstance(arg, CubeIndex)
    f = GridFunction(UNIT1, 5, wv)
    blk = f.values[f.block(arg)]
    assert blk.mean() * (1.0 / blk).mean() == pytest.approx(ap, rel=1e-12)


def test_two_weight_oracle():
    u = np.array([1.0, 3.0])
    v = np.array([3.0, 1.0])
    assert two_weight_ap(u, v, 2.0, UNIT1, 1) == pytest.approx(3.0, abs=1e-12)


def test_two_weight_equal_weights_matches_ap(small_weight_corpus):
    for wv, root, depth in small_weight_corpus[:4]:
        assert two_weight_ap(wv, wv, 2.0, root, depth) == \
            pytest.approx(ap_constant(wv, 2.0, root, depth), rel=1e-12)


def test_rhinf_oracle():
    assert rhinf_constant(STEP, UNIT1, 1) == pytest.approx(1.5, abs=1e-12)
    assert rhinf_constant(np.ones(8), UNIT1, 3) == 1.0


def test_ainf_identity_and_step_oracle():
    assert ainf_fujii_wilson(np.ones(16), UNIT1, 4) == pytest.approx(1.0)
    # depth-1 step (1,3): root integrand is (2,3) by direct enumeration of
    # the clipped centered windows, children give 1
    assert ainf_fujii_wilson(STEP, UNIT1, 1) == pytest.approx(1.25, abs=1e-12)


def test_ainf_comparable_to_ap(small_weight_corpus):
    # the centered-window supremum can exceed the dyadic A_p value, but
    # only by a dimensional factor
    for wv, root, depth in small_weight_corpus:
        ainf = ainf_fujii_wilson(wv, root, depth)
        assert ainf >= 1.0 - 1e-12
        for p in (2.0, 3.0):
            assert ainf <= 2 ** wv.ndim * ap_constant(wv, p, root, depth)


def test_rh_exponent_formula():
    # ainf = 1 in dimension n gives 1 + 1/(2**(n+1) - 1)
    assert rh_exponent(1.0, 1) == pytest.approx(4 / 3, abs=1e-15)
    assert rh_exponent(1.0, 2) == pytest.approx(8 / 7, abs=1e-15)
    assert rh_exponent(2.0, 1) > 1.0
    # larger ainf means a smaller self-improvement exponent
    assert rh_exponent(2.0, 1) < rh_exponent(1.0, 1)


def test_rh_check_on_step():
    rw, worst, ok = rh_exponent_and_check(STEP, UNIT1, 1)
    assert ok and worst <= 2.0 + 1e-12


def test_ap1_oracles():
    assert ap1_constant(np.ones(16), 2.0, UNIT1, 4) == pytest.approx(1.0)
    # step (1,3), p=2: the weak-L^2 norm of 1/w in (Q, w dx/|Q|) equals 1
    # on every cube (computed from the two-value distribution directly)
    assert ap1_constant(STEP, 2.0, UNIT1, 1) == pytest.approx(1.0, abs=1e-12)


def test_ap1_below_ap(small_weight_corpus):
    for wv, root, depth in small_weight_corpus:
        for p in (1.5, 2.0, 3.0):
            assert ap1_constant(wv, p, root, depth) <= \
                ap_constant(wv, p, root, depth) * (1 + 1e-9)


def test_set_inequality(small_weight_corpus):
    for wv, root, depth in small_weight_corpus[:6]:
        assert set_inequality_holds(wv, 2.0, root, depth)


def test_corner_integral_1d_closed_form():
    for delta in (0.5, 0.25, 1.0):
        assert _corner_singular_unit_integral(1, delta) == \
            pytest.approx(1.0 / delta, rel=1e-4)


def test_corner_integral_2d_regular_case():
    # delta = n makes the integrand identically 1
    assert _corner_singular_unit_integral(2, 2.0) == pytest.approx(1.0,
                                                                   rel=1e-9)


def test_power_weight_total_mass_1d():
    root = RootBox.symmetric(1)
    for delta in (0.5, 0.25):
        w = PowerWeight(delta, 1, root)
        masses = w.cell_masses(root, 6)
        assert masses.sum() == pytest.approx(2.0 / delta, rel=1e-10)


def test_power_weight_reduces_to_lebesgue():
    # delta = n = 1 gives the constant weight 1
    root = RootBox.symmetric(1)
    w = PowerWeight(1.0, 1, root)
    masses = w.cell_masses(root, 3)
    assert np.allclose(masses, root.side / 8, rtol=1e-12)


def test_power_weight_mass_additivity():
    root = RootBox.symmetric(2)
    w = PowerWeight(0.5, 2, root)
    coarse = w.cell_masses(root, 3)
    fine = w.cell_masses(root, 4)
    agg = fine.reshape(8, 2, 8, 2).sum(axis=(1, 3))
    # midpoint quadrature per level: additivity holds up to quadrature
    # error, which concentrates near the singularity
    assert np.allclose(agg, coarse, rtol=5e-2)
    assert agg.sum() == pytest.approx(coarse.sum(), rel=5e-3)


def test_power_weight_refinement_stability():
    root = RootBox.symmetric(2)
    w = PowerWeight(0.5, 2, root)
    q = CubeIndex(1, (0, 0))  # touches the singularity
    m1 = w.cube_mass(q, 5)
    m2 = w.cube_mass(q, 7)
    assert m1 == pytest.approx(m2, rel=1e-2)


def test_density_and_atomic_masses():
    g = GridFunction(UNIT1, 2, np.array([1.0, 2.0, 3.0, 4.0]))
    d = Density(g)
    assert np.allclose(d.cell_masses(UNIT1, 2), g.values * 0.25)
    a = Atomic([(0.1,), (0.6,)], [2.0, 5.0])
    masses = a.cell_masses(UNIT1, 2)
    assert masses.sum() == pytest.approx(7.0)
    assert masses[0] == 2.0 and masses[2] == 5.0


def test_atomic_outside_box_rejected():
    a = Atomic([(1.5,)], [1.0])
    with pytest.raises(WeightError):
        a.cell_masses(UNIT1, 2)


def test_resolve_accepts_arrays_and_objects():
    wv = resolve(STEP, UNIT1, 1)
    assert np.array_equal(wv, STEP)
    gw = GridWeight(GridFunction(UNIT1, 1, STEP))
    assert np.array_equal(resolve(gw, UNIT1, 1), STEP)


def test_shifted_family_only_increases_sup():
    rng = np.random.default_rng(3)
    wv = np.exp(rng.normal(0, 1, 64))
    a0 = ap_constant(wv, 2.0, UNIT1, 6, shifted=False)
    a1 = ap_constant(wv, 2.0, UNIT1, 6, shifted=True)
    assert a1 >= a0 - 1e-12


def test_constants_report_bundle():
    rep = constants_report(STEP, 2.0, UNIT1, 1)
    d = rep.to_dict()
    assert d["ap"] == pytest.approx(4 / 3)
    assert d["a1"] == pytest.approx(2.0)
    assert d["rhinf"] == pytest.approx(1.5)
    assert d["rh_pass"] is True
    assert d["family"] == {"depth": 1, "shifted": False}
