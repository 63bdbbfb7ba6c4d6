"""Stopping-time decomposition and polynomial projections."""

import numpy as np
import pytest

from poincarelab.decomposition import (DecompositionError, cz_decompose,
                                       orthonormal_basis, oscillation,
                                       oscillation_inf_constants, project,
                                       projection_sup_bound_margin)
from poincarelab.grid import CubeIndex, GridFunction, RootBox, sample

UNIT1 = RootBox.unit(1)


def cell_averaged_square(depth):
    """x^2 on the unit interval represented by exact cell averages."""
    N = 2 ** depth
    edges = np.linspace(0.0, 1.0, N + 1)
    a, b = edges[:-1], edges[1:]
    vals = (b ** 3 - a ** 3) / (3.0 * (b - a))
    return GridFunction(UNIT1, depth, vals)


# ---------------------------------------------------------------------------
# stopping-time decomposition
# ---------------------------------------------------------------------------

def test_cz_constant_has_no_stopping_cubes():
    h = GridFunction(UNIT1, 3, np.ones(8))
    dec = cz_decompose(h, L=2.0)
    assert dec.stopping == []
    assert not dec.omega_mask.any()
    assert np.array_equal(dec.good.values, h.values)
    assert dec.bad == []


def test_cz_oracle_single_spike():
    h = GridFunction(UNIT1, 2, np.array([3.0, 1.0, 1.0, 1.0]))
    dec = cz_decompose(h, L=2.0)
    assert dec.stopping == [CubeIndex(2, (0,))]
    assert dec.omega_volume_fraction() == 0.25
    assert dec.reconstruction_error() == 0.0
    assert np.allclose(dec.good.values, [3.0, 1.0, 1.0, 1.0])


def test_cz_input_validation():
    h = GridFunction(UNIT1, 2, np.full(4, 5.0))
    with pytest.raises(DecompositionError):
        cz_decompose(h, L=2.0)          # root average exceeds L
    with pytest.raises(DecompositionError):
        cz_decompose(GridFunction(UNIT1, 2, np.ones(4)), L=1.0)
    with pytest.raises(DecompositionError):
        cz_decompose(GridFunction(UNIT1, 2, np.array([1.0, -1, 1, 1])),
                     L=2.0)


def test_cz_invariants_fuzz():
    rng = np.random.default_rng(0)
    for trial in range(30):
        n = 1 if trial % 2 == 0 else 2
        depth = int(rng.integers(3, 6)) if n == 1 else int(rng.integers(2, 5))
        vals = rng.exponential(1.0, (2 ** depth,) * n)
        vals = vals / vals.mean() * rng.uniform(0.3, 1.0)
        h = GridFunction(RootBox.unit(n), depth, vals)
        L = float(rng.uniform(1.2, 4.0))
        dec = cz_decompose(h, L=L)
        for q in dec.stopping:
            avg = h.average(q)
            assert L < avg <= 2 ** n * L
        # h has average below 1, so the exceptional set is small
        assert dec.omega_volume_fraction() < 1.0 / L + 1e-12
        assert dec.reconstruction_error() <= 1e-12
        assert np.max(np.abs(dec.good.values)) <= 2 ** n * L + 1e-12
        for q, b in dec.bad:
            assert abs(b.values[h.block(q)].mean()) <= 1e-12
            outside = np.ones_like(b.values, dtype=bool)
            outside[h.block(q)] = False
            assert np.all(b.values[outside] == 0.0)


def test_cz_stopping_cubes_nest_as_L_grows():
    rng = np.random.default_rng(1)
    vals = rng.exponential(1.0, 64)
    vals = vals / vals.mean() * 0.9
    h = GridFunction(UNIT1, 6, vals)
    lo = cz_decompose(h, L=1.5)
    hi = cz_decompose(h, L=3.0)
    for q in hi.stopping:
        assert any(p.contains(q) for p in lo.stopping)


def test_cz_on_subcube_only():
    h = GridFunction(UNIT1, 3, np.array([8.0, 0, 0, 0, 1, 1, 1, 1.0]))
    Q = CubeIndex(1, (1,))
    dec = cz_decompose(h, Q=Q, L=2.0)
    assert dec.stopping == []
    # the split is only defined inside Q
    assert np.all(dec.good.values[:4] == 0.0)


# ---------------------------------------------------------------------------
# polynomial projections
# ---------------------------------------------------------------------------

def test_projection_order_one_is_mean():
    rng = np.random.default_rng(2)
    f = GridFunction(UNIT1, 4, rng.normal(size=16))
    basis = orthonormal_basis(f, CubeIndex.root(1), 1)
    pf = project(f, basis)
    assert np.allclose(pf.values, f.values.mean(), atol=1e-12)


def test_basis_orthonormal_up_to_order_four():
    for n, depth in ((1, 6), (2, 4)):
        f = GridFunction(RootBox.unit(n), depth,
                         np.zeros((2 ** depth,) * n))
        for m in (1, 2, 3, 4):
            basis = orthonormal_basis(f, CubeIndex.root(n), m)
            flat = basis.phis.reshape(basis.phis.shape[0], -1)
            gram = flat @ flat.T / flat.shape[1]
            assert np.allclose(gram, np.eye(flat.shape[0]), atol=1e-9)
            assert np.allclose(basis.phis[0], 1.0)


def test_basis_rejects_too_coarse_grid():
    f = GridFunction(UNIT1, 1, np.zeros(2))
    with pytest.raises(DecompositionError):
        orthonormal_basis(f, CubeIndex.root(1), 4)


def test_projection_reproduces_low_degree():
    for n, depth, m in ((1, 6, 2), (1, 6, 3), (2, 4, 2), (2, 4, 3)):
        root = RootBox.unit(n)
        if n == 1:
            f = sample(root, depth, lambda x: 1.0 + 2 * x
                       + (0.5 * x * x if m >= 3 else 0.0))
        else:
            f = sample(root, depth, lambda x, y: 1.0 + 2 * x - y
                       + (x * y if m >= 3 else 0.0))
        basis = orthonormal_basis(f, CubeIndex.root(n), m)
        pf = project(f, basis)
        assert np.allclose(pf.values, f.values, atol=1e-9)


def test_projection_idempotent_linear_selfadjoint():
    rng = np.random.default_rng(3)
    f = GridFunction(UNIT1, 5, rng.normal(size=32))
    g = GridFunction(UNIT1, 5, rng.normal(size=32))
    basis = orthonormal_basis(f, CubeIndex.root(1), 3)
    pf = project(f, basis)
    ppf = project(pf, basis)
    assert np.allclose(ppf.values, pf.values, atol=1e-9)
    pg = project(g, basis)
    assert np.isclose((pf.values * g.values).mean(),
                      (f.values * pg.values).mean(), atol=1e-12)
    fg = f.copy_with(2.0 * f.values + g.values)
    assert np.allclose(project(fg, basis).values,
                       2.0 * pf.values + pg.values, atol=1e-9)


def test_projection_of_cell_averaged_square_fixture():
    f = cell_averaged_square(6)
    basis = orthonormal_basis(f, CubeIndex.root(1), 2)
    pf = project(f, basis)
    mids = f.cell_midpoints()[0]
    assert np.max(np.abs(pf.values - (mids - 1 / 6))) <= 1e-12


def test_projection_sup_bound_margin_finite():
    rng = np.random.default_rng(4)
    f = GridFunction(UNIT1, 5, rng.normal(size=32))
    basis = orthonormal_basis(f, CubeIndex.root(1), 3)
    margin = projection_sup_bound_margin(f, basis)
    assert 0.0 < margin <= 1.0 + 1e-12


# ---------------------------------------------------------------------------
# oscillation
# ---------------------------------------------------------------------------

def test_oscillation_of_identity_map():
    f = sample(UNIT1, 6, lambda x: x)
    assert oscillation(f) == pytest.approx(0.25, abs=1e-12)
    assert oscillation(f.copy_with(np.full(64, 3.0))) == 0.0


def test_median_minimizes_l1_oscillation():
    rng = np.random.default_rng(5)
    f = GridFunction(UNIT1, 5, rng.normal(size=32))
    best = oscillation_inf_constants(f)
    grid = np.linspace(f.values.min(), f.values.max(), 2001)
    scan = min(np.abs(f.values - c).mean() for c in grid)
    assert best <= scan + 1e-9
    # the mean-centered oscillation is at most twice the optimum
    assert oscillation(f) <= 2.0 * best + 1e-12


def test_weighted_oscillation_center():
    f = GridFunction(UNIT1, 2, np.array([0.0, 0.0, 1.0, 1.0]))
    w = np.array([3.0, 3.0, 1.0, 1.0]) * 0.25
    # weighted mean = 1/4; avg |f - 1/4| under w/|w| = 2*(3/8)*(1/4)+...
    val = oscillation(f, w=w, weighted_center=True)
    assert val == pytest.approx(0.375, abs=1e-12)
