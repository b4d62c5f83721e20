"""Critical coupling location, threshold space extraction, classification."""

import numpy as np
import pytest

from threshold_dirac.potentials import (
    Grid3,
    SpinorField,
    build_potential,
    check_class_c,
    pseudo_inner,
)
from threshold_dirac.critical import (
    classify_lambda_bar,
    decay_decomposition,
    extend_to_grid,
    find_critical_coupling,
    lambda_of,
    make_projectors,
    sigma_min_at,
)
from threshold_dirac.radial import RadialWell, critical_coupling, tail_ratio
from threshold_dirac.solver import assemble_T

R = 1.0


@pytest.fixture(scope="module")
def crit9():
    """Resonance-class structure (attractive well) on the coarse 9^3 grid."""
    grid = Grid3(R, 9)
    shape = build_potential(grid, "spherical-well", 1.0, R)
    return find_critical_coupling(shape, (-2.2, -0.4))


@pytest.fixture(scope="module")
def crit9_bound():
    """Bound-class structure (repulsive well, vanishing tail moments)."""
    grid = Grid3(R, 9)
    shape = build_potential(grid, "spherical-well", 1.0, R)
    return find_critical_coupling(shape, (5.0, 7.0))


def test_gstar_matches_matched_radial_oracle(crit9):
    # same smoothed edge on both sides: the gap is pure 3D discretization
    well = RadialWell(1.0, R, -1, crit9.shape.edge_width)
    g_oracle = critical_coupling(well, (-2.2, -0.4))
    assert abs(crit9.g_star - g_oracle) / abs(g_oracle) < 0.03


def test_structure_invariants(crit9):
    assert crit9.dim == 2  # Kramers pair
    assert crit9.sigma_min < 1e-8 * crit9.matrix_scale
    for phi in crit9.basis:
        assert abs(phi.sup_norm() - 1.0) < 1e-12
    # gram matrices hermitian and nonsingular
    for gram in (crit9.gram_n, crit9.gram_m):
        assert np.max(np.abs(gram - gram.conj().T)) < 1e-10 * np.max(np.abs(gram))
        sv = np.linalg.svd(gram, compute_uv=False)
        assert sv[-1] > 1e-8 * sv[0]


def test_basis_solves_homogeneous_equation(crit9):
    op = assemble_T(crit9.shape, 0.0)
    sup = op.support
    for phi in crit9.basis:
        flat = phi.values[sup].reshape(-1)
        res = flat - crit9.g_star * (op.matrix @ flat)
        assert np.max(np.abs(res)) <= 1e-6 * phi.sup_norm()


def test_subcritical_sigma_bounded(crit9):
    op = assemble_T(crit9.shape, 0.0)
    s, scale = sigma_min_at(op.matrix, 0.5 * crit9.g_star)
    assert s > 1e-3 * scale


def test_coupling_covariance():
    grid = Grid3(R, 9)
    shape = build_potential(grid, "spherical-well", 1.0, R)
    double = shape.rescaled(2.0)
    c1 = find_critical_coupling(shape, (-2.2, -0.4))
    c2 = find_critical_coupling(double, (-1.1, -0.2))
    assert abs(c2.g_star - 0.5 * c1.g_star) < 1e-10 * abs(c1.g_star)


def test_no_dip_raises():
    grid = Grid3(R, 9)
    shape = build_potential(grid, "spherical-well", 1.0, R)
    with pytest.raises(ValueError, match="not critical in range"):
        find_critical_coupling(shape, (-0.4, -0.05))


# ---------------------------------------------------------------------------
# tail moments


def test_lambda_trivial_cases(crit9):
    grid = crit9.shape.grid
    A = crit9.critical_potential()
    # lower-component field is annihilated by (1+beta)
    vals = np.zeros((grid.n_nodes, 4), dtype=complex)
    vals[:, 2] = np.exp(-grid.radii() ** 2)
    vals[:, 3] = 0.3j * np.exp(-grid.radii() ** 2)
    lam = lambda_of(SpinorField(grid, vals), A)
    assert np.max(np.abs(lam)) == 0.0
    zero = build_potential(grid, "spherical-well", 0.0, R)
    lam0 = lambda_of(crit9.basis[0], zero)
    assert np.max(np.abs(lam0)) == 0.0
    # lower two components of any tail moment vanish identically
    lam1 = lambda_of(crit9.basis[0], A)
    assert lam1[2] == 0 and lam1[3] == 0


def test_lambda_bar_classes(crit9, crit9_bound):
    assert crit9.lambda_bar == 1
    assert crit9_bound.lambda_bar == 0
    # resonance-class moments are far above the classification scale
    assert all(np.linalg.norm(l) > 0.1 for l in crit9.lambda_values)
    assert all(np.linalg.norm(l) < 1e-10 for l in crit9_bound.lambda_values)


def test_lambda_bar_mixed_rejected(crit9):
    fake = crit9
    saved = list(fake.lambda_values)
    fake.lambda_values = [saved[0], np.zeros(4, dtype=complex)]
    try:
        with pytest.raises(ValueError, match="mixed"):
            classify_lambda_bar(fake)
    finally:
        fake.lambda_values = saved


def test_tail_ratio_against_radial_oracle(crit9):
    """Normalization-free |lambda| cross-check: the radial tail ratio
    |G(R)| / sup_r sqrt(G^2+F^2)/r equals |lambda|_2 / (4 pi sup|Phi|)."""
    well = RadialWell(1.0, R, -1, crit9.shape.edge_width)
    g_oracle = critical_coupling(well, (-2.2, -0.4))
    rho_radial = tail_ratio(well, g_oracle)
    rho_3d = np.linalg.norm(crit9.lambda_values[0]) / (4 * np.pi * crit9.basis[0].sup_norm())
    assert abs(rho_3d - rho_radial) / rho_radial < 0.08


# ---------------------------------------------------------------------------
# decay decomposition


def eval_grid_4r():
    return Grid3(4.0 * R, 27)


def test_decay_resonance_class(crit9):
    egrid = eval_grid_4r()
    phi_ext = extend_to_grid(crit9, crit9.basis[0], egrid)
    rep = decay_decomposition(phi_ext, crit9.critical_potential(), crit9.lambda_values[0])
    assert rep["exponent_phi2"] == -1.0
    assert -1.25 < rep["exponent_phi"] < -0.8
    assert rep["exponent_phi1"] <= -1.7
    # pointwise reassembly
    total = rep["phi_1"].values + rep["phi_2"].values
    assert np.max(np.abs(total - phi_ext.values)) < 1e-12


def test_decay_bound_class(crit9_bound):
    egrid = eval_grid_4r()
    phi_ext = extend_to_grid(crit9_bound, crit9_bound.basis[0], egrid)
    rep = decay_decomposition(
        phi_ext, crit9_bound.critical_potential(), crit9_bound.lambda_values[0]
    )
    assert rep["exponent_phi"] <= -1.8


def test_decay_grid_too_small(crit9):
    small = Grid3(2.0 * R, 13)
    phi_ext = extend_to_grid(crit9, crit9.basis[0], small)
    with pytest.raises(ValueError):
        decay_decomposition(phi_ext, crit9.critical_potential(), crit9.lambda_values[0])


def test_lambda_decay_consistency(crit9, crit9_bound):
    """The two independent classifiers agree: lambda_bar = 0 iff the full
    state decays at least like |x|^{-1.8}."""
    for crit in (crit9, crit9_bound):
        egrid = eval_grid_4r()
        phi_ext = extend_to_grid(crit, crit.basis[0], egrid)
        rep = decay_decomposition(phi_ext, crit.critical_potential(), crit.lambda_values[0])
        fast = rep["exponent_phi"] <= -1.8
        assert fast == (crit.lambda_bar == 0)


# ---------------------------------------------------------------------------
# projectors


def random_fields(grid, count, rng):
    fields = []
    for _ in range(count):
        re = rng.normal(size=(grid.n_nodes, 4))
        im = rng.normal(size=(grid.n_nodes, 4))
        damp = np.exp(-grid.radii() ** 2)[:, None]
        fields.append(SpinorField(grid, damp * (re + 1j * im)))
    return fields


def test_projector_algebra(crit9, rng):
    proj = make_projectors(crit9)
    A = crit9.critical_potential()
    grid = crit9.shape.grid
    for f in random_fields(grid, 20, rng):
        scale = f.sup_norm()
        for split in ("M", "N"):
            par = proj.project(split + "_par", f)
            perp = proj.project(split + "_perp", f)
            assert np.max(np.abs(par.values + perp.values - f.values)) < 1e-10 * scale
            twice = proj.project(split + "_par", par)
            assert np.max(np.abs(twice.values - par.values)) < 1e-10 * scale
        perp = proj.project("M_perp", f)
        pair = max(abs(pseudo_inner(phi, A, perp)) for phi in crit9.basis)
        ref = max(abs(pseudo_inner(phi, A, f)) for phi in crit9.basis) + 1e-30
        assert pair < 1e-10 * max(1.0, ref)


def test_projector_reproduces_span(crit9):
    proj = make_projectors(crit9)
    A = crit9.critical_potential()
    grid = crit9.shape.grid
    from threshold_dirac.solver import _fold_rows

    aphi = SpinorField(grid, _fold_rows(A.values, crit9.basis[0].values))
    par = proj.project("M_par", aphi)
    assert np.max(np.abs(par.values - aphi.values)) < 1e-10 * aphi.sup_norm()
    nphi = crit9.basis[1]
    npar = proj.project("N_par", nphi)
    assert np.max(np.abs(npar.values - nphi.values)) < 1e-10


def test_mperp_invariance_under_threshold_T(crit9, rng):
    """T_1 maps the A-orthogonal complement of N into itself: pairings of
    T h_perp with every basis state stay at quadrature-roundoff level."""
    proj = make_projectors(crit9)
    A = crit9.critical_potential()
    grid = crit9.shape.grid
    op = assemble_T(crit9.shape, 0.0)
    sup = op.support
    for f in random_fields(grid, 5, rng):
        perp = proj.project("M_perp", f)
        flat = perp.values[sup].reshape(-1)
        tvals = crit9.g_star * (op.matrix @ flat).reshape(-1, 4)
        full = np.zeros_like(perp.values)
        full[sup] = tvals
        tf = SpinorField(grid, full)
        for phi in crit9.basis:
            assert abs(pseudo_inner(phi, A, tf)) < 1e-8 * f.sup_norm()


# ---------------------------------------------------------------------------
# class-C report wiring


def test_class_c_report(crit9):
    egrid = eval_grid_4r()
    phi_ext = extend_to_grid(crit9, crit9.basis[0], egrid)
    decay = decay_decomposition(
        phi_ext, crit9.critical_potential(), crit9.lambda_values[0]
    )
    rep = check_class_c(crit9.critical_potential(), crit9, decay_report=decay)
    assert rep["b_weighted_finite"]
    assert rep["c_nondegenerate"]
    assert rep["e_nonzero_moment"]
