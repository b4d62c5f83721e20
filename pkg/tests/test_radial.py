import numpy as np
import pytest

from threshold_dirac.radial import (
    SHARP_ROOTS,
    RadialWell,
    bound_energy,
    bound_residual,
    critical_coupling,
    tail_ratio,
    threshold_residual,
)


def test_sharp_roots_kappa_minus_one():
    well = RadialWell(1.0, 1.0, kappa=-1)
    g_att = critical_coupling(well, (-2.0, -0.5))
    g_rep = critical_coupling(well, (4.5, 6.0))
    assert g_att == pytest.approx(SHARP_ROOTS[(-1, "attractive")], abs=1e-10)
    assert g_rep == pytest.approx(SHARP_ROOTS[(-1, "repulsive")], abs=1e-9)


def test_sharp_roots_kappa_plus_one_closed_form():
    well = RadialWell(1.0, 1.0, kappa=1)
    g_rep = critical_coupling(well, (3.5, 5.0))
    g_att = critical_coupling(well, (-3.0, -1.5))
    assert g_rep == pytest.approx(1 + np.sqrt(1 + np.pi**2), abs=1e-10)
    assert g_att == pytest.approx(1 - np.sqrt(1 + np.pi**2), abs=1e-10)
    assert g_rep == pytest.approx(SHARP_ROOTS[(1, "repulsive")], abs=1e-12)


def test_matching_validated_by_shooting():
    # same roots through RK45 integration of the first-order system
    for kappa, bracket, key in [
        (-1, (-2.0, -0.5), (-1, "attractive")),
        (1, (3.5, 5.0), (1, "repulsive")),
    ]:
        well = RadialWell(1.0, 1.0, kappa=kappa)
        g_shoot = critical_coupling(well, bracket, method="shooting")
        assert abs(g_shoot - SHARP_ROOTS[key]) < 1e-8 * abs(SHARP_ROOTS[key])


def test_channel_isolation():
    # nearest root of a different channel stays far from the references
    well = RadialWell(1.0, 1.0, kappa=-2)
    g = critical_coupling(well, (5.5, 7.0))
    assert abs(g - SHARP_ROOTS[(1, "repulsive")]) > 0.8
    assert abs(g - SHARP_ROOTS[(-1, "repulsive")]) > 0.5


def test_smoothed_edge_shifts_root_monotonically():
    g_sharp = SHARP_ROOTS[(-1, "attractive")]
    prev_gap = 0.0
    for w in (0.25, 0.125, 0.0625):
        well = RadialWell(1.0, 1.0, kappa=-1, edge_width=w)
        g = critical_coupling(well, (-2.2, -0.5))
        gap = abs(g - g_sharp) / abs(g_sharp)
        assert g < g_sharp  # smoothing weakens the well: deeper coupling needed
        if prev_gap:
            assert gap < prev_gap
        prev_gap = gap
    # regression for the widest level (measured once, pinned)
    well = RadialWell(1.0, 1.0, kappa=-1, edge_width=0.25)
    assert critical_coupling(well, (-2.2, -0.5)) == pytest.approx(-1.4165681, abs=2e-6)


def test_bound_state_side_and_linearity_kappa_plus_one():
    """Bound-type channel: ktilde^2 linear in the coupling offset."""
    gstar = SHARP_ROOTS[(1, "repulsive")]
    well = RadialWell(1.0, 1.0, kappa=1)
    # levels rise with g for a positive shape: binding side is g < g*
    assert bound_energy(well, gstar + 0.05) is None
    deltas = np.linspace(0.02, 0.1, 6)
    kt2 = []
    for d in deltas:
        res = bound_energy(well, gstar - d)
        assert res is not None and 0 < res["energy"] < 1
        kt2.append(res["ktilde"] ** 2)
    kt2 = np.asarray(kt2)
    coef = np.polyfit(deltas, kt2, 1)
    fit = np.polyval(coef, deltas)
    ss_res = np.sum((kt2 - fit) ** 2)
    ss_tot = np.sum((kt2 - kt2.mean()) ** 2)
    assert 1 - ss_res / ss_tot >= 0.99
    assert coef[0] > 0


def test_bound_state_linear_in_ktilde_kappa_minus_one():
    """Resonance-type channel: ktilde itself is linear in the offset."""
    gstar = SHARP_ROOTS[(-1, "attractive")]
    well = RadialWell(1.0, 1.0, kappa=-1)
    assert bound_energy(well, gstar + 0.05) is None
    deltas = np.linspace(0.02, 0.1, 6)
    kts = np.array([bound_energy(well, gstar - d)["ktilde"] for d in deltas])
    coef = np.polyfit(deltas, kts, 1)
    fit = np.polyval(coef, deltas)
    r2 = 1 - np.sum((kts - fit) ** 2) / np.sum((kts - fit.mean()) ** 2)
    assert r2 >= 0.99
    assert coef[0] > 0


def test_bound_residual_validates_inputs():
    well = RadialWell(1.0, 1.0, kappa=1)
    with pytest.raises(ValueError):
        bound_residual(well, 4.0, 1.5)


def test_tail_ratio_stable_under_mesh_refinement():
    well = RadialWell(1.0, 1.0, kappa=-1)
    r1 = tail_ratio(well, n_mesh=800)
    r2 = tail_ratio(well, n_mesh=3200)
    assert r1 == pytest.approx(r2, rel=1e-6)
    assert 0.1 < r2 < 10.0


def test_threshold_residual_sign_structure():
    # the residual changes sign across the attractive root and nowhere
    # inside (-1.05, -0.2): channel isolation again, different route
    well = RadialWell(1.0, 1.0, kappa=-1)
    gs = np.linspace(-1.05, -0.2, 18)
    vals = np.array([threshold_residual(well, g) for g in gs])
    assert np.all(vals > 0) or np.all(vals < 0)
