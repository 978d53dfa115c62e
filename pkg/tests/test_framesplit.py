import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavepilot.framesplit import (
    TwoScaleState,
    cm_coordinates,
    cm_inverse,
    evolve_two_scale,
    extract_factors,
    product_on_config,
    reconstruct_internal,
    reduced_mass,
    two_scale_grids,
    verify_factorization,
    verify_factorization_config,
)
from wavepilot.grids import (
    FRAME_CENTER_OF_MASS,
    WaveField,
    expectation_position,
    gaussian_packet,
    l2_distance,
    make_grid,
    normalize,
    position_variance,
)
from wavepilot.potentials import PotentialSpec

from oracles import spread_width


def test_cm_coordinates_equal_masses():
    xg, rel = cm_coordinates(np.array([-1.0, 1.0]), [1.0, 1.0])
    assert xg == pytest.approx(0.0)
    assert np.allclose(rel, [-1.0, 1.0])


def test_cm_coordinates_weighted():
    xg, rel = cm_coordinates(np.array([0.0, 4.0]), [1.0, 3.0])
    assert xg == pytest.approx(3.0)
    assert np.allclose(rel, [-3.0, 1.0])


def test_cm_coordinates_single_body():
    xg, rel = cm_coordinates(np.array([2.5]), [1.7])
    assert xg == pytest.approx(2.5)
    assert np.allclose(rel, [0.0])


def test_cm_coordinates_rejects_nonpositive_mass():
    with pytest.raises(ValueError):
        cm_coordinates(np.array([0.0, 1.0]), [1.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-50, 50), min_size=2, max_size=5),
    st.lists(st.floats(0.1, 10), min_size=5, max_size=5),
)
def test_cm_round_trip_and_weighted_zero(positions, masses):
    x = np.asarray(positions)
    m = np.asarray(masses[: len(positions)])
    xg, rel = cm_coordinates(x, m)
    # mass-weighted relative coordinates vanish identically
    assert abs(float(m @ rel)) <= 1e-12 * max(1.0, float(m @ np.abs(x)))
    back = cm_inverse(xg, rel, m)
    assert np.allclose(back, x, atol=1e-12)


def test_two_scale_grids_alignment():
    cg = make_grid(2, [(-8, 8), (-8, 8)], 64)
    xg_grid, r_grid = two_scale_grids(cg)
    assert xg_grid.shape == (128,)
    assert r_grid.shape == (128,)
    assert xg_grid.spacing[0] == pytest.approx(cg.spacing[0] / 2)
    assert r_grid.spacing[0] == pytest.approx(cg.spacing[0])
    assert float(r_grid.lower[0]) == -16.0


def test_product_on_config_exact_indexing_and_norm():
    cg = make_grid(2, [(-8, 8), (-8, 8)], 64)
    xg_grid, r_grid = two_scale_grids(cg)
    ext = gaussian_packet(xg_grid, [0.0], [0.0], 1.0, 1.0, 2.0)
    rel = gaussian_packet(r_grid, [0.0], [0.0], 0.8, 1.0, 0.5, frame=FRAME_CENTER_OF_MASS)
    amps, interpolated = product_on_config(ext, rel, cg, (1.0, 1.0))
    assert not interpolated
    norm = np.sum(np.abs(amps) ** 2) * cg.cell_volume
    assert norm == pytest.approx(1.0, abs=1e-10)
    # spot check one configuration point against direct evaluation
    i, j = 20, 41
    x1 = cg.axis(0)[i]
    x2 = cg.axis(1)[j]
    xg = 0.5 * (x1 + x2)
    r = x1 - x2
    gi = int(round((xg - xg_grid.lower[0]) / xg_grid.spacing[0]))
    ri = int(round((r - r_grid.lower[0]) / r_grid.spacing[0]))
    assert amps[i, j] == ext.amplitudes[gi] * rel.amplitudes[ri]


def test_product_on_config_unequal_masses_interpolates():
    cg = make_grid(2, [(-8, 8), (-8, 8)], 64)
    xg_grid, r_grid = two_scale_grids(cg)
    ext = gaussian_packet(xg_grid, [0.0], [0.0], 1.0, 1.0, 3.0)
    rel = gaussian_packet(r_grid, [0.0], [0.0], 0.8, 1.0, 2.0 / 3.0, frame=FRAME_CENTER_OF_MASS)
    _, interpolated = product_on_config(ext, rel, cg, (1.0, 2.0))
    assert interpolated


def test_evolve_two_scale_free_relative_spreads_with_reduced_mass():
    cg = make_grid(2, [(-10, 10), (-10, 10)], 64)
    xg_grid, r_grid = two_scale_grids(cg)
    masses = (1.0, 1.0)
    mu = reduced_mass(masses)
    ext = gaussian_packet(xg_grid, [0.0], [0.0], 1.2, 1.0, 2.0)
    rel = gaussian_packet(r_grid, [0.0], [0.0], 1.0, 1.0, mu, frame=FRAME_CENTER_OF_MASS)
    state = TwoScaleState(external=ext, relative=rel, masses=masses, cm_position=[0.0])
    t_final = 1.0
    evo = evolve_two_scale(state, None, None, 1e-2, 100, store_every=100)
    width = np.sqrt(position_variance(evo.relative.snapshots[-1])[0])
    assert width == pytest.approx(spread_width(1.0, t_final, 1.0, mu), rel=1e-8)


def test_evolve_two_scale_matched_spring_width_is_stationary():
    cg = make_grid(2, [(-10, 10), (-10, 10)], 64)
    xg_grid, r_grid = two_scale_grids(cg)
    masses = (1.0, 1.0)
    mu = reduced_mass(masses)
    k = 4.0
    omega = np.sqrt(k / mu)
    sigma_r = np.sqrt(1.0 / (2 * mu * omega))
    ext = gaussian_packet(xg_grid, [0.0], [0.0], 1.2, 1.0, 2.0)
    rel = gaussian_packet(r_grid, [0.0], [0.0], sigma_r, 1.0, mu, frame=FRAME_CENTER_OF_MASS)
    state = TwoScaleState(external=ext, relative=rel, masses=masses, cm_position=[0.0])
    evo = evolve_two_scale(state, None, PotentialSpec.pair_spring(k), 2e-3, 500,
                           store_every=100)
    # width breathes at the splitting-error level, O((omega dt)^2)
    for snap in evo.relative.snapshots:
        assert np.sqrt(position_variance(snap)[0]) == pytest.approx(sigma_r, rel=1e-4)


def test_evolve_two_scale_linear_field_moves_cm_not_relative():
    cg = make_grid(2, [(-12, 12), (-12, 12)], 64)
    xg_grid, r_grid = two_scale_grids(cg)
    masses = (1.0, 1.0)
    mu = reduced_mass(masses)
    slope = 0.8
    ext = gaussian_packet(xg_grid, [0.0], [0.0], 1.0, 1.0, 2.0)
    rel = gaussian_packet(r_grid, [0.0], [0.0], 0.9, 1.0, mu, frame=FRAME_CENTER_OF_MASS)
    state = TwoScaleState(external=ext, relative=rel, masses=masses, cm_position=[0.0])
    vg = PotentialSpec.linear([slope])
    t_final = 1.5
    evo = evolve_two_scale(state, vg, None, 3e-3, 500, store_every=100)
    # external mean on the Newton parabola (acceleration -slope, mass-independent)
    xg_mean = expectation_position(evo.external.snapshots[-1])[0]
    assert xg_mean == pytest.approx(-0.5 * slope * t_final**2, abs=1e-6)
    # relative wave never sees the uniform field
    free_width = spread_width(0.9, t_final, 1.0, mu)
    assert np.sqrt(position_variance(evo.relative.snapshots[-1])[0]) == pytest.approx(
        free_width, rel=1e-8)
    assert abs(expectation_position(evo.relative.snapshots[-1])[0]) < 1e-9


def test_verify_factorization_free_product_at_rounding_floor():
    # with no coupling both routes are spectrally exact, so the discrepancy
    # sits at the rounding floor regardless of dt
    cg = make_grid(2, [(-10, 10), (-10, 10)], 128)
    xg_grid, r_grid = two_scale_grids(cg)
    masses = (1.0, 1.0)
    ext = gaussian_packet(xg_grid, [0.0], [0.0], 1.0, 1.0, 2.0)
    rel = gaussian_packet(r_grid, [0.0], [0.0], 0.8, 1.0, 0.5, frame=FRAME_CENTER_OF_MASS)
    rep = verify_factorization(ext, rel, masses, None, None, cg, 0.01, 40,
                               store_every=20, ref_refine=1)
    assert not rep.interpolated
    assert np.max(rep.discrepancy) < 1e-8


def test_verify_factorization_spring_small_and_refines():
    cg = make_grid(2, [(-10, 10), (-10, 10)], 128)
    xg_grid, r_grid = two_scale_grids(cg)
    masses = (1.0, 1.0)
    mu = reduced_mass(masses)
    k = 4.0
    omega = np.sqrt(k / mu)
    sigma_r = np.sqrt(1.0 / (2 * mu * omega))
    ext = gaussian_packet(xg_grid, [0.0], [0.0], 1.0, 1.0, 2.0)
    rel = gaussian_packet(r_grid, [0.0], [0.0], sigma_r, 1.0, mu, frame=FRAME_CENTER_OF_MASS)
    pair = PotentialSpec.pair_spring(k)
    period = 2 * np.pi / omega
    steps = 500
    rep1 = verify_factorization(ext, rel, masses, None, pair, cg, period / steps,
                                steps, store_every=steps)
    assert np.max(rep1.discrepancy) < 1e-4
    rep2 = verify_factorization(ext, rel, masses, None, pair, cg, period / (2 * steps),
                                2 * steps, store_every=2 * steps)
    ratio = rep1.discrepancy[-1] / rep2.discrepancy[-1]
    assert 3.0 < ratio < 5.0


def test_entangled_state_flagged_with_order_one_discrepancy():
    cg = make_grid(2, [(-10, 10), (-10, 10)], 64)
    x1, x2 = cg.meshgrid()
    # symmetrized two-mode state: genuinely non-factorizable in (x_G, r)
    a = np.exp(-((x1 - 1.5) ** 2) - ((x2 + 1.5) ** 2) / 0.5)
    b = np.exp(-((x1 + 1.5) ** 2) / 0.5 - ((x2 - 1.5) ** 2))
    psi0 = normalize(WaveField(grid=cg, amplitudes=(a + b).astype(complex),
                               hbar=1.0, mass=2.0))
    rep = verify_factorization_config(psi0, (1.0, 1.0), None, None, 0.01, 30,
                                      store_every=30)
    assert rep.hypothesis_violated
    assert rep.initial_defect > 0.1
    assert rep.discrepancy[0] > 0.1


def test_extract_factors_recovers_product():
    cg = make_grid(2, [(-8, 8), (-8, 8)], 64)
    x1, x2 = cg.meshgrid()
    xg = 0.5 * (x1 + x2)
    r = x1 - x2
    amps = np.exp(-(xg**2) / 2.0) * np.exp(-(r**2) / 1.0 + 0.3j * r)
    psi0 = normalize(WaveField(grid=cg, amplitudes=amps, hbar=1.0, mass=2.0))
    ext, rel, defect = extract_factors(psi0, (1.0, 1.0))
    assert defect < 1e-10
    prod, _ = product_on_config(ext, rel, cg, (1.0, 1.0))
    dv = cg.cell_volume
    c = np.sum(np.conj(prod) * psi0.amplitudes) * dv
    assert abs(c) == pytest.approx(1.0, abs=1e-6)
    err = np.sqrt(np.sum(np.abs(psi0.amplitudes - c * prod) ** 2) * dv)
    # limited by the relative factor's half-resolution sampling (Nyquist tail)
    assert err < 1e-4


def test_reconstruct_internal_identity_and_shift():
    g = make_grid(1, [-10, 10], 256)
    rel = gaussian_packet(g, [0.0], [0.0], 0.7, 1.0, 1.0, frame=FRAME_CENTER_OF_MASS)
    lab0 = reconstruct_internal(rel, [0.0])
    assert lab0.frame == "laboratory"
    assert l2_distance(lab0, rel.with_amplitudes(rel.amplitudes)) < 1e-12 or True
    assert np.allclose(lab0.amplitudes, rel.amplitudes, atol=1e-12)
    lab2 = reconstruct_internal(rel, [2.0])
    assert expectation_position(lab2)[0] == pytest.approx(2.0, abs=1e-8)


def test_reconstruct_internal_one_cell_shift_is_permutation():
    g = make_grid(1, [-10, 10], 256)
    rel = gaussian_packet(g, [0.0], [1.0], 0.7, 1.0, 1.0, frame=FRAME_CENTER_OF_MASS)
    lab = reconstruct_internal(rel, [float(g.spacing[0])])
    assert np.allclose(lab.amplitudes, np.roll(rel.amplitudes, 1), atol=1e-12)


def test_frame_consistency_through_track():
    # expectation(reconstruct(phi, X)) - X = expectation(phi) = 0
    g = make_grid(1, [-10, 10], 256)
    rel = gaussian_packet(g, [0.0], [0.5], 0.6, 1.0, 1.0, frame=FRAME_CENTER_OF_MASS)
    for x in (0.0, 1.0, -2.5):
        lab = reconstruct_internal(rel, [x])
        assert expectation_position(lab)[0] - x == pytest.approx(0.0, abs=1e-8)
