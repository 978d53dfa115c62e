import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavepilot import dswf
from wavepilot.grids import (
    ConfigurationError,
    DomainError,
    NormalizationError,
    WaveField,
    boundary_mass,
    density,
    expectation_position,
    gaussian_packet,
    l2_distance,
    make_grid,
    normalize,
    position_variance,
    shift_field,
)


def test_make_grid_1d_spacing():
    g = make_grid(1, [-10, 10], 256)
    assert g.spacing[0] == 20.0 / 256
    assert g.spacing[0] == 0.078125


def test_make_grid_2d_spacing():
    g = make_grid(2, [(-5, 5), (-5, 5)], [128, 128])
    assert np.allclose(g.spacing, 10.0 / 128)
    assert g.shape == (128, 128)


def test_make_grid_rejects_non_power_of_two():
    with pytest.raises(ConfigurationError):
        make_grid(1, [-10, 10], 100)


def test_make_grid_rejects_degenerate_bounds():
    with pytest.raises(ConfigurationError):
        make_grid(1, [10, 10], 64)


def test_make_grid_rejects_tiny_point_count():
    with pytest.raises(ConfigurationError):
        make_grid(1, [-1, 1], 8)


def test_gaussian_peak_density():
    g = make_grid(1, [-10, 10], 256)
    f = gaussian_packet(g, [0.0], [0.0], 1.0, hbar=1.0, mass=1.0)
    # |psi|^2 at the center of a sigma=1 packet is (2 pi)^(-1/2)
    i0 = np.argmin(np.abs(g.axis(0)))
    assert density(f)[i0] == pytest.approx((2 * np.pi) ** -0.5, rel=1e-10)


def test_gaussian_width_convention_matches_oscillator_ground_width():
    # sigma = sqrt(hbar / 2 m omega) -> 1/sqrt(2) for hbar=m=omega=1
    sigma = np.sqrt(1.0 / (2.0 * 1.0 * 1.0))
    assert sigma == pytest.approx(0.70710678, rel=1e-7)
    g = make_grid(2, [(-6, 6), (-6, 6)], 64)
    f = gaussian_packet(g, [0, 0], [0, 0], np.sqrt(1.0 / (2 * 1 * 2)), 1.0, 1.0)
    # hbar=1, m=1, omega=2 -> sigma = 0.5
    assert np.sqrt(position_variance(f)[0]) == pytest.approx(0.5, rel=1e-6)


def test_gaussian_construction_identities():
    g = make_grid(1, [-10, 10], 512)
    f = gaussian_packet(g, [2.0], [3.0], 0.5, hbar=1.0, mass=1.0)
    assert expectation_position(f)[0] == pytest.approx(2.0, abs=1e-8)
    # phase gradient / m = v0 on the bulk support
    phase = np.unwrap(np.angle(f.amplitudes))
    xs = g.axis(0)
    bulk = np.abs(xs - 2.0) < 1.0
    grad = np.gradient(phase, xs)
    assert np.allclose(grad[bulk], 3.0, atol=1e-6)


def test_gaussian_margin_violation():
    g = make_grid(1, [-10, 10], 256)
    with pytest.raises(DomainError):
        gaussian_packet(g, [8.0], [0.0], 1.0, 1.0, 1.0)


def test_expectation_position_symmetric():
    g = make_grid(1, [-10, 10], 256)
    f = gaussian_packet(g, [1.5], [0.0], 1.0, 1.0, 1.0)
    assert expectation_position(f)[0] == pytest.approx(1.5, abs=1e-8)


def test_expectation_position_center_of_mass_frame_zero():
    g = make_grid(1, [-10, 10], 256)
    f = gaussian_packet(g, [0.0], [0.0], 1.0, 1.0, 0.5, frame="center-of-mass")
    assert abs(expectation_position(f)[0]) < 1e-10


def test_expectation_two_bump_mean():
    g = make_grid(1, [-12, 12], 512)
    f1 = gaussian_packet(g, [-1.0], [0.0], 0.5, 1.0, 1.0)
    f2 = gaussian_packet(g, [3.0], [0.0], 0.5, 1.0, 1.0)
    mix = normalize(f1.with_amplitudes(f1.amplitudes + f2.amplitudes))
    assert expectation_position(mix)[0] == pytest.approx(1.0, abs=1e-7)


def test_expectation_rejects_unnormalized():
    g = make_grid(1, [-10, 10], 256)
    f = gaussian_packet(g, [0.0], [0.0], 1.0, 1.0, 1.0)
    with pytest.raises(NormalizationError):
        expectation_position(f.with_amplitudes(2.0 * f.amplitudes))


def test_l2_distance_identity_and_scaling():
    g = make_grid(1, [-10, 10], 256)
    f = gaussian_packet(g, [0.0], [1.0], 1.0, 1.0, 1.0)
    assert l2_distance(f, f) == 0.0
    doubled = f.with_amplitudes(2.0 * f.amplitudes)
    renorm = normalize(doubled)
    assert l2_distance(renorm, f) < 1e-14
    assert abs(renorm.norm_sq - 1.0) < 1e-12


def test_density_integrates_to_one():
    g = make_grid(2, [(-8, 8), (-8, 8)], 64)
    f = gaussian_packet(g, [0, 0], [0, 0], 1.0, 1.0, 1.0)
    assert np.sum(density(f)) * g.cell_volume == pytest.approx(1.0, abs=1e-12)


def test_variance_matches_sigma():
    # >= 8 points per sigma: variance within 0.1%
    g = make_grid(1, [-10, 10], 256)
    for sigma in (0.7, 1.0, 1.5):
        f = gaussian_packet(g, [0.0], [0.0], sigma, 1.0, 1.0)
        assert position_variance(f)[0] == pytest.approx(sigma**2, rel=1e-3)


def test_expectation_translation_equivariance():
    g = make_grid(1, [-10, 10], 256)
    f = gaussian_packet(g, [0.0], [0.5], 1.0, 1.0, 1.0)
    rolled = f.with_amplitudes(np.roll(f.amplitudes, 1))
    before = expectation_position(f)[0]
    after = expectation_position(rolled)[0]
    assert after - before == pytest.approx(g.spacing[0], abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=2**16), min_size=3, max_size=3))
def test_l2_triangle_inequality(seeds):
    g = make_grid(1, [-5, 5], 32)
    fields = []
    for s in seeds:
        rng = np.random.default_rng(s)
        amps = rng.normal(size=32) + 1j * rng.normal(size=32)
        fields.append(WaveField(grid=g, amplitudes=amps, hbar=1.0, mass=1.0))
    a, b, c = fields
    assert l2_distance(a, c) <= l2_distance(a, b) + l2_distance(b, c) + 1e-12


def test_boundary_mass_small_for_margined_packet():
    g = make_grid(1, [-10, 10], 256)
    f = gaussian_packet(g, [0.0], [0.0], 1.0, 1.0, 1.0)
    assert boundary_mass(f) < 1e-16


def test_shift_field_one_cell_is_index_roll():
    g = make_grid(1, [-10, 10], 256)
    f = gaussian_packet(g, [0.0], [0.0], 1.0, 1.0, 1.0)
    shifted = shift_field(f, [g.spacing[0]])
    assert np.allclose(shifted.amplitudes, np.roll(f.amplitudes, 1), atol=1e-12)


def test_dswf_round_trip_exact():
    g = make_grid(2, [(-8, 8), (-4, 4)], [64, 32])
    f = gaussian_packet(g, [0.5, -0.25], [1.0, 0.0], 0.7, hbar=0.5, mass=2.0,
                        frame="center-of-mass")
    blob = dswf.dump_wave(f)
    back = dswf.load_wave(blob)
    assert back.grid == f.grid
    assert back.hbar == f.hbar and back.mass == f.mass and back.frame == f.frame
    assert np.array_equal(back.amplitudes, f.amplitudes)


def test_dswf_magic_guard():
    g = make_grid(1, [-10, 10], 64)
    f = gaussian_packet(g, [0.0], [0.0], 1.0, 1.0, 1.0)
    blob = bytearray(dswf.dump_wave(f))
    blob[:4] = b"XXXX"
    with pytest.raises(dswf.FormatError):
        dswf.load_wave(bytes(blob))


def test_dsrf_real_round_trip():
    g = make_grid(1, [-10, 10], 64)
    vals = np.linspace(0, 1, 64)
    blob = dswf.dump_real(vals, g, hbar=1.0, mass=3.0)
    back, grid, hbar, mass, frame = dswf.load_real(blob)
    assert grid == g and hbar == 1.0 and mass == 3.0
    assert np.array_equal(back, vals)
