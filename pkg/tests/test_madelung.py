import numpy as np
import pytest

from wavepilot.coherent import (
    CoherentParams,
    classical_oscillator,
    coherent_field,
    coherent_record,
)
from wavepilot.grids import WaveField, gaussian_packet, make_grid, normalize
from wavepilot.madelung import (
    madelung_residuals,
    polar_to_field,
    quantum_potential,
    to_polar,
    velocity_field,
)
from wavepilot.potentials import PotentialSpec
from wavepilot.propagate import EvolutionRecord, split_step_evolve

from oracles import free_gaussian_field


def test_plane_phase_gaussian_velocity():
    g = make_grid(1, [-12, 12], 512)
    f = gaussian_packet(g, [0.0], [3.0], 1.0, 1.0, 1.0)
    polar = to_polar(f)
    vf = velocity_field(polar)
    assert np.allclose(vf.values[vf.valid], 3.0, atol=1e-8)


def test_real_positive_field_has_constant_action():
    g = make_grid(1, [-12, 12], 256)
    f = gaussian_packet(g, [0.0], [0.0], 1.0, 1.0, 1.0)
    polar = to_polar(f)
    acts = polar.action[polar.valid]
    assert np.max(np.abs(acts - acts[0])) < 1e-12
    vf = velocity_field(polar)
    assert np.allclose(vf.values[vf.valid], 0.0, atol=1e-12)


def test_coherent_action_affine_with_classical_slope():
    p = CoherentParams(mass=1.0, omega=1.0, x0=[1.0, 0.0], v0=[0.0, 0.7], hbar=1.0)
    g = make_grid(2, [(-8, 8), (-8, 8)], 128)
    t = 0.9
    f = coherent_field(p, t, g)
    polar = to_polar(f)
    _, vt = classical_oscillator(p, t)
    xx, yy = g.meshgrid()
    expected = p.mass * (vt[0] * xx + vt[1] * yy)
    d = (polar.action - expected)[polar.valid]
    # equal up to the spatial constant -g(t)
    assert np.max(np.abs(d - np.median(d))) < 1e-7
    vf = velocity_field(polar)
    for a in range(2):
        vals = vf.values[..., a][vf.valid]
        assert np.allclose(vals, vt[a], atol=1e-7)


def test_round_trip_reproduces_field_on_support():
    g = make_grid(1, [-12, 12], 512)
    f = gaussian_packet(g, [0.5], [2.0], 0.8, 1.0, 1.0)
    polar = to_polar(f)
    back = polar_to_field(polar)
    mask = polar.valid
    err = np.sqrt(np.sum(np.abs(back.amplitudes - f.amplitudes)[mask] ** 2)
                  * g.cell_volume)
    assert err < 1e-12


def test_global_phase_shifts_action_by_constant():
    g = make_grid(1, [-12, 12], 256)
    f = gaussian_packet(g, [0.0], [1.0], 1.0, 1.0, 1.0)
    polar0 = to_polar(f)
    shifted = f.with_amplitudes(f.amplitudes * np.exp(1j * 0.7))
    polar1 = to_polar(shifted)
    d = (polar1.action - polar0.action)[polar0.valid & polar1.valid]
    assert np.max(np.abs(d - d[0])) < 1e-10
    v0 = velocity_field(polar0)
    v1 = velocity_field(polar1)
    m = v0.valid & v1.valid
    assert np.allclose(v0.values[m], v1.values[m], atol=1e-10)


def test_disconnected_support_flagged_with_components():
    g = make_grid(1, [-16, 16], 512)
    f1 = gaussian_packet(g, [-8.0], [0.0], 0.4, 1.0, 1.0)
    f2 = gaussian_packet(g, [8.0], [0.0], 0.4, 1.0, 1.0)
    mix = normalize(f1.with_amplitudes(f1.amplitudes + f2.amplitudes))
    polar = to_polar(mix, rho_floor=1e-6)
    assert polar.disconnected
    assert polar.component[polar.valid].max() >= 2


def test_quantum_potential_gaussian_formula():
    # Q(x) = (hbar^2 / 2m) (1/(2 sigma^2) - (x-x0)^2/(4 sigma^4)); at the
    # center it equals hbar^2 / (4 m sigma^2)
    g = make_grid(1, [-12, 12], 1024)
    sigma, hbar, m = 0.9, 1.3, 0.7
    f = gaussian_packet(g, [0.0], [0.0], sigma, hbar, m)
    q = quantum_potential(f)
    xs = g.axis(0)
    formula = (hbar**2 / (2 * m)) * (1.0 / (2 * sigma**2) - xs**2 / (4 * sigma**4))
    bulk = np.abs(xs) < 3 * sigma
    assert np.allclose(q[bulk], formula[bulk], atol=5e-4)
    i0 = np.argmin(np.abs(xs))
    assert q[i0] == pytest.approx(hbar**2 / (4 * m * sigma**2), rel=1e-4)


def test_quantum_potential_uniform_density_zero():
    g = make_grid(1, [-10, 10], 128)
    amps = np.full(g.shape, (20.0) ** -0.5, dtype=complex)
    f = WaveField(grid=g, amplitudes=amps, hbar=1.0, mass=1.0)
    q = quantum_potential(f)
    assert np.allclose(q[np.isfinite(q)], 0.0, atol=1e-12)


def test_quantum_potential_coherent_matches_width_formula():
    p = CoherentParams(mass=1.0, omega=2.0, x0=[0.5, 0.0], v0=[0.0, 0.0], hbar=1.0)
    g = make_grid(2, [(-6, 6), (-6, 6)], 128)
    f = coherent_field(p, 0.3, g)
    q = quantum_potential(f)
    sig = p.sigma
    xt, _ = classical_oscillator(p, 0.3)
    xx, yy = g.meshgrid()
    r2 = (xx - xt[0]) ** 2 + (yy - xt[1]) ** 2
    formula = (p.hbar**2 / (2 * p.mass)) * (1.0 / sig**2 - r2 / (4 * sig**4))
    bulk = r2 < (2 * sig) ** 2
    # centered-stencil bias grows with |x|/sigma; stay within O(dx^2) of it
    assert np.allclose(q[bulk], formula[bulk], atol=2e-2)


def test_residuals_analytic_record_refine_4x():
    p = CoherentParams(mass=1.0, omega=1.0, x0=[1.0, 0.0], v0=[0.0, 0.5], hbar=1.0)
    pot = PotentialSpec.harmonic(1.0, 1.0)
    r1s, r2s = [], []
    for n in (64, 128):
        g = make_grid(2, [(-8, 8), (-8, 8)], n)
        rec = coherent_record(p, g, np.linspace(0.4, 0.42, 5))
        rr = madelung_residuals(rec, pot)
        r1s.append(rr.r1[1])
        r2s.append(rr.r2[1])
    assert 3.0 < r1s[0] / r1s[1] < 5.0
    assert 3.0 < r2s[0] / r2s[1] < 5.0


def test_residuals_numerical_free_gaussian_refine_4x():
    r1s, r2s = [], []
    for n in (256, 512):
        g = make_grid(1, [-20, 20], n)
        f = gaussian_packet(g, [0.0], [0.0], 1.0, 1.0, 1.0)
        rec = split_step_evolve(f, PotentialSpec.free(), dt=1e-3, steps=500,
                                store_every=1, diag_every=500)
        sub = EvolutionRecord(times=rec.times[-3:], snapshots=rec.snapshots[-3:],
                              diag_times=rec.diag_times, norm=rec.norm,
                              energy=rec.energy, x_mean=rec.x_mean,
                              boundary_mass=rec.boundary_mass)
        rr = madelung_residuals(sub, PotentialSpec.free())
        r1s.append(rr.r1[0])
        r2s.append(rr.r2[0])
    assert 3.0 < r1s[0] / r1s[1] < 5.0
    assert 3.0 < r2s[0] / r2s[1] < 5.0


def test_residuals_detect_potential_mismatch():
    p = CoherentParams(mass=1.0, omega=1.0, x0=[1.0, 0.0], v0=[0.0, 0.5], hbar=1.0)
    g = make_grid(2, [(-8, 8), (-8, 8)], 64)
    rec = coherent_record(p, g, np.linspace(0.4, 0.42, 5))
    pot = PotentialSpec.harmonic(1.0, 1.0)
    off = PotentialSpec.tabulated(pot.evaluate(g) + 1.0)
    rr = madelung_residuals(rec, off)
    assert rr.r1[1] == pytest.approx(1.0, abs=0.05)


def test_residuals_need_three_uniform_times():
    p = CoherentParams(mass=1.0, omega=1.0, x0=[1.0, 0.0], v0=[0.0, 0.5], hbar=1.0)
    g = make_grid(2, [(-8, 8), (-8, 8)], 64)
    pot = PotentialSpec.harmonic(1.0, 1.0)
    rec = coherent_record(p, g, [0.0, 0.01])
    with pytest.raises(ValueError):
        madelung_residuals(rec, pot)
    rec = coherent_record(p, g, [0.0, 0.01, 0.05])
    with pytest.raises(ValueError):
        madelung_residuals(rec, pot)


def test_velocity_of_moving_free_gaussian_matches_oracle():
    # velocity field of the spreading packet: v(x,t) = v0 + (x - c(t)) s'(t)/s(t)
    g = make_grid(1, [-20, 20], 1024)
    hbar = m = 1.0
    sigma0, v0, t = 1.0, 0.5, 1.5
    f = free_gaussian_field(g, t, [0.0], [v0], sigma0, hbar, m)
    vf = velocity_field(to_polar(f))
    xs = g.axis(0)
    tau = hbar * t / (2 * m * sigma0**2)
    st2 = sigma0**2 * (1 + tau**2)
    dsdt_over_s = (hbar / (2 * m * sigma0**2)) * tau / (1 + tau**2) * 2 * 0.5  # d ln s/dt
    # d/dt sigma(t)^2 = sigma0^2 * 2 tau * taudot -> v = v0 + (x - v0 t) * (sdot/s)
    sdot_over_s = tau * (hbar / (2 * m * sigma0**2)) / (1 + tau**2)
    expected = v0 + (xs - v0 * t) * sdot_over_s
    bulk = np.abs(xs - v0 * t) < 4.0
    vals = vf.values[:, 0]
    assert np.allclose(vals[bulk], expected[bulk], atol=1e-6)
