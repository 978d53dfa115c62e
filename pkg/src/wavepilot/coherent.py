"""Closed-form coherent states of the 2D isotropic harmonic oscillator.

These are the non-spreading Gaussian solutions whose center rides the
classical orbit; width sigma = sqrt(hbar / 2 m omega).  Everything here is
analytic and serves as ground truth for the numerical modules: the
evolving field, its polar (density/action) form, and the narrowing of the
density as hbar is lowered at fixed initial data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import (
    DomainError,
    Grid,
    PolarField,
    WaveField,
    position_variance,
)
from .propagate import EvolutionRecord


@dataclass(frozen=True)
class CoherentParams:
    mass: float
    omega: float
    x0: np.ndarray
    v0: np.ndarray
    hbar: float

    def __post_init__(self):
        if min(self.mass, self.omega, self.hbar) <= 0:
            raise ValueError("mass, omega and hbar must be positive")
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, float)))
        object.__setattr__(self, "v0", np.atleast_1d(np.asarray(self.v0, float)))
        if self.x0.shape != (2,) or self.v0.shape != (2,):
            raise ValueError("coherent states are 2D: x0 and v0 must be 2-vectors")

    @property
    def sigma(self) -> float:
        """Packet width sqrt(hbar / 2 m omega); derived, never stored."""
        return float(np.sqrt(self.hbar / (2.0 * self.mass * self.omega)))

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega


def classical_oscillator(params: CoherentParams, t):
    """Classical center position and velocity at time t (t may be an array)."""
    w = params.omega
    t = np.asarray(t, float)
    c, s = np.cos(w * t), np.sin(w * t)
    x = params.x0 * c[..., None] + (params.v0 / w) * s[..., None]
    v = -params.x0 * w * s[..., None] + params.v0 * c[..., None]
    return x, v


def g_phase(params: CoherentParams, t: float) -> float:
    """Accumulated phase integral of (hbar w + m v^2/2 - m w^2 x^2/2) along the orbit.

    Closed form: the oscillator Lagrangian integrates to
    (m/2)[(v0^2 - w^2 x0^2) sin(2wt)/(2w) - x0.v0 (1 - cos(2wt))].
    """
    w = params.omega
    m = params.mass
    v2 = float(params.v0 @ params.v0)
    x2 = float(params.x0 @ params.x0)
    xv = float(params.x0 @ params.v0)
    lagr = 0.5 * m * ((v2 - w**2 * x2) * np.sin(2 * w * t) / (2 * w) - xv * (1.0 - np.cos(2 * w * t)))
    return float(params.hbar * w * t + lagr)


def g_phase_classical_limit(params: CoherentParams, t: float) -> float:
    """Same integral without the hbar w drift (the hbar -> 0 limit)."""
    return g_phase(params, t) - params.hbar * params.omega * t


def _check_orbit_margin(params: CoherentParams, grid: Grid, t: float) -> None:
    # entire orbit must keep 5 sigma to each boundary; the orbit is an
    # ellipse with per-axis extent sqrt(x0_a^2 + (v0_a/w)^2)
    w = params.omega
    ext = np.sqrt(params.x0**2 + (params.v0 / w) ** 2)
    margin = 5.0 * params.sigma
    if np.any(-ext - margin < grid.lower) or np.any(ext + margin > grid.upper):
        raise DomainError(
            f"classical orbit extent {ext} + 5 sigma margin exceeds grid bounds at t={t:g}"
        )


def coherent_field(params: CoherentParams, t: float, grid: Grid) -> WaveField:
    """The evolving coherent state sampled on a 2D grid."""
    if grid.dim != 2:
        raise ValueError("coherent states are 2D")
    _check_orbit_margin(params, grid, t)
    xt, vt = classical_oscillator(params, t)
    sig = params.sigma
    xx, yy = grid.meshgrid()
    r2 = (xx - xt[0]) ** 2 + (yy - xt[1]) ** 2
    phase = (params.mass * (vt[0] * xx + vt[1] * yy) - g_phase(params, t)) / params.hbar
    amps = (2.0 * np.pi * sig**2) ** (-0.5) * np.exp(-r2 / (4.0 * sig**2) + 1j * phase)
    return WaveField(grid=grid, amplitudes=amps, hbar=params.hbar, mass=params.mass)


def coherent_polar(params: CoherentParams, t: float, grid: Grid) -> PolarField:
    """Density and action of the coherent state; the action is affine in x."""
    if grid.dim != 2:
        raise ValueError("coherent states are 2D")
    _check_orbit_margin(params, grid, t)
    xt, vt = classical_oscillator(params, t)
    sig = params.sigma
    xx, yy = grid.meshgrid()
    r2 = (xx - xt[0]) ** 2 + (yy - xt[1]) ** 2
    rho = (2.0 * np.pi * sig**2) ** (-1.0) * np.exp(-r2 / (2.0 * sig**2))
    action = params.mass * (vt[0] * xx + vt[1] * yy) - g_phase(params, t)
    return PolarField(grid=grid, rho=rho, action=action, hbar=params.hbar, mass=params.mass)


def coherent_record(params: CoherentParams, grid: Grid, times) -> EvolutionRecord:
    """Analytic EvolutionRecord (closed-form snapshots at the given times)."""
    times = np.asarray(times, float)
    snaps = [coherent_field(params, float(t), grid) for t in times]
    e = oscillator_energy(params)
    xs = np.array([classical_oscillator(params, float(t))[0] for t in times])
    return EvolutionRecord(
        times=times,
        snapshots=snaps,
        diag_times=times,
        norm=np.array([s.norm_sq for s in snaps]),
        energy=np.full(times.shape, e),
        x_mean=xs,
        boundary_mass=np.zeros(times.shape),
    )


def oscillator_energy(params: CoherentParams) -> float:
    """Mean energy: hbar w (zero point, 2D) + classical orbit energy."""
    m, w = params.mass, params.omega
    return float(
        params.hbar * w
        + 0.5 * m * (params.v0 @ params.v0)
        + 0.5 * m * w**2 * (params.x0 @ params.x0)
    )


@dataclass
class DeltaConvergenceReport:
    """Width and action offsets of coherent states across an hbar list."""

    hbars: np.ndarray
    variance: np.ndarray          # (n_hbar, 2) measured density variance per axis
    expected_variance: np.ndarray  # hbar / (2 m omega)
    action_sup_diff: np.ndarray   # sup |S^hbar - S_limit| on the sampling grid
    variance_slope: float | None  # linear fit of mean variance vs hbar


def delta_convergence_check(base: CoherentParams, hbars, t: float, grid: Grid) -> DeltaConvergenceReport:
    """Measure the point-concentration trend of the density as hbar drops.

    For each hbar the coherent state keeps the same (m, omega, x0, v0); the
    density variance per axis should equal hbar/(2 m omega) and the action
    should differ from its hbar -> 0 limit by exactly hbar*omega*t.
    """
    hbars = np.asarray(hbars, float)
    if hbars.ndim != 1 or hbars.size < 1:
        raise ValueError("need a nonempty 1D hbar list")
    if hbars.size > 1 and not np.all(np.diff(hbars) < 0):
        raise ValueError("hbar list must be strictly decreasing")
    xx, yy = grid.meshgrid()
    variances = []
    sup_diffs = []
    for hb in hbars:
        p = CoherentParams(mass=base.mass, omega=base.omega, x0=base.x0, v0=base.v0, hbar=float(hb))
        f = coherent_field(p, t, grid)
        variances.append(position_variance(f))
        pol = coherent_polar(p, t, grid)
        _, vt = classical_oscillator(p, t)
        limit = p.mass * (vt[0] * xx + vt[1] * yy) - g_phase_classical_limit(p, t)
        sup_diffs.append(float(np.max(np.abs(pol.action - limit))))
    variances = np.asarray(variances)
    expected = hbars / (2.0 * base.mass * base.omega)
    slope = None
    if hbars.size >= 2:
        mean_var = variances.mean(axis=1)
        slope = float(np.polyfit(hbars, mean_var, 1)[0])
    return DeltaConvergenceReport(
        hbars=hbars,
        variance=variances,
        expected_variance=expected,
        action_sup_diff=np.asarray(sup_diffs),
        variance_slope=slope,
    )
