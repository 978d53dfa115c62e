"""Hydrodynamic decomposition psi = sqrt(rho) exp(i S / hbar) and its residuals.

The action S is recovered by unwrapping the phase along the grid graph by
flood fill from the density maximum, keeping nearest-neighbour action jumps
below pi*hbar.  Points with rho below the floor carry no meaningful phase
and are masked invalid; disconnected support components are unwrapped
independently and flagged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import Grid, PolarField, WaveField
from .potentials import PotentialSpec
from .propagate import EvolutionRecord

DEFAULT_RHO_FLOOR_REL = 1e-12


class DisconnectedSupportError(RuntimeError):
    pass


@dataclass(frozen=True)
class VelocityField:
    """grad(S)/m on the validity mask; NaN (and valid=False) elsewhere."""

    grid: Grid
    values: np.ndarray  # shape (*grid.shape, dim)
    valid: np.ndarray
    disconnected: bool = False


def _neighbor_shifts(dim: int):
    for a in range(dim):
        for s in (1, -1):
            yield a, s


def _erode(mask: np.ndarray) -> np.ndarray:
    out = mask.copy()
    for a, s in _neighbor_shifts(mask.ndim):
        out &= np.roll(mask, s, axis=a)
    return out


def _wrap_to_pi(d: np.ndarray) -> np.ndarray:
    return (d + np.pi) % (2.0 * np.pi) - np.pi


def _unwrap_components(phase: np.ndarray, rho: np.ndarray, valid: np.ndarray):
    """Flood-fill unwrap; returns (unwrapped, component labels, n_components)."""
    unwrapped = np.full(phase.shape, np.nan)
    component = np.zeros(phase.shape, dtype=np.int32)
    assigned = np.zeros(phase.shape, dtype=bool)
    ncomp = 0
    while True:
        remaining = valid & ~assigned
        if not remaining.any():
            break
        ncomp += 1
        seed = np.unravel_index(np.argmax(np.where(remaining, rho, -1.0)), rho.shape)
        unwrapped[seed] = phase[seed]
        assigned[seed] = True
        component[seed] = ncomp
        frontier = True
        while frontier:
            new = np.zeros_like(assigned)
            for a, s in _neighbor_shifts(phase.ndim):
                nb_assigned = np.roll(assigned, s, axis=a)
                take = valid & ~assigned & ~new & nb_assigned
                if not take.any():
                    continue
                nb_val = np.roll(unwrapped, s, axis=a)
                nb_phase = np.roll(phase, s, axis=a)
                vals = nb_val + _wrap_to_pi(phase - nb_phase)
                unwrapped[take] = vals[take]
                component[take] = np.roll(component, s, axis=a)[take]
                new |= take
            assigned |= new
            frontier = bool(new.any())
    return unwrapped, component, ncomp


def to_polar(field: WaveField, rho_floor: float | None = None) -> PolarField:
    """Decompose a wave field into density and unwrapped action.

    ``rho_floor`` defaults to 1e-12 * max(rho).  The action is hbar times
    the unwrapped phase, defined only where rho >= floor.
    """
    rho = np.abs(field.amplitudes) ** 2
    if rho_floor is None:
        rho_floor = DEFAULT_RHO_FLOOR_REL * float(rho.max())
    valid = rho >= rho_floor
    if not valid.any():
        raise ValueError("field has no support above the density floor")
    phase = np.angle(field.amplitudes)
    unwrapped, component, ncomp = _unwrap_components(phase, rho, valid)
    action = field.hbar * unwrapped
    return PolarField(
        grid=field.grid,
        rho=rho,
        action=np.where(valid, action, np.nan),
        hbar=field.hbar,
        mass=field.mass,
        valid=valid,
        component=component,
        disconnected=ncomp > 1,
    )


def polar_to_field(polar: PolarField, frame: str = "laboratory") -> WaveField:
    """Rebuild sqrt(rho) exp(i S / hbar); invalid points get zero phase."""
    s = np.where(polar.valid, polar.action, 0.0)
    amps = np.sqrt(polar.rho) * np.exp(1j * s / polar.hbar)
    return WaveField(grid=polar.grid, amplitudes=amps, hbar=polar.hbar, mass=polar.mass, frame=frame)


def _central_gradient(f: np.ndarray, grid: Grid):
    """Second-order centered gradient with periodic wrap, per axis."""
    out = []
    for a in range(grid.dim):
        d = float(grid.spacing[a])
        out.append((np.roll(f, -1, axis=a) - np.roll(f, 1, axis=a)) / (2.0 * d))
    return out


def _central_laplacian(f: np.ndarray, grid: Grid) -> np.ndarray:
    lap = np.zeros_like(f)
    for a in range(grid.dim):
        d = float(grid.spacing[a])
        lap += (np.roll(f, -1, axis=a) - 2.0 * f + np.roll(f, 1, axis=a)) / d**2
    return lap


def quantum_potential(field: WaveField, rho_floor: float | None = None) -> np.ndarray:
    """-(hbar^2 / 2m) Laplacian(sqrt(rho)) / sqrt(rho); NaN off-support."""
    rho = np.abs(field.amplitudes) ** 2
    if rho_floor is None:
        rho_floor = DEFAULT_RHO_FLOOR_REL * float(rho.max())
    valid = _erode(rho >= rho_floor)
    a = np.sqrt(rho)
    lap = _central_laplacian(a, field.grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = -(field.hbar**2 / (2.0 * field.mass)) * lap / a
    return np.where(valid, q, np.nan)


def velocity_field(polar: PolarField) -> VelocityField:
    """grad(S)/m with centered stencils; the mask shrinks by one ring."""
    mask = _erode(polar.valid)
    s = np.where(polar.valid, polar.action, 0.0)
    grads = _central_gradient(s, polar.grid)
    vals = np.stack([g / polar.mass for g in grads], axis=-1)
    vals[~mask] = np.nan
    return VelocityField(grid=polar.grid, values=vals, valid=mask, disconnected=polar.disconnected)


def align_actions(polars: list[PolarField]) -> list[np.ndarray]:
    """Action arrays with 2 pi hbar multiples chosen for temporal continuity.

    Independent unwraps fix each snapshot's action only up to 2 pi hbar; for
    time derivatives consecutive snapshots must share that choice.  Assumes
    the physical action drift between snapshots stays below pi hbar at the
    overlap median.
    """
    if not polars:
        return []
    out = [np.where(polars[0].valid, polars[0].action, np.nan)]
    hbar = polars[0].hbar
    for k in range(1, len(polars)):
        cur = np.where(polars[k].valid, polars[k].action, np.nan)
        both = polars[k].valid & polars[k - 1].valid
        if both.any():
            med = np.median(cur[both] - out[k - 1][both])
            cur = cur - 2.0 * np.pi * hbar * np.round(med / (2.0 * np.pi * hbar))
        out.append(cur)
    return out


@dataclass
class ResidualReport:
    """Residual norms of the hydrodynamic equations at interior stored times."""

    times: np.ndarray
    r1: np.ndarray         # action equation: dS/dt + |grad S|^2/2m + V + Q
    r2: np.ndarray         # continuity: drho/dt + div(rho grad S / m)
    n_r1: np.ndarray
    n_r2: np.ndarray


def madelung_residuals(record: EvolutionRecord, potential: PotentialSpec,
                       rho_floor: float | None = None) -> ResidualReport:
    """Check stored snapshots against the hydrodynamic form of the dynamics.

    Uses centered differences in time (uniform snapshot spacing required)
    and space; masks shrink accordingly.  Norms are density-weighted RMS
    over the mask: the stencils are ill-conditioned on the exponential
    tail near the mask rim, and the rho weight keeps the norm controlled
    by the region where the state actually lives (a uniform offset still
    reports as itself, e.g. a V+1 mismatch gives r1 ~ 1).
    """
    if len(record.times) < 3:
        raise ValueError("need at least 3 stored snapshots for centered time derivatives")
    dts = np.diff(record.times)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=0.0):
        raise ValueError("stored times must be uniformly spaced")
    dt = float(dts[0])
    grid = record.grid
    m = record.mass
    v_grid = potential.evaluate(grid)

    polars = [to_polar(s, rho_floor) for s in record.snapshots]
    actions = align_actions(polars)
    rhos = [p.rho for p in polars]
    valids = [p.valid for p in polars]
    qs = [quantum_potential(s, rho_floor) for s in record.snapshots]

    times, r1s, r2s, n1s, n2s = [], [], [], [], []
    for k in range(1, len(polars) - 1):
        joint = valids[k - 1] & valids[k] & valids[k + 1]
        mask1 = _erode(joint)
        mask2 = _erode(mask1)

        ds_dt = (actions[k + 1] - actions[k - 1]) / (2.0 * dt)
        s_k = np.where(valids[k], actions[k], 0.0)
        grads = _central_gradient(s_k, grid)
        grad_sq = sum(g**2 for g in grads)
        r1 = ds_dt + grad_sq / (2.0 * m) + v_grid + qs[k]

        drho_dt = (rhos[k + 1] - rhos[k - 1]) / (2.0 * dt)
        flux = [rhos[k] * g / m for g in grads]
        div = np.zeros_like(drho_dt)
        for a in range(grid.dim):
            d = float(grid.spacing[a])
            fa = np.where(mask1, flux[a], 0.0)
            div += (np.roll(fa, -1, axis=a) - np.roll(fa, 1, axis=a)) / (2.0 * d)
        r2 = drho_dt + div

        times.append(record.times[k])
        w1 = rhos[k][mask1]
        w2 = rhos[k][mask2]
        r1s.append(float(np.sqrt(np.sum(w1 * r1[mask1] ** 2) / np.sum(w1))))
        r2s.append(float(np.sqrt(np.sum(w2 * r2[mask2] ** 2) / np.sum(w2))))
        n1s.append(int(mask1.sum()))
        n2s.append(int(mask2.sum()))
    return ResidualReport(
        times=np.asarray(times), r1=np.asarray(r1s), r2=np.asarray(r2s),
        n_r1=np.asarray(n1s), n_r2=np.asarray(n2s),
    )
