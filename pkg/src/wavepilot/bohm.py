"""Pilot-wave trajectory integration and ensemble statistics.

Trajectories follow dX/dt = grad(S)/m evaluated on the evolving field's
velocity field, with bilinear interpolation in space and linear
interpolation in time between stored snapshots, advanced by classical RK4.
Ensembles are drawn from the initial density with a counter-based
(Philox) generator so runs are reproducible and scheduling-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import DomainError, Grid
from .madelung import VelocityField, to_polar, velocity_field
from .propagate import EvolutionRecord

KIND_DBB = "dBB"
KIND_NEWTON = "Newton"


@dataclass
class Trajectory:
    times: np.ndarray
    positions: np.ndarray   # (nt, dim)
    velocities: np.ndarray  # (nt, dim)
    kind: str
    x0: np.ndarray
    exited: bool = False
    exit_index: int | None = None  # first stored index with frozen position


@dataclass
class Ensemble:
    trajectories: list
    master_seed: int
    rho0: np.ndarray


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def sample_initial(rho0: np.ndarray, grid: Grid, count: int, seed: int) -> np.ndarray:
    """Draw positions from a gridded density by inverse-CDF sampling.

    1D uses the piecewise-linear CDF of the cell masses; 2D samples the
    first axis from its marginal and the second from the conditional of
    the landing cell.  Fixed seed gives identical output.
    """
    if count <= 0:
        raise ValueError(f"count must be positive, got {count}")
    rho0 = np.asarray(rho0, float)
    if rho0.shape != grid.shape:
        raise ValueError("rho0 shape does not match grid")
    rng = make_rng(seed)
    u = rng.random((count, grid.dim))
    if grid.dim == 1:
        x, _ = _invert_axis(rho0, grid, 0, u[:, 0])
        return x[:, None]
    marg = rho0.sum(axis=1) * float(grid.spacing[1])
    x, ix = _invert_axis(marg, grid, 0, u[:, 0])
    y = np.empty(count)
    # conditional inversion per occupied column
    for i in np.unique(ix):
        sel = ix == i
        y[sel], _ = _invert_axis(rho0[i, :], grid, 1, u[sel, 1])
    return np.stack([x, y], axis=1)


def _invert_axis(dens: np.ndarray, grid: Grid, axis: int, u: np.ndarray):
    # grid values are cell centers: cell k spans [x_k - d/2, x_k + d/2)
    d = float(grid.spacing[axis])
    w = np.clip(dens, 0.0, None) * d
    cdf = np.concatenate([[0.0], np.cumsum(w)])
    total = cdf[-1]
    if total <= 0:
        raise ValueError("density has no mass along the requested axis")
    cdf /= total
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(w)) - 1
    idx = np.clip(idx, 0, len(w) - 1)
    seg = cdf[idx + 1] - cdf[idx]
    frac = np.where(seg > 0, (u - cdf[idx]) / np.where(seg > 0, seg, 1.0), 0.0)
    lo = float(grid.lower[axis])
    return lo + (idx + frac - 0.5) * d, idx


def _interp(vf_values: np.ndarray, valid: np.ndarray, grid: Grid, pts: np.ndarray):
    """Bilinear sample of a velocity field at pts (n, dim) with validity."""
    n = pts.shape[0]
    dim = grid.dim
    idx0 = []
    frac = []
    for a in range(dim):
        u = (pts[:, a] - float(grid.lower[a])) / float(grid.spacing[a])
        i0 = np.floor(u).astype(int)
        frac.append(u - i0)
        idx0.append(i0)
    out = np.zeros((n, dim))
    ok = np.ones(n, dtype=bool)
    npa = [int(x) for x in grid.npoints]
    if dim == 1:
        i0 = idx0[0] % npa[0]
        i1 = (idx0[0] + 1) % npa[0]
        inside = (idx0[0] >= 0) & (idx0[0] < npa[0])
        ok &= inside & valid[i0] & valid[i1]
        w = frac[0][:, None]
        out = (1 - w) * vf_values[i0] + w * vf_values[i1]
    else:
        i0 = idx0[0] % npa[0]
        i1 = (idx0[0] + 1) % npa[0]
        j0 = idx0[1] % npa[1]
        j1 = (idx0[1] + 1) % npa[1]
        inside = (idx0[0] >= 0) & (idx0[0] < npa[0]) & (idx0[1] >= 0) & (idx0[1] < npa[1])
        ok &= inside & valid[i0, j0] & valid[i1, j0] & valid[i0, j1] & valid[i1, j1]
        fx = frac[0][:, None]
        fy = frac[1][:, None]
        out = ((1 - fx) * (1 - fy) * vf_values[i0, j0] + fx * (1 - fy) * vf_values[i1, j0]
               + (1 - fx) * fy * vf_values[i0, j1] + fx * fy * vf_values[i1, j1])
    out[~ok] = 0.0
    return out, ok


def velocity_series(record: EvolutionRecord, rho_floor: float | None = None) -> list[VelocityField]:
    """Velocity field of every stored snapshot (shared by all trajectories)."""
    return [velocity_field(to_polar(s, rho_floor)) for s in record.snapshots]


def integrate_ensemble(record: EvolutionRecord, x0s: np.ndarray, substeps: int = 4,
                       velocities: list[VelocityField] | None = None,
                       rho_floor: float | None = None) -> list[Trajectory]:
    """RK4 pilot-wave integration of many initial points through one record.

    All trajectories share the stored time mesh; a trajectory whose RK4
    stage leaves the velocity validity mask is frozen and flagged exited.
    """
    x0s = np.atleast_2d(np.asarray(x0s, float))
    grid = record.grid
    if x0s.shape[1] != grid.dim:
        raise ValueError("initial points must match the grid dimension")
    if velocities is None:
        velocities = velocity_series(record, rho_floor)
    rho0 = np.abs(record.snapshots[0].amplitudes) ** 2
    floor = rho_floor if rho_floor is not None else 1e-12 * float(rho0.max())
    _, ok0 = _interp(velocities[0].values, velocities[0].valid, grid, x0s)
    dens0, _ = _interp(rho0[..., None], np.ones(grid.shape, bool), grid, x0s)
    if not np.all(ok0 & (dens0[:, 0] > floor)):
        bad = np.where(~(ok0 & (dens0[:, 0] > floor)))[0]
        raise DomainError(f"initial points off the support of rho0: indices {bad.tolist()}")

    nt = len(record.times)
    npts = x0s.shape[0]
    pos = np.empty((nt, npts, grid.dim))
    vel = np.zeros((nt, npts, grid.dim))
    pos[0] = x0s
    active = np.ones(npts, dtype=bool)
    exit_idx = np.full(npts, nt, dtype=int)
    vel[0], _ = _interp(velocities[0].values, velocities[0].valid, grid, x0s)

    for k in range(nt - 1):
        t0, t1 = record.times[k], record.times[k + 1]
        h = (t1 - t0) / substeps
        va, vb = velocities[k], velocities[k + 1]
        x = pos[k].copy()
        for s in range(substeps):
            th = (s * h) / (t1 - t0)
            th_half = ((s + 0.5) * h) / (t1 - t0)
            th_full = ((s + 1.0) * h) / (t1 - t0)

            def v_at(p, theta):
                v0, ok0_ = _interp(va.values, va.valid, grid, p)
                v1, ok1_ = _interp(vb.values, vb.valid, grid, p)
                return (1 - theta) * v0 + theta * v1, ok0_ & ok1_

            k1, ok1 = v_at(x, th)
            k2, ok2 = v_at(x + 0.5 * h * k1, th_half)
            k3, ok3 = v_at(x + 0.5 * h * k2, th_half)
            k4, ok4 = v_at(x + h * k3, th_full)
            ok = ok1 & ok2 & ok3 & ok4 & active
            newly_out = active & ~ok
            if newly_out.any():
                exit_idx[newly_out] = k + 1
                active &= ~newly_out
            x[active] = x[active] + (h / 6.0) * (
                k1[active] + 2 * k2[active] + 2 * k3[active] + k4[active]
            )
        pos[k + 1] = np.where(active[:, None], x, pos[k])
        v_end, _ = _interp(vb.values, vb.valid, grid, pos[k + 1])
        vel[k + 1] = np.where(active[:, None], v_end, 0.0)

    out = []
    for i in range(npts):
        out.append(Trajectory(
            times=record.times.copy(),
            positions=pos[:, i].copy(),
            velocities=vel[:, i].copy(),
            kind=KIND_DBB,
            x0=x0s[i].copy(),
            exited=exit_idx[i] < nt,
            exit_index=int(exit_idx[i]) if exit_idx[i] < nt else None,
        ))
    return out


def integrate_dbb(record: EvolutionRecord, x0, substeps: int = 4,
                  velocities: list[VelocityField] | None = None,
                  rho_floor: float | None = None) -> Trajectory:
    """Single pilot-wave trajectory from x0 through a stored record."""
    x0 = np.atleast_1d(np.asarray(x0, float))
    return integrate_ensemble(record, x0[None, :], substeps, velocities, rho_floor)[0]


def sample_ensemble(record: EvolutionRecord, count: int, seed: int, substeps: int = 4,
                    rho_floor: float | None = None) -> Ensemble:
    """Draw from |psi_0|^2 and integrate everything through the record."""
    rho0 = np.abs(record.snapshots[0].amplitudes) ** 2
    rho0 = rho0 / (rho0.sum() * record.grid.cell_volume)
    x0s = sample_initial(rho0, record.grid, count, seed)
    trajs = integrate_ensemble(record, x0s, substeps, rho_floor=rho_floor)
    return Ensemble(trajectories=trajs, master_seed=seed, rho0=rho0)


def ks_distance(samples: np.ndarray, dens1d: np.ndarray, grid: Grid, axis: int) -> float:
    """Kolmogorov distance between samples and a gridded 1D density.

    Density values are taken as cell averages centered on the grid points.
    """
    samples = np.sort(np.asarray(samples, float))
    n = samples.size
    if n == 0:
        return 1.0
    d = float(grid.spacing[axis])
    w = np.clip(dens1d, 0.0, None) * d
    cdf = np.concatenate([[0.0], np.cumsum(w)])
    cdf /= cdf[-1]
    u = (samples - float(grid.lower[axis])) / d + 0.5
    i0 = np.clip(np.floor(u).astype(int), 0, len(w) - 1)
    frac = np.clip(u - i0, 0.0, 1.0)
    f_at = cdf[i0] + frac * (cdf[i0 + 1] - cdf[i0])
    up = np.max(np.arange(1, n + 1) / n - f_at)
    dn = np.max(f_at - np.arange(0, n) / n)
    return float(max(up, dn))


def equivariance_check(record: EvolutionRecord, ensemble: Ensemble):
    """KS distance per axis between trajectory positions and |psi_t|^2 marginals.

    Exited trajectories stop contributing from their exit index on.  Returns
    (ks, n_active): ks has shape (n_times, dim).
    """
    trajs = ensemble.trajectories
    if not trajs:
        raise ValueError("empty ensemble")
    nt = len(record.times)
    for tr in trajs:
        if tr.times.shape != record.times.shape or not np.allclose(tr.times, record.times):
            raise ValueError("ensemble and record time meshes differ")
    grid = record.grid
    dv_other = [float(np.prod(np.delete(grid.spacing, a))) if grid.dim > 1 else 1.0
                for a in range(grid.dim)]
    pos = np.stack([tr.positions for tr in trajs], axis=1)  # (nt, n, dim)
    exit_idx = np.array([tr.exit_index if tr.exit_index is not None else nt for tr in trajs])
    ks = np.ones((nt, grid.dim))
    n_active = np.zeros(nt, dtype=int)
    for k in range(nt):
        act = exit_idx > k
        n_active[k] = int(act.sum())
        if n_active[k] == 0:
            continue
        rho = np.abs(record.snapshots[k].amplitudes) ** 2
        rho = rho / (rho.sum() * grid.cell_volume)
        for a in range(grid.dim):
            if grid.dim == 1:
                marg = rho
            else:
                marg = rho.sum(axis=1 - a) * dv_other[a]
            ks[k, a] = ks_distance(pos[k, act, a], marg, grid, a)
    return ks, n_active
