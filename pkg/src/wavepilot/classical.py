"""Classical Hamilton-Jacobi side: extremal actions, min-plus propagation,
Newton trajectories, density transport along characteristics, and the
hbar-sweep comparison against the quantum evolution.

The action field is built Lax-Oleinik style: S(x,t) = min over x0 of
S0(x0) + S_EL(x0; x, t), with the extremal-path kernel S_EL in closed form
for free/linear/harmonic potentials and by discretized-path minimization
otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bohm import KIND_NEWTON, Trajectory, _interp, integrate_dbb
from .grids import Grid, gaussian_packet
from .madelung import _central_gradient, to_polar
from .potentials import (
    CLOSED_FORM_KINDS,
    KIND_FREE,
    KIND_HARMONIC,
    KIND_LINEAR,
    PotentialSpec,
)
from .propagate import split_step_evolve


class FocalPointError(RuntimeError):
    """Extremal path is not a minimizer (conjugate point reached)."""


class PreparationError(ValueError):
    """Scenario initial data is not hbar-independent."""


# -- extremal action kernel -------------------------------------------------

def euler_lagrange_action(x0, x, t: float, potential: PotentialSpec, mass: float,
                          segments: int = 64) -> float:
    """Classical action of the minimizing path from (x0, 0) to (x, t).

    Closed forms for free/linear/harmonic kinds; every other kind goes
    through ``minimize_path_action`` with ``segments`` pieces.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    x0 = np.atleast_1d(np.asarray(x0, float))
    x = np.atleast_1d(np.asarray(x, float))
    if potential.kind in CLOSED_FORM_KINDS:
        return float(_closed_form_kernel(x0, x, t, potential, mass))
    return minimize_path_action(x0, x, t, potential, mass, segments=segments)[0]


def _closed_form_kernel(x0, x, t, potential: PotentialSpec, mass: float):
    """Vectorized kernel; x0 and x broadcast along leading axes, last axis = dim."""
    if potential.kind == KIND_FREE:
        return mass * np.sum((x - x0) ** 2, axis=-1) / (2.0 * t)
    if potential.kind == KIND_LINEAR:
        c = potential.slope
        straight = mass * np.sum((x - x0) ** 2, axis=-1) / (2.0 * t)
        return straight - 0.5 * t * np.sum(c * (x + x0), axis=-1) - np.sum(c * c) * t**3 / (24.0 * mass)
    # harmonic, per axis
    k = potential.curvature
    if k.size == 1 and x.shape[-1] != 1:
        k = np.repeat(k, x.shape[-1])
    total = 0.0
    for a in range(x.shape[-1]):
        w = np.sqrt(k[a] / mass)
        if w * t >= np.pi:
            raise FocalPointError(
                f"harmonic kernel beyond the focal point: omega*t = {w * t:.4f} >= pi"
            )
        if w == 0.0:
            total = total + mass * (x[..., a] - x0[..., a]) ** 2 / (2.0 * t)
            continue
        s, c = np.sin(w * t), np.cos(w * t)
        total = total + (mass * w / (2.0 * s)) * (
            (x0[..., a] ** 2 + x[..., a] ** 2) * c - 2.0 * x0[..., a] * x[..., a]
        )
    return total


def _potential_value_points(potential: PotentialSpec, pts: np.ndarray, grid: Grid | None):
    """V at path nodes; tabulated kinds interpolate on their grid."""
    if potential.kind in CLOSED_FORM_KINDS or potential.kind == "barrier":
        if potential.kind == "barrier":
            return _barrier_value(potential, pts)
        return potential.value(pts)
    if potential.kind == "tabulated":
        if grid is None:
            raise ValueError("tabulated potential needs its grid for off-grid evaluation")
        vals, ok = _interp(potential.table[..., None], np.ones(grid.shape, bool), grid, pts)
        if not ok.all():
            raise ValueError("path node outside the tabulated domain")
        return vals[:, 0]
    raise ValueError(f"cannot evaluate potential kind {potential.kind} on a path")


def _barrier_value(potential: PotentialSpec, pts: np.ndarray):
    s = potential.smoothing if potential.smoothing > 0 else 1e-2
    x = pts[..., 0]
    lo = potential.wall_center - 0.5 * potential.wall_thickness
    hi = potential.wall_center + 0.5 * potential.wall_thickness
    wall = 0.5 * (np.tanh((x - lo) / s) - np.tanh((x - hi) / s))
    if pts.shape[-1] == 1 or not potential.slit_centers:
        return potential.wall_height * wall
    y = pts[..., 1]
    open_frac = np.zeros_like(y)
    for c, w in zip(potential.slit_centers, potential.slit_widths):
        open_frac += 0.5 * (np.tanh((y - (c - w / 2)) / s) - np.tanh((y - (c + w / 2)) / s))
    return potential.wall_height * wall * (1.0 - np.clip(open_frac, 0.0, 1.0))


def minimize_path_action(x0, x, t: float, potential: PotentialSpec, mass: float,
                         segments: int = 64, sweeps_per_level: int = 200,
                         tol: float = 1e-13, grid: Grid | None = None,
                         richardson: bool = False):
    """Discretized-path minimization of the classical action.

    Piecewise-linear paths with ``segments`` pieces; interior nodes relaxed
    by per-coordinate descent (exact updates for quadratic kinds, a Newton
    step otherwise), cascading from a coarse path so only local error
    remains at the finest level.  Returns (action, nodes).  With
    ``richardson`` the value is extrapolated from the ``segments`` and
    ``2*segments`` solutions, removing the leading O(1/K^2) bias.
    """
    x0 = np.atleast_1d(np.asarray(x0, float))
    x = np.atleast_1d(np.asarray(x, float))
    if richardson:
        s1, nodes = minimize_path_action(x0, x, t, potential, mass, segments,
                                         sweeps_per_level, tol, grid, False)
        s2, _ = minimize_path_action(x0, x, t, potential, mass, 2 * segments,
                                     sweeps_per_level, tol, grid, False)
        return (4.0 * s2 - s1) / 3.0, nodes

    k_levels = [4]
    while k_levels[-1] < segments:
        k_levels.append(min(2 * k_levels[-1], segments))
    nodes = np.linspace(0.0, 1.0, k_levels[0] + 1)[:, None] * (x - x0) + x0
    for K in k_levels:
        if nodes.shape[0] != K + 1:
            fine = np.empty((K + 1, x.size))
            fine[0::2] = nodes
            fine[1::2] = 0.5 * (nodes[:-1] + nodes[1:])
            nodes = fine
        ds = t / K
        nodes = _relax_path(nodes, ds, potential, mass, grid, sweeps_per_level, tol)
    kin = mass * np.sum((nodes[1:] - nodes[:-1]) ** 2) / (2.0 * ds)
    v = _potential_value_points(potential, nodes, grid)
    pot = ds * (0.5 * v[0] + float(v[1:-1].sum()) + 0.5 * v[-1])
    return float(kin - pot), nodes


def _relax_path(nodes: np.ndarray, ds: float, potential: PotentialSpec, mass: float,
                grid: Grid | None, max_sweeps: int, tol: float) -> np.ndarray:
    n_int = nodes.shape[0] - 2
    if n_int <= 0:
        return nodes
    scale = max(1.0, float(np.max(np.abs(nodes))))
    quadratic = potential.kind in CLOSED_FORM_KINDS
    # optimal over-relaxation for the discrete chain; plain updates otherwise
    omega = 2.0 / (1.0 + np.sin(np.pi / (n_int + 1))) if quadratic else 1.0
    sweeps = max(max_sweeps, 12 * (n_int + 1)) if quadratic else max_sweeps
    for _ in range(sweeps):
        biggest = 0.0
        for parity in (1, 0):
            idx = np.arange(1 + parity, n_int + 1, 2)
            if idx.size == 0:
                continue
            a = nodes[idx - 1]
            b = nodes[idx + 1]
            q = nodes[idx]
            if potential.kind == KIND_FREE:
                new = 0.5 * (a + b)
            elif potential.kind == KIND_LINEAR:
                new = 0.5 * (a + b) + potential.slope * ds**2 / (2.0 * mass)
            elif potential.kind == KIND_HARMONIC:
                k = potential.curvature
                if k.size == 1 and nodes.shape[1] != 1:
                    k = np.repeat(k, nodes.shape[1])
                denom = 2.0 * mass - k * ds**2
                if np.any(denom <= 0):
                    raise FocalPointError("path relaxation lost convexity (refine segments)")
                new = mass * (a + b) / denom
            else:
                new = q - _path_newton_step(q, a, b, ds, potential, mass, grid)
            new = q + omega * (new - q)
            biggest = max(biggest, float(np.max(np.abs(new - q))))
            nodes[idx] = new
        if biggest < tol * scale:
            break
    return nodes


def _path_newton_step(q, a, b, ds, potential, mass, grid):
    """One damped Newton step of the per-node stationarity equation."""
    h = 1e-6 * max(1.0, float(np.max(np.abs(q))))
    step = np.zeros_like(q)
    for axis in range(q.shape[1]):
        qp = q.copy()
        qm = q.copy()
        qp[:, axis] += h
        qm[:, axis] -= h
        vp = _potential_value_points(potential, qp, grid)
        vm = _potential_value_points(potential, qm, grid)
        v0 = _potential_value_points(potential, q, grid)
        dv = (vp - vm) / (2.0 * h)
        d2v = (vp - 2.0 * v0 + vm) / h**2
        grad = mass * (2.0 * q[:, axis] - a[:, axis] - b[:, axis]) / ds - ds * dv
        curv = np.maximum(2.0 * mass / ds - ds * d2v, 0.5 * mass / ds)
        step[:, axis] = grad / curv
    return step


# -- min-plus action on a grid ----------------------------------------------

@dataclass
class HJSolution:
    """Classical action (and optionally density) fields at stored times."""

    grid: Grid
    times: np.ndarray
    actions: list            # S(x, t_k) arrays
    argmins: list            # minimizing x0 per grid point, shape (*shape, dim)
    mass: float
    densities: list = field(default_factory=list)


def minplus_action(s0_grid: np.ndarray, t: float, potential: PotentialSpec, mass: float,
                   grid: Grid, segments: int = 64):
    """Exact discrete min over grid sources plus one quadratic refinement.

    Returns (S(x, t), argmin_x0).  Ties break toward the smallest source
    point in lexicographic order (argmin picks the first minimum).
    """
    s0_grid = np.asarray(s0_grid, float)
    if s0_grid.shape != grid.shape:
        raise ValueError("S0 shape does not match grid")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0.0:
        mesh = np.stack(grid.meshgrid(), axis=-1)
        return s0_grid.copy(), mesh
    if grid.dim == 1:
        return _minplus_1d(s0_grid, t, potential, mass, grid, segments)
    return _minplus_2d(s0_grid, t, potential, mass, grid, segments)


def _kernel_matrix(x0_pts: np.ndarray, x_pts: np.ndarray, t, potential, mass, grid, segments):
    """S_EL for every (x, x0) pair; closed-form kinds vectorized."""
    if potential.kind in CLOSED_FORM_KINDS:
        return _closed_form_kernel(x0_pts[None, :, :], x_pts[:, None, :], t, potential, mass)
    out = np.empty((x_pts.shape[0], x0_pts.shape[0]))
    for j in range(x0_pts.shape[0]):
        for i in range(x_pts.shape[0]):
            out[i, j] = minimize_path_action(x0_pts[j], x_pts[i], t, potential, mass,
                                             segments=segments, grid=grid)[0]
    return out


def _refine_quadratic(f_m, f_0, f_p, x_m, x_0, x_p):
    """Vertex of the parabola through three samples; falls back to center."""
    denom = f_m - 2.0 * f_0 + f_p
    good = denom > 0
    delta = np.where(good, 0.5 * (f_m - f_p) / np.where(good, denom, 1.0), 0.0)
    delta = np.clip(delta, -1.0, 1.0)
    val = np.where(good, f_0 - 0.125 * (f_m - f_p) ** 2 / np.where(good, denom, 1.0), f_0)
    pos = x_0 + delta * (x_p - x_0)
    return val, pos


def _minplus_1d(s0_grid, t, potential, mass, grid, segments):
    xs = grid.axis(0)
    pts = xs[:, None]
    kernel = _kernel_matrix(pts, pts, t, potential, mass, grid, segments)
    total = kernel + s0_grid[None, :]
    j_star = np.argmin(total, axis=1)
    n = xs.size
    interior = (j_star > 0) & (j_star < n - 1)
    rows = np.arange(n)
    f0 = total[rows, j_star]
    val = f0.copy()
    arg = xs[j_star].astype(float)
    jm = np.clip(j_star - 1, 0, n - 1)
    jp = np.clip(j_star + 1, 0, n - 1)
    fm = total[rows, jm]
    fp = total[rows, jp]
    v_ref, x_ref = _refine_quadratic(fm, f0, fp, xs[jm], xs[j_star], xs[jp])
    val[interior] = v_ref[interior]
    arg[interior] = x_ref[interior]
    return val, arg[:, None]


def _minplus_2d(s0_grid, t, potential, mass, grid, segments):
    mesh = grid.meshgrid()
    src = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    s0_flat = s0_grid.reshape(-1)
    nx, ny = grid.shape
    val = np.empty((nx, ny))
    arg = np.empty((nx, ny, 2))
    xs, ys = grid.axes()
    for i in range(nx):
        row_pts = np.stack([np.full(ny, xs[i]), ys], axis=-1)
        kernel = _kernel_matrix(src, row_pts, t, potential, mass, grid, segments)
        total = kernel + s0_flat[None, :]
        j_star = np.argmin(total, axis=1)
        rows = np.arange(ny)
        f0 = total[rows, j_star]
        val[i] = f0
        arg[i] = src[j_star]
        # independent per-axis parabola corrections around the discrete argmin
        ji, jj = np.unravel_index(j_star, (nx, ny))
        for axis, (jidx, coord, n_ax, step) in enumerate(
            [(ji, xs, nx, ny), (jj, ys, ny, 1)]
        ):
            interior = (jidx > 0) & (jidx < n_ax - 1)
            if not interior.any():
                continue
            fm = total[rows, np.clip(j_star - step, 0, total.shape[1] - 1)]
            fp = total[rows, np.clip(j_star + step, 0, total.shape[1] - 1)]
            v_ref, c_ref = _refine_quadratic(
                fm, f0, fp,
                coord[np.clip(jidx - 1, 0, n_ax - 1)], coord[jidx],
                coord[np.clip(jidx + 1, 0, n_ax - 1)],
            )
            val[i][interior] += (v_ref - f0)[interior]
            arg[i][interior, axis] = c_ref[interior]
    return val, arg


def solve_hj(s0_grid: np.ndarray, grid: Grid, times, potential: PotentialSpec,
             mass: float, segments: int = 64) -> HJSolution:
    """Min-plus action fields at each requested time (from the t=0 data)."""
    times = np.asarray(times, float)
    actions, argmins = [], []
    for t in times:
        s, a = minplus_action(s0_grid, float(t), potential, mass, grid, segments)
        actions.append(s)
        argmins.append(a)
    return HJSolution(grid=grid, times=times, actions=actions, argmins=argmins, mass=mass)


# -- Newton trajectories ------------------------------------------------------

def newton_trajectory(x0, v0, potential: PotentialSpec, mass: float, t_span, dt: float) -> Trajectory:
    """Classical RK4 integration of m x'' = -grad V."""
    x0 = np.atleast_1d(np.asarray(x0, float))
    v0 = np.atleast_1d(np.asarray(v0, float))
    t0, t1 = float(t_span[0]), float(t_span[1])
    nsteps = max(1, int(round((t1 - t0) / dt)))
    h = (t1 - t0) / nsteps
    times = t0 + h * np.arange(nsteps + 1)
    pos = np.empty((nsteps + 1, x0.size))
    vel = np.empty((nsteps + 1, x0.size))
    pos[0], vel[0] = x0, v0

    def acc(x):
        return -potential.gradient(x) / mass

    x, v = x0.copy(), v0.copy()
    for k in range(nsteps):
        k1x, k1v = v, acc(x)
        k2x, k2v = v + 0.5 * h * k1v, acc(x + 0.5 * h * k1x)
        k3x, k3v = v + 0.5 * h * k2v, acc(x + 0.5 * h * k2x)
        k4x, k4v = v + h * k3v, acc(x + h * k3x)
        x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        pos[k + 1], vel[k + 1] = x, v
    return Trajectory(times=times, positions=pos, velocities=vel, kind=KIND_NEWTON, x0=x0)


# -- density transport --------------------------------------------------------

@dataclass
class TransportResult:
    times: np.ndarray
    densities: list
    mass_errors: np.ndarray
    caustic: bool


def transport_density(hj: HJSolution, rho0: np.ndarray, substeps: int = 8) -> TransportResult:
    """Push rho0 along dX/dt = grad(S)/m and re-deposit on the grid.

    Characteristics start at every grid point weighted by the local mass;
    deposition uses linear (cloud-in-cell) weights, which conserves mass
    exactly while every characteristic stays inside the box.  A caustic
    (characteristic crossing, 1D order inversion) is reported, not fatal.
    """
    grid = hj.grid
    rho0 = np.asarray(rho0, float)
    if rho0.shape != grid.shape:
        raise ValueError("rho0 shape does not match grid")
    mesh = grid.meshgrid()
    pts = np.stack([m.reshape(-1) for m in mesh], axis=-1).astype(float)
    weights = rho0.reshape(-1) * grid.cell_volume
    total0 = weights.sum()

    vel_fields = []
    for s in hj.actions:
        grads = _central_gradient(np.asarray(s, float), grid)
        vel_fields.append(np.stack([g / hj.mass for g in grads], axis=-1))
    ones = np.ones(grid.shape, bool)

    times = hj.times
    densities = [rho0.copy()]
    mass_errors = [0.0]
    caustic = False
    x = pts.copy()
    # crossing detection only among characteristics that carry mass;
    # weightless ones sit in regions where the action is edge-distorted
    massive = weights > 1e-12 * weights.max()
    order0 = np.argsort(x[massive, 0], kind="stable") if grid.dim == 1 else None
    for k in range(len(times) - 1):
        t0, t1 = times[k], times[k + 1]
        h = (t1 - t0) / substeps
        for s in range(substeps):
            th = (s * h) / (t1 - t0)
            th_h = ((s + 0.5) * h) / (t1 - t0)
            th_f = ((s + 1.0) * h) / (t1 - t0)

            def v_at(p, theta):
                v0, _ = _interp(vel_fields[k], ones, grid, p)
                v1, _ = _interp(vel_fields[k + 1], ones, grid, p)
                return (1 - theta) * v0 + theta * v1

            k1 = v_at(x, th)
            k2 = v_at(x + 0.5 * h * k1, th_h)
            k3 = v_at(x + 0.5 * h * k2, th_h)
            k4 = v_at(x + h * k3, th_f)
            x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if grid.dim == 1 and not caustic:
            xo = x[massive, 0][order0]
            if np.any(np.diff(xo) < 0):
                caustic = True
        dens, lost = _deposit_cic(x, weights, grid)
        densities.append(dens)
        mass_errors.append(abs(dens.sum() * grid.cell_volume - total0) / total0)
    return TransportResult(times=times, densities=densities,
                           mass_errors=np.asarray(mass_errors), caustic=caustic)


def _deposit_cic(pts: np.ndarray, weights: np.ndarray, grid: Grid):
    """Linear-weight deposition onto the periodic grid; returns (density, lost)."""
    shape = grid.shape
    dens = np.zeros(shape)
    idx0 = []
    frac = []
    inside = np.ones(pts.shape[0], bool)
    for a in range(grid.dim):
        u = (pts[:, a] - float(grid.lower[a])) / float(grid.spacing[a])
        i0 = np.floor(u).astype(int)
        inside &= (i0 >= 0) & (i0 <= shape[a] - 1)
        idx0.append(i0)
        frac.append(u - i0)
    w = weights[inside]
    if grid.dim == 1:
        i0 = idx0[0][inside]
        f = frac[0][inside]
        n = shape[0]
        np.add.at(dens, i0 % n, w * (1 - f))
        np.add.at(dens, (i0 + 1) % n, w * f)
    else:
        i0 = idx0[0][inside]
        j0 = idx0[1][inside]
        fx = frac[0][inside]
        fy = frac[1][inside]
        nx, ny = shape
        np.add.at(dens, (i0 % nx, j0 % ny), w * (1 - fx) * (1 - fy))
        np.add.at(dens, ((i0 + 1) % nx, j0 % ny), w * fx * (1 - fy))
        np.add.at(dens, (i0 % nx, (j0 + 1) % ny), w * (1 - fx) * fy)
        np.add.at(dens, ((i0 + 1) % nx, (j0 + 1) % ny), w * fx * fy)
    lost = pts.shape[0] - int(inside.sum())
    return dens / grid.cell_volume, lost


# -- hbar sweep ---------------------------------------------------------------

@dataclass(frozen=True)
class SweepScenario:
    """Prepared initial data (density and action independent of hbar).

    rho0 is a Gaussian at ``x0_center`` with width ``sigma0``; the initial
    action is S0 = m v0 . x, i.e. a uniform launch velocity.
    """

    grid: Grid
    mass: float
    potential: PotentialSpec
    x0_center: np.ndarray
    sigma0: float
    v0: np.ndarray
    target_time: float
    traj_x0: np.ndarray
    dt: float
    store_every: int = 10
    hbar_dependent_preparation: bool = False

    def __post_init__(self):
        for name in ("x0_center", "v0", "traj_x0"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), float)))


@dataclass
class ConvergenceReport:
    hbars: np.ndarray
    action_sup_diff: np.ndarray
    density_w1: np.ndarray
    traj_sup_dev: np.ndarray
    verdicts: dict


def w1_distance_1d(rho_a: np.ndarray, rho_b: np.ndarray, grid: Grid) -> float:
    """Wasserstein-1 distance between two gridded 1D densities."""
    d = float(grid.spacing[0])
    fa = np.cumsum(rho_a) * d
    fb = np.cumsum(rho_b) * d
    fa /= fa[-1]
    fb /= fb[-1]
    return float(np.sum(np.abs(fa - fb)) * d)


def hbar_sweep(scenario: SweepScenario, hbars) -> ConvergenceReport:
    """Quantum-vs-classical discrepancy metrics across a decreasing hbar list.

    For each hbar: evolve the packet, extract (rho, S), and compare at the
    target time with the min-plus action field, the transported classical
    density, and the Newton trajectory from matched initial data.
    """
    if scenario.hbar_dependent_preparation:
        raise PreparationError("initial rho0/S0 must not depend on hbar")
    hbars = np.asarray(hbars, float)
    if hbars.ndim != 1 or hbars.size < 1:
        raise ValueError("need a nonempty hbar list")
    if hbars.size > 1 and not np.all(np.diff(hbars) < 0):
        raise ValueError("hbar list must be strictly decreasing")
    grid = scenario.grid
    if grid.dim != 1:
        raise ValueError("hbar sweeps run on 1D scenarios")
    m = scenario.mass
    xs = grid.axis(0)

    # classical side, computed once
    s0_grid = m * scenario.v0[0] * xs
    steps = int(round(scenario.target_time / scenario.dt))
    stored = np.arange(0, steps + 1, scenario.store_every) * scenario.dt
    if not np.isclose(stored[-1], scenario.target_time):
        stored = np.append(stored, scenario.target_time)
    hj = solve_hj(s0_grid, grid, stored[1:], scenario.potential, m)
    hj_full = HJSolution(grid=grid, times=stored,
                         actions=[s0_grid] + hj.actions,
                         argmins=[np.stack(grid.meshgrid(), axis=-1)] + hj.argmins,
                         mass=m)
    rho0 = np.exp(-((xs - scenario.x0_center[0]) ** 2) / (2 * scenario.sigma0**2))
    rho0 /= rho0.sum() * grid.cell_volume
    transported = transport_density(hj_full, rho0)
    newton = newton_trajectory(scenario.traj_x0, scenario.v0, scenario.potential, m,
                               (0.0, scenario.target_time), scenario.dt)

    sup_s, w1s, sup_traj = [], [], []
    for hb in hbars:
        psi0 = gaussian_packet(grid, scenario.x0_center, scenario.v0, scenario.sigma0,
                               float(hb), m)
        rec = split_step_evolve(psi0, scenario.potential, scenario.dt, steps,
                                store_every=scenario.store_every, diag_every=max(1, steps // 10))
        polar = to_polar(rec.snapshots[-1])

        region = polar.rho > 0.01 * polar.rho.max()
        dS = polar.action - hj_full.actions[-1]
        dS = dS[region & polar.valid]
        sup_s.append(float(np.max(np.abs(dS - np.median(dS)))))

        w1s.append(w1_distance_1d(polar.rho, transported.densities[-1], grid))

        traj = integrate_dbb(rec, scenario.traj_x0, substeps=4)
        newt_pos = np.stack([np.interp(rec.times, newton.times, newton.positions[:, a])
                             for a in range(grid.dim)], axis=-1)
        sup_traj.append(float(np.max(np.abs(traj.positions - newt_pos))))

    def verdict(values):
        if len(values) < 2:
            return "insufficient"
        return "decreasing" if bool(np.all(np.diff(values) < 0)) else "not-decreasing"

    return ConvergenceReport(
        hbars=hbars,
        action_sup_diff=np.asarray(sup_s),
        density_w1=np.asarray(w1s),
        traj_sup_dev=np.asarray(sup_traj),
        verdicts={
            "action_sup_diff": verdict(sup_s),
            "density_w1": verdict(w1s),
            "traj_sup_dev": verdict(sup_traj),
        },
    )
