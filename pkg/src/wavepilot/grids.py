"""Regular periodic grids and the wave/polar field containers built on them.

All fields live on uniform 1D or 2D grids with periodic topology (the
spectral propagator assumes it).  Integrals are midpoint Riemann sums,
which on a periodic uniform grid are spectrally accurate for smooth
compact fields.  Fields are immutable snapshots: every operation returns
a new object.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

FRAME_LABORATORY = "laboratory"
FRAME_CENTER_OF_MASS = "center-of-mass"
_FRAMES = (FRAME_LABORATORY, FRAME_CENTER_OF_MASS)

# amplitude must stay below this within 3 cells of each boundary for a
# scenario to be trustworthy on the periodic grid
BOUNDARY_AMP_TOL = 1e-8


class ConfigurationError(ValueError):
    """Bad grid or field construction parameters."""


class DomainError(ValueError):
    """Operation leaves or violates the spatial domain."""


class NormalizationError(ValueError):
    """Field norm is outside the tolerated window for the operation."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform periodic grid over a box, 1 or 2 axes.

    ``npoints`` per axis must be a power of two (>= 16) so the FFT-based
    operators behave uniformly.  ``spacing = (upper-lower)/npoints``; the
    point ``upper`` itself is excluded (it aliases to ``lower``).
    """

    dim: int
    lower: np.ndarray
    upper: np.ndarray
    npoints: np.ndarray

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
            and np.array_equal(self.npoints, other.npoints)
        )

    @property
    def spacing(self) -> np.ndarray:
        return (self.upper - self.lower) / self.npoints

    @property
    def shape(self) -> tuple:
        return tuple(int(n) for n in self.npoints)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis(self, a: int) -> np.ndarray:
        n = int(self.npoints[a])
        return self.lower[a] + self.spacing[a] * np.arange(n)

    def axes(self) -> list[np.ndarray]:
        return [self.axis(a) for a in range(self.dim)]

    def meshgrid(self) -> list[np.ndarray]:
        return list(np.meshgrid(*self.axes(), indexing="ij"))

    def wavenumbers(self) -> list[np.ndarray]:
        """Angular wavenumbers per axis, FFT ordering."""
        return [
            2.0 * np.pi * np.fft.fftfreq(int(n), d=float(d))
            for n, d in zip(self.npoints, self.spacing)
        ]

    def contains(self, x: np.ndarray) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return bool(np.all(x >= self.lower) and np.all(x < self.upper))


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def make_grid(dim, bounds, points) -> Grid:
    """Build a Grid from per-axis ``(lo, hi)`` bounds and point counts.

    ``bounds`` may be a single pair in 1D or a sequence of pairs; ``points``
    a single int or one int per axis.  Points must be powers of two >= 16.
    """
    if dim not in (1, 2):
        raise ConfigurationError(f"dim must be 1 or 2, got {dim}")
    b = np.asarray(bounds, dtype=float)
    if b.ndim == 1:
        b = b[None, :]
    if b.shape != (dim, 2):
        raise ConfigurationError(f"expected {dim} (lo, hi) bound pairs, got shape {b.shape}")
    p = np.atleast_1d(np.asarray(points, dtype=int))
    if p.size == 1:
        p = np.repeat(p, dim)
    if p.shape != (dim,):
        raise ConfigurationError(f"expected {dim} point counts, got {p}")
    for a in range(dim):
        if not (b[a, 0] < b[a, 1]):
            raise ConfigurationError(f"axis {a}: degenerate bounds {b[a]}")
        if not _is_power_of_two(int(p[a])) or p[a] < 16:
            raise ConfigurationError(f"axis {a}: points must be a power of two >= 16, got {p[a]}")
    return Grid(dim=dim, lower=_freeze(b[:, 0]), upper=_freeze(b[:, 1]), npoints=_freeze(p))


@dataclass(frozen=True)
class WaveField:
    """Complex amplitudes on a Grid plus the physical constants they carry."""

    grid: Grid
    amplitudes: np.ndarray
    hbar: float
    mass: float
    frame: str = FRAME_LABORATORY

    def __post_init__(self):
        if self.frame not in _FRAMES:
            raise ConfigurationError(f"unknown frame tag {self.frame!r}")
        if self.amplitudes.shape != self.grid.shape:
            raise ConfigurationError(
                f"amplitude shape {self.amplitudes.shape} != grid shape {self.grid.shape}"
            )
        object.__setattr__(self, "amplitudes", _freeze(self.amplitudes.astype(np.complex128)))

    @property
    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.cell_volume)

    def with_amplitudes(self, amps: np.ndarray) -> "WaveField":
        return replace(self, amplitudes=amps)


@dataclass(frozen=True)
class PolarField:
    """Madelung variables: density rho and phase-unwrapped action S.

    ``valid`` marks points where rho was above the unwrap floor; ``component``
    labels the connected support component each valid point belongs to
    (0 outside).  ``disconnected`` is set when more than one component
    exists, in which case actions are only consistent within a component.
    """

    grid: Grid
    rho: np.ndarray
    action: np.ndarray
    hbar: float
    mass: float
    valid: np.ndarray = field(default=None)
    component: np.ndarray = field(default=None)
    disconnected: bool = False

    def __post_init__(self):
        if self.valid is None:
            object.__setattr__(self, "valid", np.ones(self.grid.shape, dtype=bool))
        if self.component is None:
            object.__setattr__(self, "component", self.valid.astype(np.int32))
        for name in ("rho", "action"):
            object.__setattr__(self, name, _freeze(getattr(self, name).astype(float)))
        object.__setattr__(self, "valid", _freeze(self.valid.astype(bool)))
        object.__setattr__(self, "component", _freeze(self.component.astype(np.int32)))


def density(f: WaveField) -> np.ndarray:
    """|amplitude|^2 on the grid."""
    return np.abs(f.amplitudes) ** 2


def normalize(f: WaveField) -> WaveField:
    n2 = f.norm_sq
    if n2 <= 0 or not np.isfinite(n2):
        raise NormalizationError(f"cannot normalize field with squared norm {n2}")
    return f.with_amplitudes(f.amplitudes / np.sqrt(n2))


def l2_distance(a: WaveField, b: WaveField) -> float:
    if a.grid != b.grid:
        raise ConfigurationError("l2_distance: fields live on different grids")
    diff = a.amplitudes - b.amplitudes
    return float(np.sqrt(np.sum(np.abs(diff) ** 2) * a.grid.cell_volume))


def expectation_position(f: WaveField, norm_tol: float = 1e-6) -> np.ndarray:
    """First moment of the density, as a length-dim vector."""
    n2 = f.norm_sq
    if abs(n2 - 1.0) > norm_tol:
        raise NormalizationError(f"field norm^2 = {n2}, deviates from 1 by more than {norm_tol}")
    rho = density(f)
    dv = f.grid.cell_volume
    return np.array([np.sum(x * rho) * dv for x in f.grid.meshgrid()]) / n2


def position_variance(f: WaveField) -> np.ndarray:
    """Per-axis variance of the density."""
    rho = density(f) * f.grid.cell_volume
    total = rho.sum()
    out = np.empty(f.grid.dim)
    for a, x in enumerate(f.grid.meshgrid()):
        mean = np.sum(x * rho) / total
        out[a] = np.sum((x - mean) ** 2 * rho) / total
    return out


def boundary_mass(f: WaveField, cells: int = 3) -> float:
    """Probability mass within ``cells`` of any domain boundary."""
    rho = density(f)
    mask = np.zeros(f.grid.shape, dtype=bool)
    for a in range(f.grid.dim):
        idx = [slice(None)] * f.grid.dim
        idx[a] = slice(0, cells)
        mask[tuple(idx)] = True
        idx[a] = slice(-cells, None)
        mask[tuple(idx)] = True
    return float(np.sum(rho[mask]) * f.grid.cell_volume)


def boundary_amplitude_ok(f: WaveField, cells: int = 3, tol: float = BOUNDARY_AMP_TOL) -> bool:
    mask = np.zeros(f.grid.shape, dtype=bool)
    for a in range(f.grid.dim):
        idx = [slice(None)] * f.grid.dim
        idx[a] = slice(0, cells)
        mask[tuple(idx)] = True
        idx[a] = slice(-cells, None)
        mask[tuple(idx)] = True
    return bool(np.all(np.abs(f.amplitudes[mask]) < tol))


def gaussian_packet(grid: Grid, x0, v0, sigma: float, hbar: float, mass: float,
                    frame: str = FRAME_LABORATORY) -> WaveField:
    """Normalized Gaussian packet (2 pi sigma^2)^(-dim/4) e^{-(x-x0)^2/4 sigma^2 + i m v0.x/hbar}.

    Requires a 5 sigma margin between x0 and every boundary so the periodic
    wrap stays negligible.
    """
    if sigma <= 0:
        raise ConfigurationError(f"sigma must be positive, got {sigma}")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    v0 = np.atleast_1d(np.asarray(v0, dtype=float))
    if x0.shape != (grid.dim,) or v0.shape != (grid.dim,):
        raise ConfigurationError("x0 and v0 must match the grid dimension")
    margin_lo = x0 - grid.lower
    margin_hi = grid.upper - x0
    if np.any(margin_lo < 5 * sigma) or np.any(margin_hi < 5 * sigma):
        raise DomainError(
            f"packet at {x0} with sigma={sigma} violates the 5 sigma boundary margin"
        )
    mesh = grid.meshgrid()
    r2 = sum((x - c) ** 2 for x, c in zip(mesh, x0))
    phase = sum(mass * v * x for x, v in zip(mesh, v0)) / hbar
    amps = (2.0 * np.pi * sigma**2) ** (-grid.dim / 4.0) * np.exp(-r2 / (4.0 * sigma**2) + 1j * phase)
    return normalize(WaveField(grid=grid, amplitudes=amps, hbar=hbar, mass=mass, frame=frame))


def shift_field(f: WaveField, offset, frame: str | None = None) -> WaveField:
    """Translate a field by ``offset`` via the spectral shift theorem.

    Exact for the periodic trigonometric representation; errors only if the
    shifted support runs into the boundary.
    """
    offset = np.atleast_1d(np.asarray(offset, dtype=float))
    if offset.shape != (f.grid.dim,):
        raise ConfigurationError("offset must match the grid dimension")
    spec = np.fft.fftn(f.amplitudes)
    ks = f.grid.wavenumbers()
    for a, k in enumerate(ks):
        shape = [1] * f.grid.dim
        shape[a] = -1
        spec = spec * np.exp(-1j * k.reshape(shape) * offset[a])
    out = np.fft.ifftn(spec)
    g = f.with_amplitudes(out)
    if frame is not None:
        g = replace(g, frame=frame)
    if not boundary_amplitude_ok(g):
        raise DomainError(f"shift by {offset} pushes support into the boundary margin")
    return g
