"""Parametric potentials: external one-body kinds and pair couplings.

External kinds evaluate the full potential energy V(x) on a grid (any mass
factors are folded into the parameters, see the constructors).  Pair kinds
evaluate U(d) on separations d = |x_i - x_j| only.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .grids import ConfigurationError, Grid

KIND_FREE = "free"
KIND_LINEAR = "linear"
KIND_HARMONIC = "harmonic"
KIND_BARRIER = "barrier"
KIND_TABULATED = "tabulated"
KIND_PAIR_SPRING = "pair-spring"
KIND_PAIR_SOFT_COULOMB = "pair-soft-coulomb"
KIND_PAIR_TABULATED = "pair-tabulated"

_EXTERNAL = (KIND_FREE, KIND_LINEAR, KIND_HARMONIC, KIND_BARRIER, KIND_TABULATED)
_PAIR = (KIND_PAIR_SPRING, KIND_PAIR_SOFT_COULOMB, KIND_PAIR_TABULATED)
# kinds with a closed-form extremal action between fixed endpoints
CLOSED_FORM_KINDS = (KIND_FREE, KIND_LINEAR, KIND_HARMONIC)


@dataclass(frozen=True)
class PotentialSpec:
    kind: str
    slope: np.ndarray | None = None          # linear: V = slope . x
    curvature: np.ndarray | None = None      # harmonic: V = 1/2 sum k_a x_a^2
    wall_center: float = 0.0                 # barrier geometry, wall normal = first axis
    wall_thickness: float = 0.0
    wall_height: float = 0.0
    slit_centers: tuple = ()
    slit_widths: tuple = ()
    smoothing: float = 0.0                   # barrier edge smoothing length
    table: np.ndarray | None = None          # tabulated: values on the target grid
    spring_k: float = 0.0                    # pair spring U = 1/2 k d^2
    coulomb_q2: float = 0.0                  # soft coulomb U = q2 / sqrt(d^2 + a^2)
    coulomb_a: float = 1.0
    pair_table_r: np.ndarray | None = None   # pair tabulated radial samples
    pair_table_u: np.ndarray | None = None

    # -- constructors -------------------------------------------------

    @staticmethod
    def free() -> "PotentialSpec":
        return PotentialSpec(kind=KIND_FREE)

    @staticmethod
    def linear(slope) -> "PotentialSpec":
        return PotentialSpec(kind=KIND_LINEAR, slope=np.atleast_1d(np.asarray(slope, float)))

    @staticmethod
    def harmonic(omega, mass: float) -> "PotentialSpec":
        """V = 1/2 m omega_a^2 x_a^2 summed over axes."""
        w = np.atleast_1d(np.asarray(omega, float))
        return PotentialSpec(kind=KIND_HARMONIC, curvature=mass * w**2)

    @staticmethod
    def barrier(wall_center: float, wall_thickness: float, wall_height: float,
                slit_centers=(), slit_widths=(), smoothing: float = 0.0) -> "PotentialSpec":
        if len(slit_centers) != len(slit_widths):
            raise ConfigurationError("slit_centers and slit_widths must pair up")
        return PotentialSpec(
            kind=KIND_BARRIER, wall_center=wall_center, wall_thickness=wall_thickness,
            wall_height=wall_height, slit_centers=tuple(slit_centers),
            slit_widths=tuple(slit_widths), smoothing=smoothing,
        )

    @staticmethod
    def tabulated(values: np.ndarray) -> "PotentialSpec":
        v = np.asarray(values, float)
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("tabulated potential contains non-finite values")
        return PotentialSpec(kind=KIND_TABULATED, table=v)

    @staticmethod
    def pair_spring(k: float) -> "PotentialSpec":
        return PotentialSpec(kind=KIND_PAIR_SPRING, spring_k=k)

    @staticmethod
    def pair_soft_coulomb(q2: float, a: float) -> "PotentialSpec":
        if a <= 0:
            raise ConfigurationError("soft-coulomb softening must be positive")
        return PotentialSpec(kind=KIND_PAIR_SOFT_COULOMB, coulomb_q2=q2, coulomb_a=a)

    @staticmethod
    def pair_tabulated(r: np.ndarray, u: np.ndarray) -> "PotentialSpec":
        r = np.asarray(r, float)
        u = np.asarray(u, float)
        if r.ndim != 1 or r.shape != u.shape or np.any(np.diff(r) <= 0):
            raise ConfigurationError("pair table needs increasing r with matching values")
        return PotentialSpec(kind=KIND_PAIR_TABULATED, pair_table_r=r, pair_table_u=u)

    # -- queries ------------------------------------------------------

    @property
    def is_pair(self) -> bool:
        return self.kind in _PAIR

    def scaled(self, factor: float) -> "PotentialSpec":
        """Potential multiplied by a constant (e.g. total mass M for M V_g)."""
        if self.kind == KIND_FREE:
            return self
        if self.kind == KIND_LINEAR:
            return replace(self, slope=self.slope * factor)
        if self.kind == KIND_HARMONIC:
            return replace(self, curvature=self.curvature * factor)
        if self.kind == KIND_BARRIER:
            return replace(self, wall_height=self.wall_height * factor)
        if self.kind == KIND_TABULATED:
            return replace(self, table=self.table * factor)
        raise ConfigurationError(f"cannot scale pair kind {self.kind}")

    def evaluate(self, grid: Grid) -> np.ndarray:
        """Potential energy on every grid point (external kinds only)."""
        if self.kind not in _EXTERNAL:
            raise ConfigurationError(f"{self.kind} is a pair kind, not an external potential")
        mesh = grid.meshgrid()
        if self.kind == KIND_FREE:
            return np.zeros(grid.shape)
        if self.kind == KIND_LINEAR:
            if self.slope.shape != (grid.dim,):
                raise ConfigurationError("linear slope dimension mismatch")
            return sum(c * x for c, x in zip(self.slope, mesh))
        if self.kind == KIND_HARMONIC:
            k = self.curvature
            if k.size == 1:
                k = np.repeat(k, grid.dim)
            if k.shape != (grid.dim,):
                raise ConfigurationError("harmonic curvature dimension mismatch")
            return 0.5 * sum(ka * x**2 for ka, x in zip(k, mesh))
        if self.kind == KIND_BARRIER:
            return self._evaluate_barrier(grid)
        # tabulated
        if self.table.shape != grid.shape:
            raise ConfigurationError("tabulated potential shape does not match grid")
        return self.table.copy()

    def _evaluate_barrier(self, grid: Grid) -> np.ndarray:
        s = self.smoothing if self.smoothing > 0 else 2.0 * float(np.min(grid.spacing))
        mesh = grid.meshgrid()
        x = mesh[0]
        lo = self.wall_center - 0.5 * self.wall_thickness
        hi = self.wall_center + 0.5 * self.wall_thickness
        wall = 0.5 * (np.tanh((x - lo) / s) - np.tanh((x - hi) / s))
        if grid.dim == 1 or not self.slit_centers:
            return self.wall_height * wall
        y = mesh[1]
        open_frac = np.zeros_like(y)
        for c, w in zip(self.slit_centers, self.slit_widths):
            open_frac = open_frac + 0.5 * (np.tanh((y - (c - w / 2)) / s) - np.tanh((y - (c + w / 2)) / s))
        open_frac = np.clip(open_frac, 0.0, 1.0)
        return self.wall_height * wall * (1.0 - open_frac)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """grad V at arbitrary points, closed-form kinds only.

        ``x`` has shape (..., dim); the result matches.
        """
        x = np.asarray(x, float)
        if self.kind == KIND_FREE:
            return np.zeros_like(x)
        if self.kind == KIND_LINEAR:
            return np.broadcast_to(self.slope, x.shape).copy()
        if self.kind == KIND_HARMONIC:
            k = self.curvature
            if k.size == 1 and x.shape[-1] != 1:
                k = np.repeat(k, x.shape[-1])
            return k * x
        raise ConfigurationError(f"no closed-form gradient for kind {self.kind}")

    def pair_eval(self, d: np.ndarray) -> np.ndarray:
        """U(d) on separations (pair kinds only)."""
        d = np.asarray(d, float)
        if self.kind == KIND_PAIR_SPRING:
            return 0.5 * self.spring_k * d**2
        if self.kind == KIND_PAIR_SOFT_COULOMB:
            return self.coulomb_q2 / np.sqrt(d**2 + self.coulomb_a**2)
        if self.kind == KIND_PAIR_TABULATED:
            return np.interp(np.abs(d), self.pair_table_r, self.pair_table_u)
        raise ConfigurationError(f"{self.kind} is not a pair kind")

    def value(self, x: np.ndarray) -> np.ndarray:
        """V at arbitrary points (closed-form external kinds only)."""
        x = np.asarray(x, float)
        if self.kind == KIND_FREE:
            return np.zeros(x.shape[:-1])
        if self.kind == KIND_LINEAR:
            return x @ self.slope
        if self.kind == KIND_HARMONIC:
            k = self.curvature
            if k.size == 1 and x.shape[-1] != 1:
                k = np.repeat(k, x.shape[-1])
            return 0.5 * np.sum(k * x**2, axis=-1)
        raise ConfigurationError(f"no pointwise closed form for kind {self.kind}")
