"""Reproducible scenario runner: flat key=value configs, seeded execution,
snapshot/CSV artifacts, and a checksummed run manifest.

Config files are UTF-8 text, one ``key = value`` per line, ``#`` comments.
Values are scalars or comma-separated lists; every scenario kind declares
its schema below.  Runs are deterministic: identical configs produce
byte-identical DSWF and CSV outputs (manifest timestamps excepted).
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, dswf
from .bohm import Ensemble, sample_ensemble, equivariance_check
from .classical import SweepScenario, hbar_sweep
from .coherent import CoherentParams, coherent_field
from .framesplit import (
    TwoScaleState,
    evolve_two_scale,
    reconstruct_internal,
    relative_potential,
    two_scale_grids,
    verify_factorization,
)
from .grids import (
    FRAME_CENTER_OF_MASS,
    WaveField,
    gaussian_packet,
    l2_distance,
    make_grid,
    position_variance,
)
from .madelung import to_polar
from .manybody import ManyBodyState, run_manybody
from .potentials import PotentialSpec
from .propagate import EvolutionRecord, split_step_evolve
from .framesplit import reduced_mass

ENV_OUT_ROOT = "WAVEPILOT_OUT"
SCHEMA_VERSION = 1

KINDS = (
    "coherent-validate",
    "free-spread",
    "hbar-sweep",
    "factorize-2body",
    "manybody-hartree",
    "manybody-delta-compare",
    "double-slit",
)


class ConfigError(ValueError):
    """One or more configuration problems; ``errors`` lists all of them."""

    def __init__(self, errors):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


# -- schema -------------------------------------------------------------------

_F, _I, _S, _LF, _LI = "float", "int", "str", "list-float", "list-int"

_COMMON = {
    "schema_version": (_I, True),
    "kind": (_S, True),
    "hbar": (_F, True),
    "dt": (_F, True),
    "steps": (_I, True),
    "store_every": (_I, False),
    "order": (_I, False),
    "seed": (_I, False),
    "grid_points": (_LI, True),
    "grid_min": (_LF, True),
    "grid_max": (_LF, True),
}

_SCHEMAS = {
    "coherent-validate": {
        "mass": (_F, True), "omega": (_F, True),
        "x0": (_LF, True), "v0": (_LF, True),
        "tol_l2": (_F, False),
    },
    "free-spread": {
        "mass": (_F, True), "sigma": (_F, True),
        "x0": (_LF, True), "v0": (_LF, True),
        "tol_width_rel": (_F, False),
    },
    "hbar-sweep": {
        "mass": (_F, True), "sigma": (_F, True),
        "x0": (_LF, True), "v0": (_LF, True),
        "potential": (_S, True), "slope": (_LF, False),
        "hbar_list": (_LF, True), "traj_x0": (_LF, True),
        "ensemble_count": (_I, False),
    },
    "factorize-2body": {
        "masses": (_LF, True), "spring_k": (_F, True),
        "sigma_g": (_F, True), "tol_l2": (_F, False),
    },
    "manybody-hartree": {
        "masses": (_LF, True), "coupling": (_S, True),
        "spring_k": (_F, False), "coulomb_q2": (_F, False), "coulomb_a": (_F, False),
        "separation": (_F, True), "width": (_F, True),
        "overlap_threshold": (_F, False),
    },
    "manybody-delta-compare": {
        "masses": (_LF, True), "coupling": (_S, True),
        "spring_k": (_F, False), "coulomb_q2": (_F, False), "coulomb_a": (_F, False),
        "separation": (_F, True), "width": (_F, True),
        "tol_centers_rel": (_F, False),
        "overlap_threshold": (_F, False),
    },
    "double-slit": {
        "mass": (_F, True), "sigma": (_F, True),
        "x0": (_LF, True), "v0": (_LF, True),
        "wall_center": (_F, True), "wall_thickness": (_F, True),
        "wall_height": (_F, True),
        "slit_centers": (_LF, True), "slit_widths": (_LF, True),
        "smoothing": (_F, False),
        "ensemble_count": (_I, True),
        "far_field_x": (_F, False), "min_maxima": (_I, False),
    },
}


@dataclass
class ScenarioConfig:
    kind: str
    values: dict
    text_hash: str

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)


def _parse_value(raw: str, typ: str):
    if typ == _S:
        return raw
    if typ == _I:
        return int(raw)
    if typ == _F:
        return float(raw)
    parts = [p.strip() for p in raw.split(",") if p.strip() != ""]
    if typ == _LI:
        return [int(p) for p in parts]
    return [float(p) for p in parts]


def parse_config(text: str) -> ScenarioConfig:
    """Parse and fully validate a config document; collects every error."""
    errors: list[str] = []
    seen: dict[str, int] = {}
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        key, _, val = stripped.partition("=")
        key = key.strip()
        val = val.split("#", 1)[0].strip()
        if key in seen:
            errors.append(f"duplicate key '{key}' at lines {seen[key]} and {lineno}")
            continue
        seen[key] = lineno
        raw[key] = val

    kind = raw.get("kind")
    if kind is None:
        errors.append("missing required key 'kind'")
    elif kind not in KINDS:
        errors.append(f"unknown kind '{kind}' (expected one of {', '.join(KINDS)})")
    schema = dict(_COMMON)
    if kind in _SCHEMAS:
        schema.update(_SCHEMAS[kind])

    values: dict = {}
    for key, val in raw.items():
        if key not in schema:
            errors.append(f"unknown key '{key}' (line {seen[key]})")
            continue
        typ, _req = schema[key]
        try:
            values[key] = _parse_value(val, typ)
        except ValueError:
            errors.append(f"key '{key}' (line {seen[key]}): cannot parse {val!r} as {typ}")
    for key, (typ, req) in schema.items():
        if req and key not in raw:
            errors.append(f"missing required key '{key}'")

    if "schema_version" in values and values["schema_version"] != SCHEMA_VERSION:
        errors.append(f"unsupported schema_version {values['schema_version']}")
    if kind == "hbar-sweep" and values.get("ensemble_count") and "seed" not in values:
        errors.append("missing required key 'seed' (ensemble sampling requires it)")
    if kind == "double-slit" and "seed" not in values:
        errors.append("missing required key 'seed' (trajectory sampling requires it)")
    if kind == "hbar-sweep":
        hl = values.get("hbar_list", [])
        if len(hl) >= 2 and not all(a > b for a, b in zip(hl, hl[1:])):
            errors.append("hbar_list must be strictly decreasing")
        if values.get("potential") not in (None, "free", "linear"):
            errors.append("potential must be 'free' or 'linear'")
        if values.get("potential") == "linear" and "slope" not in values:
            errors.append("missing required key 'slope' (linear potential)")
    if kind in ("manybody-hartree", "manybody-delta-compare"):
        if values.get("coupling") not in (None, "spring", "soft-coulomb"):
            errors.append("coupling must be 'spring' or 'soft-coulomb'")
        if values.get("coupling") == "spring" and "spring_k" not in values:
            errors.append("missing required key 'spring_k'")
        if values.get("coupling") == "soft-coulomb" and (
            "coulomb_q2" not in values or "coulomb_a" not in values
        ):
            errors.append("soft-coulomb coupling needs 'coulomb_q2' and 'coulomb_a'")
    if errors:
        raise ConfigError(errors)

    canon = json.dumps(values, sort_keys=True)
    text_hash = hashlib.sha256(canon.encode()).hexdigest()
    return ScenarioConfig(kind=kind, values=values, text_hash=text_hash)


# -- output helpers -----------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_diagnostics_csv(path: Path, record: EvolutionRecord) -> None:
    dim = record.grid.dim
    header = ["t", "norm", "energy"] + [f"x_mean_{a}" for a in range(dim)] + ["boundary_mass"]
    write_csv(path, header, record.diagnostics_rows())


def write_polar_csv(path: Path, polar) -> None:
    grid = polar.grid
    mesh = grid.meshgrid()
    cols = [m.reshape(-1) for m in mesh]
    rho = polar.rho.reshape(-1)
    act = np.where(polar.valid, polar.action, np.nan).reshape(-1)
    valid = polar.valid.reshape(-1).astype(int)
    header = ["x"] if grid.dim == 1 else ["x", "y"]
    header += ["rho", "S", "valid"]
    rows = zip(*cols, rho, act, valid)
    write_csv(path, header, rows)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float | None = None
    tolerance: float | None = None
    detail: str = ""

    def __post_init__(self):
        self.passed = bool(self.passed)
        if self.value is not None:
            self.value = float(self.value)
        if self.tolerance is not None:
            self.tolerance = float(self.tolerance)


@dataclass
class RunManifest:
    kind: str
    config_hash: str
    code_version: str
    started_utc: str
    finished_utc: str
    files: dict
    checks: list
    passed: bool
    dry_run: bool = False
    config: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "config_hash": self.config_hash,
            "code_version": self.code_version,
            "started_utc": self.started_utc,
            "finished_utc": self.finished_utc,
            "files": self.files,
            "checks": [vars(c) for c in self.checks],
            "passed": self.passed,
            "dry_run": self.dry_run,
            "config": self.config,
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _grid_from_config(cfg: ScenarioConfig):
    pts = cfg["grid_points"]
    lo = cfg["grid_min"]
    hi = cfg["grid_max"]
    if not (len(pts) == len(lo) == len(hi)):
        raise ConfigError(["grid_points, grid_min, grid_max must have equal lengths"])
    dim = len(pts)
    bounds = [(lo[a], hi[a]) for a in range(dim)]
    return make_grid(dim, bounds, pts)


# -- scenario implementations --------------------------------------------------

def _run_coherent_validate(cfg: ScenarioConfig, out: Path):
    grid = _grid_from_config(cfg)
    params = CoherentParams(mass=cfg["mass"], omega=cfg["omega"],
                            x0=cfg["x0"], v0=cfg["v0"], hbar=cfg["hbar"])
    steps = cfg["steps"]
    store = cfg.get("store_every", max(1, steps // 10))
    order = cfg.get("order", 4)
    psi0 = coherent_field(params, 0.0, grid)
    pot = PotentialSpec.harmonic(params.omega, params.mass)
    rec = split_step_evolve(psi0, pot, cfg["dt"], steps, store_every=store,
                            order=order, diag_every=max(1, steps // 100))
    errs = [l2_distance(s, coherent_field(params, float(t), grid))
            for t, s in zip(rec.times, rec.snapshots)]
    write_csv(out / "error_vs_time.csv", ["t", "l2_error"], zip(rec.times, errs))
    write_diagnostics_csv(out / "diagnostics.csv", rec)
    dswf.write_wave(out / "wave_initial.dswf", rec.snapshots[0])
    dswf.write_wave(out / "wave_final.dswf", rec.snapshots[-1])
    tol = cfg.get("tol_l2", 1e-6)
    worst = float(np.max(errs))
    return [CheckResult("l2-vs-closed-form", worst <= tol, worst, tol,
                        "max L2 distance to the analytic coherent state over stored times")]


def _run_free_spread(cfg: ScenarioConfig, out: Path):
    grid = _grid_from_config(cfg)
    psi0 = gaussian_packet(grid, cfg["x0"], cfg["v0"], cfg["sigma"], cfg["hbar"], cfg["mass"])
    steps = cfg["steps"]
    store = cfg.get("store_every", max(1, steps // 10))
    rec = split_step_evolve(psi0, PotentialSpec.free(), cfg["dt"], steps,
                            store_every=store, order=cfg.get("order", 2),
                            diag_every=max(1, steps // 100))
    sig0 = cfg["sigma"]
    hbar, m = cfg["hbar"], cfg["mass"]
    rows = []
    for t, s in zip(rec.times, rec.snapshots):
        width = float(np.sqrt(position_variance(s)[0]))
        expect = sig0 * np.sqrt(1.0 + (hbar * t / (2 * m * sig0**2)) ** 2)
        rows.append((t, width, expect))
    write_csv(out / "width_vs_time.csv", ["t", "width", "closed_form"], rows)
    write_diagnostics_csv(out / "diagnostics.csv", rec)
    write_polar_csv(out / "polar_final.csv", to_polar(rec.snapshots[-1]))
    dswf.write_wave(out / "wave_final.dswf", rec.snapshots[-1])
    tol = cfg.get("tol_width_rel", 1e-6)
    rel = abs(rows[-1][1] - rows[-1][2]) / rows[-1][2]
    return [CheckResult("width-law", rel <= tol, rel, tol,
                        "relative width error vs closed-form spreading at the final time")]


def _run_hbar_sweep(cfg: ScenarioConfig, out: Path):
    grid = _grid_from_config(cfg)
    if cfg["potential"] == "linear":
        pot = PotentialSpec.linear(cfg["slope"])
    else:
        pot = PotentialSpec.free()
    scen = SweepScenario(
        grid=grid, mass=cfg["mass"], potential=pot,
        x0_center=cfg["x0"], sigma0=cfg["sigma"], v0=cfg["v0"],
        target_time=cfg["dt"] * cfg["steps"], traj_x0=cfg["traj_x0"],
        dt=cfg["dt"], store_every=cfg.get("store_every", 10),
    )
    report = hbar_sweep(scen, cfg["hbar_list"])
    write_csv(out / "convergence.csv",
              ["hbar", "action_sup_diff", "density_W1", "traj_sup_dev"],
              zip(report.hbars, report.action_sup_diff, report.density_w1,
                  report.traj_sup_dev))
    checks = []
    for metric, verdict in report.verdicts.items():
        checks.append(CheckResult(f"monotone-{metric}", verdict == "decreasing",
                                  detail=f"verdict: {verdict}"))
    return checks


def _run_factorize(cfg: ScenarioConfig, out: Path):
    grid = _grid_from_config(cfg)
    if grid.dim != 2:
        raise ConfigError(["factorize-2body needs a 2D configuration grid"])
    masses = tuple(cfg["masses"])
    hbar = cfg["hbar"]
    mu = reduced_mass(masses)
    k = cfg["spring_k"]
    omega_rel = np.sqrt(k / mu)
    sigma_r = np.sqrt(hbar / (2 * mu * omega_rel))
    xg_grid, r_grid = two_scale_grids(grid)
    ext0 = gaussian_packet(xg_grid, [0.0], [0.0], cfg["sigma_g"], hbar, float(sum(masses)))
    rel0 = gaussian_packet(r_grid, [0.0], [0.0], sigma_r, hbar, mu,
                           frame=FRAME_CENTER_OF_MASS)
    pair = PotentialSpec.pair_spring(k)
    steps = cfg["steps"]
    store = cfg.get("store_every", max(1, steps // 8))
    report = verify_factorization(ext0, rel0, masses, None, pair, grid,
                                  cfg["dt"], steps, store_every=store,
                                  order=cfg.get("order", 2))
    write_csv(out / "discrepancy.csv", ["t", "l2_discrepancy"],
              zip(report.times, report.discrepancy))

    state = TwoScaleState(external=ext0, relative=rel0, masses=masses,
                          cm_position=np.zeros(1))
    evo = evolve_two_scale(state, None, pair, cfg["dt"], steps, store_every=store)
    write_csv(out / "cm_track.csv", ["t", "x_g"],
              zip(evo.times, evo.cm_track[:, 0]))
    dswf.write_wave(out / "external_final.dswf", evo.external.snapshots[-1])
    dswf.write_wave(out / "relative_final.dswf", evo.relative.snapshots[-1])
    internal = reconstruct_internal(evo.relative.snapshots[-1], evo.cm_track[-1])
    dswf.write_wave(out / "internal_final.dswf", internal)
    tol = cfg.get("tol_l2", 1e-6)
    worst = float(np.max(report.discrepancy))
    return [CheckResult("factorization-l2", worst <= tol, worst, tol,
                        "max L2 distance between the direct solve and the factor product")]


def _manybody_state(cfg: ScenarioConfig, grid):
    masses = list(cfg["masses"])
    sep = cfg["separation"]
    width = cfg["width"]
    hbar = cfg["hbar"]
    if cfg["coupling"] == "spring":
        pair = PotentialSpec.pair_spring(cfg["spring_k"])
    else:
        pair = PotentialSpec.pair_soft_coulomb(cfg["coulomb_q2"], cfg["coulomb_a"])
    n = len(masses)
    offsets = (np.arange(n) - (n - 1) / 2.0) * sep
    waves = [gaussian_packet(grid, [off], [0.0], width, hbar, m,
                             frame=FRAME_CENTER_OF_MASS)
             for off, m in zip(offsets, masses)]
    return ManyBodyState(waves=waves, masses=masses, coupling=pair,
                         overlap_threshold=cfg.get("overlap_threshold", 1e-3))


def _write_manybody_outputs(out: Path, rec, tag: str):
    n = rec.centers.shape[1]
    rows = []
    for k, t in enumerate(rec.times):
        for j in range(n):
            rows.append((t, j, *rec.centers[k, j]))
    write_csv(out / f"centers_{tag}.csv", ["t", "j", "x_j"], rows)
    rows = []
    for k, t in enumerate(rec.times):
        for i in range(n):
            for j in range(i + 1, n):
                rows.append((t, i, j, rec.overlaps[k, i, j]))
    write_csv(out / f"overlap_{tag}.csv", ["t", "i", "j", "O_ij"], rows)
    for j, w in enumerate(rec.snapshots[-1]):
        dswf.write_wave(out / f"wave_{tag}_{j}.dswf", w)


def _run_manybody_hartree(cfg: ScenarioConfig, out: Path):
    grid = _grid_from_config(cfg)
    state = _manybody_state(cfg, grid)
    rec = run_manybody(state, cfg["dt"], cfg["steps"], method="hartree",
                       store_every=cfg.get("store_every"))
    _write_manybody_outputs(out, rec, "hartree")
    drift = float(np.max(np.abs(rec.norms - 1.0)))
    checks = [
        CheckResult("norm-preservation", drift <= 1e-8, drift, 1e-8,
                    "max per-wave norm drift over the run"),
        CheckResult("overlap-below-threshold", len(rec.overlap_events) == 0,
                    float(len(rec.overlap_events)), 0.0,
                    "steps where pairwise support overlap exceeded the threshold"),
    ]
    return checks


def _run_manybody_delta_compare(cfg: ScenarioConfig, out: Path):
    grid = _grid_from_config(cfg)
    state = _manybody_state(cfg, grid)
    rec_h = run_manybody(state, cfg["dt"], cfg["steps"], method="hartree",
                         store_every=cfg.get("store_every"))
    rec_d = run_manybody(state, cfg["dt"], cfg["steps"], method="delta",
                         store_every=cfg.get("store_every"))
    _write_manybody_outputs(out, rec_h, "hartree")
    _write_manybody_outputs(out, rec_d, "delta")
    sep_h = rec_h.centers[:, 0, 0] - rec_h.centers[:, 1, 0]
    amp = 0.5 * (sep_h.max() - sep_h.min())
    dev = float(np.max(np.abs(rec_h.centers - rec_d.centers)))
    rows = zip(rec_h.times, sep_h, rec_d.centers[:, 0, 0] - rec_d.centers[:, 1, 0])
    write_csv(out / "separation_compare.csv", ["t", "sep_hartree", "sep_delta"], rows)
    tol = cfg.get("tol_centers_rel", 0.01)
    rel = dev / amp if amp > 0 else np.inf
    return [CheckResult("delta-vs-hartree-centers", rel <= tol, rel, tol,
                        "max center-track deviation relative to the oscillation amplitude")]


def _run_double_slit(cfg: ScenarioConfig, out: Path):
    grid = _grid_from_config(cfg)
    if grid.dim != 2:
        raise ConfigError(["double-slit needs a 2D grid"])
    barrier = PotentialSpec.barrier(
        cfg["wall_center"], cfg["wall_thickness"], cfg["wall_height"],
        cfg["slit_centers"], cfg["slit_widths"], cfg.get("smoothing", 0.0),
    )
    psi0 = gaussian_packet(grid, cfg["x0"], cfg["v0"], cfg["sigma"], cfg["hbar"], cfg["mass"])
    steps = cfg["steps"]
    store = cfg.get("store_every", max(1, steps // 50))
    rec = split_step_evolve(psi0, barrier, cfg["dt"], steps, store_every=store,
                            order=cfg.get("order", 2), diag_every=max(1, steps // 100))
    write_diagnostics_csv(out / "diagnostics.csv", rec)
    dswf.write_wave(out / "wave_final.dswf", rec.snapshots[-1])

    ens = sample_ensemble(rec, cfg["ensemble_count"], cfg["seed"], substeps=4)
    ks, n_active = equivariance_check(rec, ens)
    write_csv(out / "ensemble_summary.csv",
              ["t", "ks_x", "ks_y", "n_active"],
              zip(rec.times, ks[:, 0], ks[:, 1], n_active))
    rows = []
    for i, tr in enumerate(ens.trajectories):
        for k, t in enumerate(tr.times):
            rows.append((i, t, tr.positions[k, 0], tr.positions[k, 1],
                         tr.velocities[k, 0], tr.velocities[k, 1],
                         int(tr.exit_index is not None and k >= tr.exit_index)))
    write_csv(out / "trajectories.csv", ["id", "t", "x", "y", "vx", "vy", "exited"], rows)

    checks = []
    # far-field fringes: local maxima of the transverse density past the wall
    xs, ys = grid.axes()
    far_x = cfg.get("far_field_x", cfg["wall_center"]
                    + 0.6 * (float(grid.upper[0]) - cfg["wall_center"]))
    col = int(np.argmin(np.abs(xs - far_x)))
    rho = np.abs(rec.snapshots[-1].amplitudes) ** 2
    profile = rho[col]
    write_csv(out / "far_field.csv", ["y", "rho"], zip(ys, profile))
    floor = 1e-3 * profile.max()
    interior = (profile[1:-1] > profile[:-2]) & (profile[1:-1] > profile[2:])
    n_max = int(np.sum(interior & (profile[1:-1] > floor)))
    need = cfg.get("min_maxima", 3)
    checks.append(CheckResult("far-field-maxima", n_max >= need, float(n_max), float(need),
                              f"local maxima above noise floor in the far-field profile at x={far_x:g}"))

    # every non-reflected trajectory crosses the wall inside exactly one slit
    wall_x = cfg["wall_center"]
    half_th = 0.5 * cfg["wall_thickness"]
    centers = cfg["slit_centers"]
    widths = cfg["slit_widths"]
    n_cross = n_bad = n_reflected = 0
    for tr in ens.trajectories:
        stop = tr.exit_index if tr.exit_index is not None else len(tr.times)
        xtr = tr.positions[:stop, 0]
        ytr = tr.positions[:stop, 1]
        after = np.nonzero(xtr > wall_x)[0]
        if after.size == 0:
            n_reflected += 1
            continue
        k = int(after[0])
        if k == 0:
            n_bad += 1
            continue
        f = (wall_x - xtr[k - 1]) / (xtr[k] - xtr[k - 1])
        y_cross = ytr[k - 1] + f * (ytr[k] - ytr[k - 1])
        inside = [abs(y_cross - c) <= 0.5 * w for c, w in zip(centers, widths)]
        if sum(inside) != 1:
            n_bad += 1
        else:
            n_cross += 1
        # no sample point may sit inside the wall material outside a slit
        in_wall = np.abs(xtr - wall_x) < half_th
        if np.any(in_wall):
            open_ok = np.zeros(in_wall.sum(), dtype=bool)
            for c, w in zip(centers, widths):
                open_ok |= np.abs(ytr[in_wall] - c) <= 0.5 * w
            if not open_ok.all():
                n_bad += 1
    checks.append(CheckResult(
        "slit-partition", n_bad == 0, float(n_bad), 0.0,
        f"{n_cross} transmitted, {n_reflected} reflected, {n_bad} violations"))
    return checks


_RUNNERS = {
    "coherent-validate": _run_coherent_validate,
    "free-spread": _run_free_spread,
    "hbar-sweep": _run_hbar_sweep,
    "factorize-2body": _run_factorize,
    "manybody-hartree": _run_manybody_hartree,
    "manybody-delta-compare": _run_manybody_delta_compare,
    "double-slit": _run_double_slit,
}


def default_out_dir(cfg: ScenarioConfig) -> Path:
    root = Path(os.environ.get(ENV_OUT_ROOT, "."))
    return root / f"{cfg.kind}-{cfg.text_hash[:8]}"


def run_scenario(cfg: ScenarioConfig, out_dir: Path | str | None = None,
                 dry_run: bool = False) -> tuple[RunManifest, Path]:
    """Execute one scenario and write its artifacts plus manifest.json."""
    out = Path(out_dir) if out_dir is not None else default_out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    checks: list[CheckResult] = []
    if not dry_run:
        checks = _RUNNERS[cfg.kind](cfg, out)
    finished = _dt.datetime.now(_dt.timezone.utc).isoformat()
    files = {}
    for p in sorted(out.iterdir()):
        if p.name == "manifest.json" or not p.is_file():
            continue
        files[p.name] = sha256_file(p)
    manifest = RunManifest(
        kind=cfg.kind, config_hash=cfg.text_hash, code_version=__version__,
        started_utc=started, finished_utc=finished, files=files,
        checks=checks, passed=all(c.passed for c in checks), dry_run=dry_run,
        config={k: v for k, v in sorted(cfg.values.items())},
    )
    tmp = out / "manifest.json.tmp"
    tmp.write_text(manifest.to_json() + "\n", encoding="utf-8")
    os.replace(tmp, out / "manifest.json")
    return manifest, out
