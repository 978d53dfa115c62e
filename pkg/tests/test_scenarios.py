import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from wavepilot.cli import main as cli_main
from wavepilot.scenarios import ConfigError, parse_config, run_scenario

MINIMAL_COHERENT = """\
schema_version = 1
kind = coherent-validate
hbar = 1.0
mass = 1.0
omega = 1.0
x0 = 1.0, 0.0
v0 = 0.0, 0.5
grid_points = 64, 64
grid_min = -8, -8
grid_max = 8, 8
dt = 0.015707963267948967
steps = 400
store_every = 100
order = 4
tol_l2 = 1e-6
"""

FREE_SPREAD = """\
schema_version = 1
kind = free-spread
hbar = 1.0
mass = 1.0
sigma = 1.0
x0 = 0.0
v0 = 0.0
grid_points = 256
grid_min = -20
grid_max = 20
dt = 0.01
steps = 200
store_every = 50
"""


def test_parse_minimal_coherent_config():
    cfg = parse_config(MINIMAL_COHERENT)
    assert cfg.kind == "coherent-validate"
    assert cfg["omega"] == 1.0
    assert cfg["grid_points"] == [64, 64]


def test_parse_collects_all_errors():
    bad = "kind = coherent-validate\nbogus_key = 1\nhbar = nope\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(bad)
    msgs = "\n".join(exc.value.errors)
    assert "bogus_key" in msgs
    assert "cannot parse" in msgs
    assert "missing required key 'dt'" in msgs
    # several independent problems reported at once
    assert len(exc.value.errors) >= 5


def test_parse_duplicate_key_reports_both_lines():
    text = MINIMAL_COHERENT + "hbar = 2.0\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    dup = [e for e in exc.value.errors if "duplicate" in e]
    assert dup and "hbar" in dup[0]
    assert "line" in dup[0] or "lines" in dup[0]


def test_parse_requires_seed_for_double_slit():
    text = """\
schema_version = 1
kind = double-slit
hbar = 1.0
mass = 1.0
sigma = 1.5
x0 = -6.0, 0.0
v0 = 2.0, 0.0
grid_points = 64, 64
grid_min = -16, -16
grid_max = 16, 16
dt = 0.01
steps = 100
wall_center = 0.0
wall_thickness = 0.6
wall_height = 100.0
slit_centers = -1.2, 1.2
slit_widths = 0.7, 0.7
ensemble_count = 16
"""
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert any("seed" in e for e in exc.value.errors)


def test_parse_requires_seed_for_sweep_with_ensemble():
    text = """\
schema_version = 1
kind = hbar-sweep
hbar = 1.0
mass = 1.0
sigma = 1.0
x0 = 0.0
v0 = 1.0
potential = free
hbar_list = 1.0, 0.5
traj_x0 = 0.5
ensemble_count = 100
grid_points = 256
grid_min = -20
grid_max = 20
dt = 0.002
steps = 500
"""
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert any("seed" in e for e in exc.value.errors)


def test_parse_rejects_increasing_hbar_list():
    text = """\
schema_version = 1
kind = hbar-sweep
hbar = 1.0
mass = 1.0
sigma = 1.0
x0 = 0.0
v0 = 1.0
potential = free
hbar_list = 0.5, 1.0
traj_x0 = 0.5
grid_points = 256
grid_min = -20
grid_max = 20
dt = 0.002
steps = 500
"""
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert any("decreasing" in e for e in exc.value.errors)


def test_free_spread_run_and_manifest(tmp_path):
    cfg = parse_config(FREE_SPREAD)
    manifest, out = run_scenario(cfg, tmp_path / "run1")
    assert manifest.passed
    assert (out / "manifest.json").is_file()
    assert "width_vs_time.csv" in manifest.files
    assert "wave_final.dswf" in manifest.files
    payload = json.loads((out / "manifest.json").read_text())
    assert payload["passed"] is True
    assert payload["config_hash"] == cfg.text_hash


def test_run_deterministic_byte_identical(tmp_path):
    cfg = parse_config(FREE_SPREAD)
    m1, out1 = run_scenario(cfg, tmp_path / "a")
    m2, out2 = run_scenario(cfg, tmp_path / "b")
    assert m1.files == m2.files  # same names and checksums
    for name in m1.files:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_dry_run_writes_manifest_only(tmp_path):
    cfg = parse_config(FREE_SPREAD)
    manifest, out = run_scenario(cfg, tmp_path / "dry", dry_run=True)
    assert manifest.dry_run
    assert manifest.files == {}
    assert (out / "manifest.json").is_file()


def test_cli_run_and_check_and_export(tmp_path):
    cfgfile = tmp_path / "spread.cfg"
    cfgfile.write_text(FREE_SPREAD)
    out = tmp_path / "out"
    assert cli_main(["run", str(cfgfile), "--out", str(out)]) == 0
    manifest = out / "manifest.json"
    assert cli_main(["check", str(manifest)]) == 0
    assert cli_main(["export-plotdata", str(manifest)]) == 0
    assert (out / "wave_final.dat").is_file()
    # corrupt a file: check must fail with exit code 1
    target = out / "width_vs_time.csv"
    target.write_text(target.read_text() + "tamper\n")
    assert cli_main(["check", str(manifest)]) == 1


def test_cli_config_error_exit_code(tmp_path):
    cfgfile = tmp_path / "bad.cfg"
    cfgfile.write_text("kind = nonsense\n")
    assert cli_main(["run", str(cfgfile)]) == 2


def test_cli_entry_point_subprocess(tmp_path):
    cfgfile = tmp_path / "spread.cfg"
    cfgfile.write_text(FREE_SPREAD)
    out = tmp_path / "out"
    r = subprocess.run([sys.executable, "-m", "wavepilot.cli", "run", str(cfgfile),
                        "--out", str(out)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert "PASS" in r.stdout


def test_coherent_validate_scenario(tmp_path):
    cfg = parse_config(MINIMAL_COHERENT)
    manifest, out = run_scenario(cfg, tmp_path / "coh")
    assert manifest.passed
    names = set(manifest.files)
    assert {"error_vs_time.csv", "diagnostics.csv",
            "wave_initial.dswf", "wave_final.dswf"} <= names


def test_seed_override_changes_hash(tmp_path):
    text = FREE_SPREAD + "seed = 1\n"
    cfgfile = tmp_path / "s.cfg"
    cfgfile.write_text(text)
    out1 = tmp_path / "o1"
    out2 = tmp_path / "o2"
    assert cli_main(["run", str(cfgfile), "--out", str(out1)]) == 0
    assert cli_main(["run", str(cfgfile), "--out", str(out2), "--seed", "2"]) == 0
    h1 = json.loads((out1 / "manifest.json").read_text())["config_hash"]
    h2 = json.loads((out2 / "manifest.json").read_text())["config_hash"]
    assert h1 != h2
