"""Command-line interface: run scenarios, re-verify manifests, export plot data.

Exit codes: 0 all checks passed, 1 check failure, 2 configuration error,
3 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import dswf
from .scenarios import (
    ENV_OUT_ROOT,
    ConfigError,
    parse_config,
    run_scenario,
    sha256_file,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="wavepilot",
        description="Wavepacket dynamics scenario runner",
        epilog=f"Default output root comes from ${ENV_OUT_ROOT} (else the "
               "current directory).",
    )
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario config")
    run_p.add_argument("config", type=Path)
    run_p.add_argument("--out", type=Path, default=None, help="output directory")
    run_p.add_argument("--seed", type=int, default=None, help="override the config seed")
    run_p.add_argument("--threads", type=int, default=1,
                       help="parallelism bound (results are identical for any value)")
    run_p.add_argument("--dry-run", action="store_true",
                       help="validate the config and write a manifest only")

    check_p = sub.add_parser("check", help="re-verify a run manifest")
    check_p.add_argument("manifest", type=Path)

    exp_p = sub.add_parser("export-plotdata", help="flatten snapshots to text columns")
    exp_p.add_argument("manifest", type=Path)
    return p


def _cmd_run(args) -> int:
    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    try:
        cfg = parse_config(text)
        if args.seed is not None:
            cfg.values["seed"] = args.seed
            cfg.text_hash = hashlib.sha256(
                json.dumps(cfg.values, sort_keys=True).encode()
            ).hexdigest()
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    try:
        manifest, out = run_scenario(cfg, args.out, dry_run=args.dry_run)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except Exception as exc:  # noqa: BLE001 - report and map to exit code
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR
    for c in manifest.checks:
        status = "PASS" if c.passed else "FAIL"
        extra = f" value={c.value:g}" if c.value is not None else ""
        extra += f" tol={c.tolerance:g}" if c.tolerance is not None else ""
        print(f"[{status}] {c.name}{extra}  {c.detail}")
    print(f"manifest: {out / 'manifest.json'}")
    if manifest.dry_run:
        return EXIT_OK
    return EXIT_OK if manifest.passed else EXIT_CHECK_FAILED


def _cmd_check(args) -> int:
    try:
        payload = json.loads(args.manifest.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read manifest: {exc}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR
    base = args.manifest.parent
    ok = True
    for name, digest in payload.get("files", {}).items():
        path = base / name
        if not path.is_file():
            print(f"[FAIL] missing file {name}")
            ok = False
            continue
        actual = sha256_file(path)
        if actual != digest:
            print(f"[FAIL] checksum mismatch for {name}")
            ok = False
        else:
            print(f"[PASS] {name}")
    for c in payload.get("checks", []):
        status = "PASS" if c.get("passed") else "FAIL"
        print(f"[{status}] {c.get('name')}  {c.get('detail', '')}")
        ok = ok and bool(c.get("passed"))
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _cmd_export(args) -> int:
    try:
        payload = json.loads(args.manifest.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read manifest: {exc}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR
    base = args.manifest.parent
    count = 0
    for name in payload.get("files", {}):
        path = base / name
        if path.suffix != ".dswf" or not path.is_file():
            continue
        f = dswf.read_wave(path)
        target = path.with_suffix(".dat")
        mesh = f.grid.meshgrid()
        cols = [m.reshape(-1) for m in mesh]
        amps = f.amplitudes.reshape(-1)
        with open(target, "w", encoding="utf-8") as fh:
            head = "# " + " ".join(["x", "y"][: f.grid.dim] + ["re", "im", "rho"])
            fh.write(head + "\n")
            for row in zip(*cols, amps.real, amps.imag, np.abs(amps) ** 2):
                fh.write(" ".join(format(v, ".17g") for v in row) + "\n")
        print(f"wrote {target}")
        count += 1
    if count == 0:
        print("no snapshot files listed in the manifest")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "check":
        return _cmd_check(args)
    return _cmd_export(args)


if __name__ == "__main__":
    sys.exit(main())
