"""Command-line frontend: landscape scans, sensitivity bounds, adaptive
protocol runs and working-point extraction, all reproducible from a JSON
config plus a seed.

Subcommands: scan | bounds | adaptive | workpoints.  Flags override config
keys.  Exit codes: 0 success, 1 usage/config error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .adaptive import MonteCarloStats, ProtocolConfig, monte_carlo, run_record_dict
from .fisher import invert_fisher, mmzi_separable_spec, qfim_for_probe, separable_bounds
from .landscape import export_grid, find_working_points, scan_grid
from .optics import four_mode_mzi, three_mode_mzi
from .probes import Probe

OUTPUT_SCHEMA_VERSION = 1

DEFAULT_CONFIG = {
    "circuit": {
        "modes": 3,
        "probe": "fock",
        "alpha": None,
        "phi0": 0.01,
    },
    "scan": {
        "resolution": 256,
        "out": None,
        "format": "csv",
    },
    "adaptive": {
        "true_phases": [1.0, 2.0],
        "nu": 10000,
        "fractions": None,
        "repetitions": 200,
        "seed": None,
        "out": "mmzi_adaptive.json",
        "bound_coeff": None,
    },
    "workpoints": {
        "resolution": 256,
        "refine_tol": 1e-5,
    },
    "tolerances": {
        "refine_tol": 1e-5,
    },
}


class ConfigError(ValueError):
    pass


def _merge_section(defaults: dict, overrides: dict, path: str) -> dict:
    merged = dict(defaults)
    for key, value in overrides.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {path}{key!r}")
        if isinstance(defaults[key], dict) and isinstance(value, dict):
            merged[key] = _merge_section(defaults[key], value, f"{path}{key}.")
        else:
            merged[key] = value
    return merged


def load_config(path: str | None) -> dict:
    if path is None:
        return json.loads(json.dumps(DEFAULT_CONFIG))
    try:
        with open(path) as handle:
            user = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError("config root must be a JSON object")
    return _merge_section(DEFAULT_CONFIG, user, "")


def _apply_flags(config: dict, args: argparse.Namespace) -> dict:
    if args.resolution is not None:
        config["scan"]["resolution"] = args.resolution
        config["workpoints"]["resolution"] = args.resolution
    if args.phi0 is not None:
        config["circuit"]["phi0"] = args.phi0
    if args.nu is not None:
        config["adaptive"]["nu"] = args.nu
    if args.reps is not None:
        config["adaptive"]["repetitions"] = args.reps
    if args.seed is not None:
        config["adaptive"]["seed"] = args.seed
    if args.out is not None:
        config["scan"]["out"] = args.out
        config["adaptive"]["out"] = args.out
    return config


def _build_circuit(circuit_cfg: dict):
    modes = circuit_cfg["modes"]
    if modes == 3:
        interf = three_mode_mzi()
    elif modes == 4:
        phi0 = circuit_cfg["phi0"]
        if phi0 is None:
            raise ConfigError("four-mode circuit needs phi0")
        interf = four_mode_mzi(float(phi0))
    else:
        raise ConfigError(f"modes must be 3 or 4, got {modes!r}")
    kind = circuit_cfg["probe"]
    if kind == "fock":
        probe = Probe.fock((1,) * modes)
    elif kind == "distinguishable":
        probe = Probe.distinguishable((1,) * modes)
    elif kind == "coherent":
        alpha = circuit_cfg["alpha"]
        if alpha is None:
            alpha = np.sqrt(3.0) if modes == 3 else 2.0
        probe = Probe.coherent(float(alpha), input_mode=0)
    else:
        raise ConfigError(f"unknown probe kind {kind!r}")
    return interf, probe


def cmd_scan(config: dict) -> int:
    out = config["scan"]["out"]
    if not out:
        print("scan: no output path (set scan.out or --out)", file=sys.stderr)
        return 1
    interf, probe = _build_circuit(config["circuit"])
    grid = scan_grid(interf, probe, resolution=int(config["scan"]["resolution"]))
    export_grid(grid, out, fmt=config["scan"]["format"])
    points = find_working_points(grid, refine_tol=float(config["tolerances"]["refine_tol"]))
    print(f"grid written to {out}")
    print(f"min tr_finv: {grid.min_trace():.6f}")
    print(f"singular cells: {grid.singular_count()} of {grid.resolution[0] * grid.resolution[1]}")
    for wp in points[:6]:
        print(
            f"minimum at ({wp.phases[0]:.4f}, {wp.phases[1]:.4f}): "
            f"tr_finv={wp.tr_finv:.6f} diag=({wp.finv11:.6f}, {wp.finv22:.6f})"
        )
    return 0


def cmd_bounds(config: dict) -> int:
    interf, probe = _build_circuit(config["circuit"])
    n_particles = interf.d  # one photon per mode for fock/distinguishable
    if probe.kind == "coherent":
        n_particles = probe.alpha**2
    fq = qfim_for_probe(interf, probe)
    inv = invert_fisher(fq)
    spec = mmzi_separable_spec(
        n_particles=int(round(n_particles)), n_params=interf.n_params
    )
    bounds = separable_bounds(spec)
    doc = {
        "schema_version": OUTPUT_SCHEMA_VERSION,
        "config": config,
        "qfim": [[float(x) for x in row] for row in fq.matrix],
        "qfim_trace_inv": None if inv.singular else float(np.trace(inv.inverse)),
        "qfim_inv_diag": None if inv.singular else [float(x) for x in np.diag(inv.inverse)],
        "separable": {
            "f_jj_max": [float(x) for x in bounds.f_jj_max],
            "inv_diag_min": [float(x) for x in bounds.inv_diag_min],
            "trace_min": bounds.trace_min,
        },
    }
    if not inv.singular:
        doc["beats_separable_trace"] = bool(np.trace(inv.inverse) < bounds.trace_min)
    json.dump(doc, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


def cmd_adaptive(config: dict) -> int:
    adaptive_cfg = config["adaptive"]
    if adaptive_cfg["seed"] is None:
        print("adaptive: a master seed is required (set adaptive.seed or --seed)",
              file=sys.stderr)
        return 1
    reps = int(adaptive_cfg["repetitions"])
    if reps < 2:
        print("adaptive: statistics need repetitions >= 2", file=sys.stderr)
        return 1
    modes = config["circuit"]["modes"]
    phi0 = float(config["circuit"]["phi0"] or 0.0)
    if modes == 4 and phi0 <= 0:
        print(
            "adaptive: four-mode protocol requires phi0 > 0 "
            "(at phi0 = 0 the information matrix is singular at the working "
            "point and the second step cannot converge)",
            file=sys.stderr,
        )
        return 1
    kwargs = {}
    if adaptive_cfg["fractions"]:
        kwargs["fractions"] = tuple(adaptive_cfg["fractions"])
    if adaptive_cfg["bound_coeff"]:
        kwargs["bound_coeff"] = float(adaptive_cfg["bound_coeff"])
    protocol = ProtocolConfig(
        modes=modes,
        true_phases=tuple(adaptive_cfg["true_phases"]),
        nu=int(adaptive_cfg["nu"]),
        phi0=phi0,
        **kwargs,
    )
    stats = monte_carlo(protocol, reps, adaptive_cfg["seed"])
    record = run_record_dict(stats)
    record["config_cli"] = config
    out = adaptive_cfg["out"]
    with open(out, "w") as handle:
        json.dump(record, handle, indent=2, sort_keys=True)
        handle.write("\n")
    print(f"run record written to {out}")
    print(f"{'parameter':>10s} {'std*sqrt(nu)':>14s} {'bound':>8s} {'ratio':>8s} {'bias':>10s}")
    sqrt_nu = np.sqrt(protocol.nu)
    for j in range(len(stats.std)):
        print(
            f"{'phi' + str(j + 1):>10s} {stats.std[j] * sqrt_nu:14.4f} "
            f"{protocol.bound_coeff:8.4f} {stats.ratio[j]:8.4f} {stats.bias[j]:10.5f}"
        )
    return 0


def cmd_workpoints(config: dict) -> int:
    interf, probe = _build_circuit(config["circuit"])
    grid = scan_grid(interf, probe, resolution=int(config["workpoints"]["resolution"]))
    points = find_working_points(
        grid, refine_tol=float(config["workpoints"]["refine_tol"])
    )
    if not points:
        print("workpoints: landscape is entirely singular", file=sys.stderr)
        return 2
    doc = {
        "schema_version": OUTPUT_SCHEMA_VERSION,
        "config": config,
        "working_points": [
            {
                "phases": [wp.phases[0], wp.phases[1]],
                "tr_finv": wp.tr_finv,
                "finv11": wp.finv11,
                "finv22": wp.finv22,
            }
            for wp in points
        ],
    }
    json.dump(doc, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmzi",
        description="Multiarm Mach-Zehnder multiphase estimation toolkit",
    )
    parser.add_argument("command", choices=["scan", "bounds", "adaptive", "workpoints"])
    parser.add_argument("--config", type=str, default=None, help="JSON config path")
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument("--out", type=str, default=None, help="output file path")
    parser.add_argument("--resolution", type=int, default=None, help="grid resolution")
    parser.add_argument("--phi0", type=float, default=None, help="auxiliary control phase")
    parser.add_argument("--nu", type=int, default=None, help="measurement budget")
    parser.add_argument("--reps", type=int, default=None, help="Monte Carlo repetitions")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _apply_flags(load_config(args.config), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    handlers = {
        "scan": cmd_scan,
        "bounds": cmd_bounds,
        "adaptive": cmd_adaptive,
        "workpoints": cmd_workpoints,
    }
    try:
        return handlers[args.command](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
