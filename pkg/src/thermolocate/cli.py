"""``thermolocate`` command line: forward | simulate | reconstruct | distinguishability.

Every command reads one scenario config (file and/or preset), writes plain
files into ``--out`` and exits with

    0 ok, 2 config, 3 I/O, 4 stability, 5 data mismatch, 6 no solution.
"""

from __future__ import annotations

import argparse
import copy
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import distinguishability_map
from .config import Scenario, config_hash, load_config, preset_names
from .exceptions import ConfigError, DataMismatchError, ThermolocateError
from .formats import (
    finite_or_none,
    provenance_line,
    read_patch,
    write_json,
    write_map,
    write_patch,
    write_penalty_field,
    write_rows,
    write_spectrum,
)
from .model import field_temperature
from .reconstruct import location_error, make_candidate_grid, reconstruct_dynamic, reconstruct_static
from .simulator import MeasurementPatch, add_noise, build_domain, detrend, extract_patch, run_stages
from .spectral import spectrum

__all__ = ["main", "cmd_forward", "cmd_simulate", "cmd_reconstruct", "cmd_distinguishability"]

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_STABILITY, EXIT_MISMATCH, EXIT_NO_SOLUTION = 0, 2, 3, 4, 5, 6


def _provenance(cfg: dict) -> str:
    return provenance_line(__version__, config_hash(cfg))


def _out_dir(out) -> Path:
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_forward(cfg: dict, out) -> Path:
    """Point-source model at the configured points and times -> ``forward.csv``."""
    scen = Scenario(cfg)
    if "forward" not in cfg:
        raise ConfigError("config has no 'forward' section")
    fw = cfg["forward"]
    pts = np.asarray(fw["points"], dtype=float)
    times = np.asarray(fw.get("times", [0.0]), dtype=float)
    offset = fw.get("offset", cfg.get("boundary", {}).get("ambient", 0.0))
    sources, medium = scen.sources, scen.medium
    rows = []
    for t in times:
        T = np.atleast_1d(field_temperature(pts, t, sources, medium, offset))
        rows.extend(list(p) + [t, v] for p, v in zip(pts, T))
    path = _out_dir(out) / "forward.csv"
    write_rows(path, ["x", "y", "z", "t", "T"], rows, _provenance(cfg))
    return path


def simulate_patch(cfg: dict):
    """Run the finite-difference model and extract the (noisy) patch."""
    scen = Scenario(cfg)
    domain = build_domain(scen.domain_spec)
    result = run_stages(domain, scen.sources, scen.medium, scen.boundary, scen.schedule)
    ex = scen.extraction
    if scen.kind == "static":
        data = result.final
    else:
        if len(result.frames) < 4:
            raise ConfigError("a dynamic scenario needs a sampled stage with at least 4 frames")
        data = result
    patch = extract_patch(domain, data, ex["radius"], ex["cap_direction"], ex["cap_angle"], ex["spacing"])
    nz = scen.noise
    return add_noise(patch, nz["percent"], nz["seed"], nz["literal_variance"])


def cmd_simulate(cfg: dict, out) -> Path:
    """Simulate and write ``patch.csv`` plus its ``patch.json`` manifest."""
    patch = simulate_patch(cfg)
    path = _out_dir(out) / "patch.csv"
    write_patch(
        path,
        patch,
        _provenance(cfg),
        extra={"config_sha256": config_hash(cfg), "version": __version__, "noise": Scenario(cfg).noise},
    )
    return path


def candidate_grid(scen: Scenario, extraction_radius: float):
    ex, rc = scen.extraction, scen.reconstruction
    rr = rc["radial_range"]
    if rr is None:
        rr = (0.3 * extraction_radius, extraction_radius - 4.0)
    return make_candidate_grid(ex["cap_direction"], ex["cap_angle"], rc["resolution"], rr, extraction_radius)


def _truth(cfg: dict):
    srcs = cfg.get("sources")
    if not srcs:
        return None
    return Scenario(cfg).sources[0]


def _grid_meta(grid) -> dict:
    return {
        "resolution": list(grid.resolution),
        "radial_range": [float(v) for v in grid.radial_range],
        "axis": [float(v) for v in grid.axis],
        "cap_angle": float(grid.cap_angle),
        "count": int(len(grid.centers)),
        "spacing": float(grid.spacing),
    }


def reconstruct_patch(cfg: dict, patch, threads: int = 1, keep_field: bool = False):
    """Returns (report dict, grid, reconstruction, spectrum or None)."""
    scen = Scenario(cfg)
    radius = patch.extraction_radius
    if radius is None:
        radius = float(np.median(np.linalg.norm(patch.positions, axis=1)))
    if "extraction" in cfg and not np.isclose(radius, cfg["extraction"]["radius"]):
        raise DataMismatchError(
            f"patch lies at radius {radius} but the config extracts at {cfg['extraction']['radius']}"
        )
    is_static = isinstance(patch, MeasurementPatch)
    if ("kind" in cfg or cfg.get("sources")) and (scen.kind == "static") != is_static:
        raise DataMismatchError(f"config is {scen.kind} but the patch is {'static' if is_static else 'dynamic'}")
    grid = candidate_grid(scen, radius)
    medium, rc = scen.medium, scen.reconstruction
    truth = _truth(cfg)
    report = {"version": __version__, "config_sha256": config_hash(cfg), "grid": _grid_meta(grid)}
    spec = None
    if is_static:
        rec = reconstruct_static(patch, grid, medium, nav=rc["nav"], workers=threads, keep_field=keep_field)
        report["kind"] = "static"
        report["nav"] = rc["nav"]
        report["result"] = rec.to_dict()
        if truth is not None:
            report["truth"] = {"x0": list(map(float, truth.center)), "Q": float(truth.signal.dc_offset)}
            report["table_row"] = {
                "location_error": location_error(rec.x0, truth.center),
                "Q": float(rec.Q),
                "Q_relative": float(rec.Q / truth.signal.dc_offset) if truth.signal.dc_offset else None,
            }
    else:
        series = detrend(patch.series) if rc["detrend"] == "linear" else patch.series
        spec = spectrum(replace(patch, series=series))
        rec = reconstruct_dynamic(
            spec,
            grid,
            medium,
            a_t=rc["a_t"],
            m_t=rc["m_t"],
            anchor_k=rc["anchor_k"],
            phase_normalization=rc["phase_normalization"],
            workers=threads,
            keep_field=keep_field,
        )
        report["kind"] = "dynamic"
        report["detrend"] = rc["detrend"]
        report["result"] = rec.to_dict()
        report["result"]["amplitude_criterion"]["sigma1"] = finite_or_none(rec.sigma1)
        report["result"]["phase_criterion"]["sigma2"] = finite_or_none(rec.sigma2)
        if truth is not None:
            hs = truth.signal.harmonics
            report["truth"] = {
                "x0": list(map(float, truth.center)),
                "harmonics": [{"S": h.amplitude, "f": h.frequency, "phi": h.phase} for h in hs],
            }
            row = {
                "location_error_amp": location_error(rec.x0_amp, truth.center),
                "location_error_phase": location_error(rec.x0_phase, truth.center),
            }
            if hs:
                n = spec.bin_of(hs[0].frequency) if np.any(np.isclose(spec.freqs, hs[0].frequency)) else None
                if n is not None:
                    row["S_amp"] = float(rec.S_amp[n])
                    row["S_phase"] = float(rec.S_phase[n])
            report["table_row"] = row
    return report, grid, rec, spec


def cmd_reconstruct(cfg: dict, out, patch_path=None, threads: int = 1, penalty_field: bool = False) -> Path:
    """Reconstruct from a patch file -> ``report.json`` (+ spectrum / penalty CSVs)."""
    outd = _out_dir(out)
    patch_path = Path(patch_path) if patch_path is not None else outd / "patch.csv"
    patch = read_patch(patch_path)
    report, grid, rec, spec = reconstruct_patch(cfg, patch, threads, penalty_field)
    prov = _provenance(cfg)
    if spec is not None:
        write_spectrum(outd / "spectrum.csv", spec, prov)
    if penalty_field:
        if report["kind"] == "static":
            write_penalty_field(outd / "penalty.csv", grid, rec.epsilon_field, prov)
        else:
            write_penalty_field(outd / "penalty_amp.csv", grid, rec.sigma1_field, prov)
            write_penalty_field(outd / "penalty_phase.csv", grid, rec.sigma2_field, prov)
    report["patch"] = str(patch_path.name)
    path = outd / "report.json"
    write_json(path, report)
    return path


def cmd_distinguishability(cfg: dict, out) -> Path:
    """Depth x diffusivity sweep -> ``distinguishability.csv`` + ``.json`` metadata."""
    if "distinguishability" not in cfg:
        raise ConfigError("config has no 'distinguishability' section")
    d = cfg["distinguishability"]
    source = Scenario(cfg).sources[0]
    offset = d.get("offset", 0.05)
    freqs = d.get("frequencies") or [None]
    rows, maps = [], []
    for f in freqs:
        base = source if f is not None else replace(source, signal=replace(source.signal, harmonics=()))
        m = distinguishability_map(base, d["depths"], d["alphas"], f, offset)
        rows.extend(m.rows())
        maps.append(m)
    outd = _out_dir(out)
    path = outd / "distinguishability.csv"
    write_map(path, rows, _provenance(cfg))
    meta = {
        "version": __version__,
        "config_sha256": config_hash(cfg),
        "source": {
            "center": list(map(float, source.center)),
            "radius": float(source.radius),
            "total_static_power": float(source.signal.dc_offset),
        },
        "offset": float(offset),
        "frequencies": [float(m.frequency) for m in maps],
        "model": "equal-power point source; exact outside the ball for the static map, approximate for oscillating maps",
    }
    write_json(outd / "distinguishability.json", meta)
    return path


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thermolocate", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario config (JSON)")
    common.add_argument("--preset", help="named preset; merged under --config")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--seed", type=int, help="override the noise seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads for the grid search")
    for name in ("forward", "simulate", "distinguishability"):
        sub.add_parser(name, parents=[common])
    rec = sub.add_parser("reconstruct", parents=[common])
    rec.add_argument("--patch", help="patch CSV (default: <out>/patch.csv)")
    rec.add_argument("--penalty-field", action="store_true", help="write the full penalty landscape")
    sub.add_parser("presets", help="list preset names")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "presets":
        print("\n".join(preset_names()))
        return EXIT_OK
    try:
        cfg = load_config(args.config, args.preset)
        if args.seed is not None:
            cfg = copy.deepcopy(cfg)
            cfg.setdefault("noise", {})["seed"] = args.seed
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.command == "forward":
            path = cmd_forward(cfg, args.out)
        elif args.command == "simulate":
            path = cmd_simulate(cfg, args.out)
        elif args.command == "reconstruct":
            path = cmd_reconstruct(cfg, args.out, args.patch, args.threads, args.penalty_field)
        else:
            path = cmd_distinguishability(cfg, args.out)
    except ThermolocateError as exc:
        print(f"thermolocate: error: {exc}", file=sys.stderr)
        bound = getattr(exc, "bound", None)
        if bound is not None:
            print(f"thermolocate: stability bound dt <= {bound!r}", file=sys.stderr)
        return exc.exit_code
    except (OSError, UnicodeDecodeError) as exc:
        print(f"thermolocate: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
