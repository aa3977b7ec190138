"""Plain-text file formats.  Floats are written with ``repr`` so output is byte-stable."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .exceptions import DataMismatchError
from .simulator import DynamicPatch, MeasurementPatch

__all__ = [
    "provenance_line",
    "write_patch",
    "read_patch",
    "write_spectrum",
    "write_penalty_field",
    "write_map",
    "write_rows",
    "write_json",
    "manifest_path",
    "finite_or_none",
]


def _f(x) -> str:
    return repr(float(x))


def provenance_line(version: str, cfg_hash: str) -> str:
    return f"# thermolocate {version} config-sha256={cfg_hash}"


def write_rows(path, header, rows, provenance: str | None = None):
    buf = io.StringIO()
    if provenance:
        buf.write(provenance + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, (str, int, np.integer)) else _f(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_json(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def manifest_path(patch_path) -> Path:
    return Path(patch_path).with_suffix(".json")


def write_patch(path, patch, provenance: str | None = None, extra: dict | None = None) -> Path:
    """Write a patch CSV and its sidecar manifest; returns the manifest path."""
    pos = np.asarray(patch.positions)
    if isinstance(patch, MeasurementPatch):
        header = ["x", "y", "z", "T"]
        rows = (list(p) + [v] for p, v in zip(pos, patch.values))
        manifest = {"kind": "static", "n_points": len(pos)}
    else:
        n = patch.n_samples
        header = ["x", "y", "z"] + [f"t{i}" for i in range(n)]
        rows = (list(p) + list(s) for p, s in zip(pos, patch.series))
        manifest = {
            "kind": "dynamic",
            "n_points": len(pos),
            "f_s": float(patch.sample_rate),
            "N_s": int(n),
            "t0": float(patch.t0),
            "frame_times": [float(t) for t in patch.times],
        }
    manifest["extraction_radius"] = None if patch.extraction_radius is None else float(patch.extraction_radius)
    if extra:
        manifest.update(extra)
    write_rows(path, header, rows, provenance)
    mpath = manifest_path(path)
    write_json(mpath, manifest)
    return mpath


def read_patch(path, manifest=None):
    """Read a patch CSV checked against its manifest.

    Raises :class:`DataMismatchError` when header, row count, sample count
    or point radii disagree with the manifest.
    """
    path = Path(path)
    mpath = Path(manifest) if manifest is not None else manifest_path(path)
    try:
        meta = json.loads(mpath.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataMismatchError(f"{mpath}: malformed manifest ({exc.msg})") from None
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln and not ln.startswith("#")]
    if not lines:
        raise DataMismatchError(f"{path}: no data")
    header = lines[0].split(",")
    try:
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float)
    except ValueError as exc:
        raise DataMismatchError(f"{path}: non-numeric value ({exc})") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise DataMismatchError(f"{path}: ragged rows")
    if len(data) != meta.get("n_points", len(data)):
        raise DataMismatchError(f"{path}: {len(data)} points but manifest says {meta['n_points']}")
    pos = data[:, :3]
    radius = meta.get("extraction_radius")
    if radius is not None:
        dev = np.abs(np.linalg.norm(pos, axis=1) - radius)
        if dev.max() > 1e-6 * max(1.0, radius):
            raise DataMismatchError(f"{path}: points are not on the radius-{radius} surface")
    kind = meta.get("kind")
    if kind == "static":
        if header != ["x", "y", "z", "T"]:
            raise DataMismatchError(f"{path}: static header must be x,y,z,T")
        return MeasurementPatch(pos, data[:, 3], radius)
    if kind == "dynamic":
        n = meta.get("N_s")
        if header[:3] != ["x", "y", "z"] or len(header) - 3 != n:
            raise DataMismatchError(f"{path}: {len(header) - 3} frames but manifest says N_s={n}")
        if "f_s" not in meta:
            raise DataMismatchError(f"{mpath}: dynamic manifest lacks f_s")
        return DynamicPatch(pos, data[:, 3:], float(meta["f_s"]), float(meta.get("t0", 0.0)), radius)
    raise DataMismatchError(f"{mpath}: unknown patch kind {kind!r}")


def write_spectrum(path, spec, provenance: str | None = None):
    rows = (
        list(spec.positions[p]) + [n, spec.freqs[n], spec.amplitudes[p, n], spec.phases[p, n]]
        for p in range(spec.n_points)
        for n in range(len(spec.freqs))
    )
    write_rows(path, ["x", "y", "z", "bin", "freq", "amplitude", "phase"], rows, provenance)


def write_penalty_field(path, grid, epsilon, provenance: str | None = None):
    sph = grid.spherical
    rows = ([r, th, ph, e] for (r, th, ph), e in zip(sph, epsilon))
    write_rows(path, ["r", "theta", "phi", "epsilon"], rows, provenance)


def write_map(path, dmap_rows, provenance: str | None = None):
    write_rows(path, ["depth", "alpha", "freq", "deltaT"], dmap_rows, provenance)


def finite_or_none(x):
    x = float(x)
    return x if math.isfinite(x) else None
