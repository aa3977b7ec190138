"""Scenario configuration: JSON schema, named presets and conversion to library objects.

A config is a JSON object.  It may name a ``preset``; the preset is
deep-merged underneath the file's own keys (objects merge key by key,
everything else is replaced).
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import re
from dataclasses import dataclass

import jsonschema
import numpy as np

from .exceptions import ConfigError
from .model import Harmonic, Medium, SignalSpec, SourceSpec
from .simulator import DomainSpec, RobinBoundary, Stage, StageSchedule

__all__ = [
    "SCHEMA",
    "PRESETS",
    "preset_names",
    "get_preset",
    "deep_merge",
    "load_config",
    "resolve_config",
    "config_hash",
    "Scenario",
]

_VEC3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}

_HARMONIC = {
    "type": "object",
    "additionalProperties": False,
    "required": ["amplitude", "frequency"],
    "properties": {"amplitude": _NONNEG, "frequency": _POS, "phase": {"type": "number"}},
}

_SOURCE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["center"],
    "properties": {
        "name": {"type": "string"},
        "center": _VEC3,
        "radius": _NONNEG,
        "power": {"enum": ["total", "density"]},
        "dc_offset": {"type": "number"},
        "harmonics": {"type": "array", "items": _HARMONIC},
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "preset": {"type": "string"},
        "description": {"type": "string"},
        "units": {"type": "string"},
        "kind": {"enum": ["static", "dynamic"]},
        "medium": {
            "type": "object",
            "additionalProperties": False,
            "required": ["alpha"],
            "properties": {"alpha": _POS},
        },
        "domain": {
            "type": "object",
            "additionalProperties": False,
            "required": ["ball_radius", "grid_spacing"],
            "properties": {"ball_radius": _POS, "grid_spacing": _POS},
        },
        "boundary": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"robin_coeff": _NONNEG, "ambient": {"type": "number"}},
        },
        "sources": {"type": "array", "minItems": 1, "items": _SOURCE},
        "schedule": {
            "type": "object",
            "additionalProperties": False,
            "required": ["stages"],
            "properties": {
                "stages": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["dt", "duration"],
                        "properties": {
                            "dt": _POS,
                            "duration": _NONNEG,
                            "sample_rate": {"type": ["number", "null"], "exclusiveMinimum": 0},
                        },
                    },
                }
            },
        },
        "extraction": {
            "type": "object",
            "additionalProperties": False,
            "required": ["radius"],
            "properties": {
                "radius": _POS,
                "cap_direction": {"oneOf": [_VEC3, {"type": "null"}]},
                "cap_angle_deg": {"type": "number", "exclusiveMinimum": 0, "maximum": 90},
                "spacing": _POS,
            },
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "percent": _NONNEG,
                "seed": {"type": "integer", "minimum": 0},
                "literal_variance": {"type": "boolean"},
            },
        },
        "reconstruction": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "resolution": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 2},
                    "minItems": 3,
                    "maxItems": 3,
                },
                "radial_range": {"type": "array", "items": _POS, "minItems": 2, "maxItems": 2},
                "nav": {"type": "integer", "minimum": 1},
                "a_t": _NONNEG,
                "m_t": {"type": "integer", "minimum": 0},
                "anchor_k": {"type": "integer", "minimum": 1},
                "phase_normalization": {"enum": ["none", "std"]},
                "detrend": {"enum": ["linear", "none"]},
            },
        },
        "forward": {
            "type": "object",
            "additionalProperties": False,
            "required": ["points"],
            "properties": {
                "points": {"type": "array", "minItems": 1, "items": _VEC3},
                "times": {"type": "array", "minItems": 1, "items": {"type": "number"}},
                "offset": {"type": "number"},
            },
        },
        "distinguishability": {
            "type": "object",
            "additionalProperties": False,
            "required": ["depths", "alphas"],
            "properties": {
                "depths": {"type": "array", "minItems": 1, "items": _POS},
                "alphas": {"type": "array", "minItems": 1, "items": _POS},
                "frequencies": {"type": "array", "items": _POS},
                "offset": _NONNEG,
            },
        },
    },
}


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

# Dimensionless half-ball scenarios.  Powers are per unit volume of the
# radius-10 source ball, as listed for the simulated experiments.
_CENTERS = {"A": [40.0, 40.0, 50.0], "B": [35.0, 35.0, 45.0], "C": [30.0, 30.0, 40.0]}
_STATIC_Q = [1.0, 0.8, 0.6, 0.4]
_DYNAMIC_S = [2.2, 1.8]
_DYNAMIC_F = 0.2

# Skin-to-air h/kappa is of order 20 1/m; with one length unit ~ 1 mm this
# is 0.02 per unit.  Keeps the static fields inside 20-45 degrees.
_ROBIN = 0.02
_AMBIENT = 20.0

_BASE = {
    "units": "dimensionless",
    "medium": {"alpha": 2.0},
    "boundary": {"robin_coeff": _ROBIN, "ambient": _AMBIENT},
    "noise": {"percent": 0.0, "seed": 0, "literal_variance": False},
}

_STATIC_BASE = {
    **_BASE,
    "kind": "static",
    "domain": {"ball_radius": 100.0, "grid_spacing": 10.0},
    # about 30 slowest-mode e-folds, then a short fine stage
    "schedule": {"stages": [{"dt": 5.0, "duration": 25000.0}, {"dt": 0.5, "duration": 10.0}]},
    "extraction": {"radius": 90.0, "cap_direction": None, "cap_angle_deg": 30.0, "spacing": 2.0},
    "reconstruction": {"resolution": [40, 40, 40], "radial_range": [30.0, 86.0], "nav": 1},
}

_DYNAMIC_BASE = {
    **_BASE,
    "kind": "dynamic",
    "domain": {"ball_radius": 100.0, "grid_spacing": 5.0},
    "schedule": {
        "stages": [
            {"dt": 1.0, "duration": 25000.0},
            {"dt": 0.1, "duration": 50.0},
            {"dt": 0.1, "duration": 10.0, "sample_rate": 10.0},
        ]
    },
    # dense enough that M_t = 900 points can clear A_t
    "extraction": {"radius": 85.0, "cap_direction": None, "cap_angle_deg": 30.0, "spacing": 0.5},
    "reconstruction": {
        "resolution": [30, 30, 30],
        "radial_range": [30.0, 81.0],
        "a_t": 0.02,
        "m_t": 900,
        "anchor_k": 9,
        "phase_normalization": "std",
        "detrend": "linear",
    },
}

_TISSUE = {
    "units": "SI (m, s, K; power per unit heat capacity)",
    "sources": [{"center": [0.0, 0.0, 0.0], "radius": 0.01, "power": "density", "dc_offset": 29000.0}],
    "medium": {"alpha": 1e-7},
    "distinguishability": {
        "depths": [round(0.0125 + 0.0025 * i, 6) for i in range(16)],
        "alphas": [float(f"{a:.6g}") for a in np.logspace(-7, -5, 9)],
        "offset": 0.05,
    },
}


def _build_presets() -> dict:
    out = {}
    for loc, center in _CENTERS.items():
        for i, q in enumerate(_STATIC_Q, start=1):
            for pct in (0, 1, 5, 10):
                name = f"halfball_static_{loc}{i}" + (f"_noise{pct}" if pct else "")
                cfg = copy.deepcopy(_STATIC_BASE)
                cfg["description"] = f"static source {loc}, power density {q}, {pct}% noise"
                cfg["sources"] = [
                    {"name": f"{loc}{i}", "center": list(center), "radius": 10.0, "power": "density", "dc_offset": q}
                ]
                cfg["noise"]["percent"] = pct / 100.0
                out[name] = cfg
        if loc == "C":
            continue
        for i, s in enumerate(_DYNAMIC_S, start=1):
            for pct in (0, 1, 3):
                name = f"halfball_dynamic_{loc}{i}" + (f"_noise{pct}" if pct else "")
                cfg = copy.deepcopy(_DYNAMIC_BASE)
                cfg["description"] = f"dynamic source {loc}, modulation {s} at {_DYNAMIC_F} Hz, {pct}% noise"
                # the offset equal to the modulation keeps the source power non-negative
                cfg["sources"] = [
                    {
                        "name": f"{loc}{i}",
                        "center": list(center),
                        "radius": 10.0,
                        "power": "density",
                        "dc_offset": s,
                        "harmonics": [{"amplitude": s, "frequency": _DYNAMIC_F, "phase": 0.0}],
                    }
                ]
                cfg["noise"]["percent"] = pct / 100.0
                out[name] = cfg
    out["tissue_static_map"] = copy.deepcopy(_TISSUE)
    dyn = copy.deepcopy(_TISSUE)
    dyn["sources"][0]["harmonics"] = [
        {"amplitude": 29000.0, "frequency": f} for f in (0.15, 0.5, 1.0)
    ]
    dyn["distinguishability"]["frequencies"] = [0.15, 0.5, 1.0]
    out["tissue_dynamic_map"] = dyn
    return out


PRESETS = _build_presets()


def preset_names() -> list[str]:
    return sorted(PRESETS)


def get_preset(name: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}") from None


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def _line_of(text: str | None, path) -> int | None:
    """Best-effort line number of the last key on a schema error path."""
    if not text:
        return None
    keys = [p for p in path if isinstance(p, str)]
    if not keys:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(keys[-1]), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _validate(cfg: dict, text: str | None = None, origin: str = "config"):
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        line = _line_of(text, err.absolute_path)
        loc = f"{origin}:{line}" if line else origin
        raise ConfigError(f"{loc}: {where}: {err.message}")


def resolve_config(cfg: dict, preset: str | None = None, text: str | None = None, origin: str = "config") -> dict:
    """Validate ``cfg`` and merge it over its preset (or ``preset`` if given)."""
    name = preset or cfg.get("preset")
    if name is not None and not isinstance(name, str):
        raise ConfigError(f"{origin}: preset: must be a string")
    merged = deep_merge(get_preset(name), cfg) if name else copy.deepcopy(cfg)
    if name:
        merged["preset"] = name
    # partial sections are legal before the merge, so only the result is checked
    _validate(merged, text, origin)
    return merged


def load_config(path=None, preset: str | None = None) -> dict:
    """Read, validate and resolve a config file; ``path=None`` uses the preset alone.

    Raises :class:`ConfigError` for malformed JSON or schema violations
    (with a line number when one can be found) and :class:`OSError` when
    the file cannot be read.
    """
    if path is None:
        if preset is None:
            raise ConfigError("give a config file or a preset")
        return resolve_config({}, preset)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}:1: top level must be an object")
    return resolve_config(cfg, preset, text, str(path))


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Conversion
# ---------------------------------------------------------------------------


def _source(d: dict) -> SourceSpec:
    hs = tuple(Harmonic(h["amplitude"], h["frequency"], h.get("phase", 0.0)) for h in d.get("harmonics", []))
    signal = SignalSpec(d.get("dc_offset", 0.0), hs)
    radius = d.get("radius", 0.0)
    if d.get("power", "total") == "density":
        if radius <= 0:
            raise ConfigError("a power density needs a source radius > 0")
        return SourceSpec.from_density(d["center"], radius, signal)
    return SourceSpec(tuple(d["center"]), radius, signal)


def _need(cfg: dict, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigError(f"config is missing {', '.join(missing)}")


@dataclass(frozen=True)
class Scenario:
    """Typed view of a resolved config; sections are built on demand."""

    cfg: dict

    @property
    def kind(self) -> str:
        if "kind" in self.cfg:
            return self.cfg["kind"]
        return "dynamic" if any(s.get("harmonics") for s in self.cfg.get("sources", [])) else "static"

    @property
    def medium(self) -> Medium:
        _need(self.cfg, "medium")
        return Medium(self.cfg["medium"]["alpha"])

    @property
    def sources(self) -> list[SourceSpec]:
        _need(self.cfg, "sources")
        return [_source(s) for s in self.cfg["sources"]]

    @property
    def domain_spec(self) -> DomainSpec:
        _need(self.cfg, "domain")
        d = self.cfg["domain"]
        return DomainSpec(d["ball_radius"], d["grid_spacing"])

    @property
    def boundary(self) -> RobinBoundary:
        b = self.cfg.get("boundary", {})
        return RobinBoundary(b.get("robin_coeff", 0.0), b.get("ambient", 0.0))

    @property
    def schedule(self) -> StageSchedule:
        _need(self.cfg, "schedule")
        return StageSchedule(
            tuple(Stage(s["dt"], s["duration"], s.get("sample_rate")) for s in self.cfg["schedule"]["stages"])
        )

    @property
    def extraction(self) -> dict:
        _need(self.cfg, "extraction")
        e = dict(self.cfg["extraction"])
        if e.get("cap_direction") is None:
            _need(self.cfg, "sources")
            e["cap_direction"] = list(self.cfg["sources"][0]["center"])
        direction = np.asarray(e["cap_direction"], dtype=float)
        if not np.linalg.norm(direction) > 0:
            raise ConfigError("cap direction must be a nonzero vector")
        return {
            "radius": float(e["radius"]),
            "cap_direction": direction,
            "cap_angle": math.radians(e.get("cap_angle_deg", 30.0)),
            "spacing": float(e.get("spacing", 2.0)),
        }

    @property
    def noise(self) -> dict:
        n = self.cfg.get("noise", {})
        return {
            "percent": float(n.get("percent", 0.0)),
            "seed": int(n.get("seed", 0)),
            "literal_variance": bool(n.get("literal_variance", False)),
        }

    @property
    def reconstruction(self) -> dict:
        r = self.cfg.get("reconstruction", {})
        return {
            "resolution": tuple(r.get("resolution", (20, 20, 20))),
            "radial_range": tuple(r["radial_range"]) if "radial_range" in r else None,
            "nav": int(r.get("nav", 1)),
            "a_t": float(r.get("a_t", 0.02)),
            "m_t": int(r.get("m_t", 900)),
            "anchor_k": int(r.get("anchor_k", 9)),
            "phase_normalization": r.get("phase_normalization", "std"),
            "detrend": r.get("detrend", "linear"),
        }
