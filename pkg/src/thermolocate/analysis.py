"""Distinguishability of a buried source: hot-spot contrast against depth and diffusivity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError
from .model import Medium, SourceSpec, static_factor, steady_spectral_response

__all__ = [
    "DistinguishabilityMap",
    "static_distinguishability",
    "dynamic_distinguishability",
    "distinguishability_map",
]


@dataclass(frozen=True)
class DistinguishabilityMap:
    """``values[i, j]`` is the contrast at ``depths[i]`` and ``alphas[j]``."""

    depths: np.ndarray
    alphas: np.ndarray
    frequency: float  # 0 for the static map
    values: np.ndarray
    offset: float
    power: float

    def rows(self):
        for i, d in enumerate(self.depths):
            for j, a in enumerate(self.alphas):
                yield float(d), float(a), float(self.frequency), float(self.values[i, j])


def _check(source: SourceSpec, depth: float):
    if not depth > source.radius:
        raise DomainError(f"depth {depth} must exceed the source radius {source.radius}")


def static_distinguishability(source: SourceSpec, depth: float, medium: Medium, offset: float = 0.05) -> float:
    """Static contrast between the hot spot and a point ``offset`` away on the tangent plane.

    The ball source is replaced by a point of equal total power, which is
    exact outside the ball.
    """
    _check(source, depth)
    q = source.signal.dc_offset
    far = math.hypot(depth, offset)
    return float(q * (static_factor(depth, medium) - static_factor(far, medium)))


def _harmonic_amplitude(source: SourceSpec, f: float | None):
    hs = source.signal.harmonics
    if f is None:
        if len(hs) != 1:
            raise DomainError("give a frequency for a source with several harmonics")
        return hs[0].amplitude, hs[0].frequency
    for h in hs:
        if math.isclose(h.frequency, f, rel_tol=1e-12):
            return h.amplitude, h.frequency
    raise DomainError(f"source has no harmonic at {f} Hz")


def dynamic_distinguishability(
    source: SourceSpec, depth: float, medium: Medium, f: float | None = None, offset: float = 0.05
) -> float:
    """Difference of steady oscillation amplitudes between hot spot and offset point.

    The ball is treated as a point of equal power; unlike the static case
    this is an approximation.
    """
    _check(source, depth)
    S, f = _harmonic_amplitude(source, f)
    far = math.hypot(depth, offset)
    near_gain = steady_spectral_response(depth, f, medium).gain
    far_gain = steady_spectral_response(far, f, medium).gain
    return float(S * (near_gain - far_gain))


def distinguishability_map(
    source: SourceSpec,
    depths,
    alphas,
    f: float | None = None,
    offset: float = 0.05,
) -> DistinguishabilityMap:
    """Sweep depth x diffusivity.  ``f=None`` on a constant source gives the static map."""
    depths = np.asarray(depths, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    static = f is None and not source.signal.harmonics
    values = np.empty((len(depths), len(alphas)))
    freq = 0.0
    power = source.signal.dc_offset
    for j, a in enumerate(alphas):
        medium = Medium(float(a))
        for i, d in enumerate(depths):
            if static:
                values[i, j] = static_distinguishability(source, d, medium, offset)
            else:
                values[i, j] = dynamic_distinguishability(source, d, medium, f, offset)
    if not static:
        power, freq = _harmonic_amplitude(source, f)
    return DistinguishabilityMap(depths, alphas, freq, values, offset, power)
