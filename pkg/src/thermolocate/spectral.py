"""Per-point amplitude/phase spectra of boundary time series, and phase utilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, UndefinedMeanError
from .model import wrap_phase

__all__ = ["SpectrumPatch", "spectrum", "unwrap_phase", "normalize_phase", "average_phase"]


@dataclass(frozen=True)
class SpectrumPatch:
    """One-sided spectra on a set of patch points.

    ``amplitudes`` and ``phases`` have shape (n_points, n_bins); bin ``n``
    sits at ``freqs[n] = n * sample_rate / n_samples``.  Phases are relative
    to the first frame of the series.
    """

    positions: np.ndarray
    freqs: np.ndarray
    amplitudes: np.ndarray
    phases: np.ndarray
    extraction_radius: float | None = None

    @property
    def n_points(self) -> int:
        return len(self.positions)

    def bin_of(self, frequency: float) -> int:
        n = int(np.argmin(np.abs(self.freqs - frequency)))
        if not np.isclose(self.freqs[n], frequency, rtol=1e-9, atol=0.0):
            raise DomainError(f"no bin at {frequency} Hz")
        return n


def spectrum(patch) -> SpectrumPatch:
    """Windowless DFT of every point series of a :class:`DynamicPatch`.

    Amplitudes are scaled so that a cosine of amplitude ``A`` on a bin
    centre reads ``A``: ``2|X_n|/N`` for interior bins, ``|X_n|/N`` for the
    DC bin and, for even ``N``, the Nyquist bin.  Series should already be
    detrended.
    """
    series = patch.series
    if series.ndim != 2:
        raise DomainError("series must be a 2-D array (points x samples)")
    n = series.shape[1]
    if n < 4:
        raise DomainError(f"need at least 4 samples, got {n}")
    X = np.fft.rfft(series, axis=1)
    amps = 2.0 * np.abs(X) / n
    amps[:, 0] *= 0.5
    if n % 2 == 0:
        amps[:, -1] *= 0.5
    freqs = np.arange(X.shape[1]) * patch.sample_rate / n
    return SpectrumPatch(
        positions=np.asarray(patch.positions, dtype=float),
        freqs=freqs,
        amplitudes=amps,
        phases=np.angle(X),
        extraction_radius=getattr(patch, "extraction_radius", None),
    )


def unwrap_phase(angles) -> np.ndarray:
    """Remove 2*pi jumps so successive differences fall in (-pi, pi].

    Each element is shifted by a whole multiple of 2*pi; the first is left
    untouched.
    """
    a = np.asarray(angles, dtype=float)
    if a.size == 0:
        raise DomainError("cannot unwrap an empty sequence")
    d = np.diff(a)
    correction = np.concatenate([[0.0], np.cumsum(wrap_phase(d) - d)])
    # snap to exact multiples of 2*pi so wrap(unwrap(x)) == wrap(x)
    correction = 2.0 * np.pi * np.round(correction / (2.0 * np.pi))
    return a + correction


def normalize_phase(spec: SpectrumPatch, bin_index: int, reference: int) -> np.ndarray:
    """Phase map of one bin, unwrapped outward from ``reference`` and zeroed there.

    Points are visited in order of increasing distance from the reference
    point (ties by index), which is adequate for the radially monotone
    phase of a buried point source.
    """
    if not 0 <= reference < spec.n_points:
        raise DomainError(f"reference point {reference} is not in the patch")
    pos = spec.positions
    dist = np.linalg.norm(pos - pos[reference], axis=1)
    order = np.lexsort((np.arange(len(dist)), dist))
    raw = spec.phases[order, bin_index]
    unwrapped = unwrap_phase(raw)
    out = np.empty_like(unwrapped)
    out[order] = unwrapped
    return out - out[reference]


def average_phase(angles) -> float:
    """Circular mean: angle of the mean unit vector."""
    a = np.asarray(angles, dtype=float)
    if a.size == 0:
        raise DomainError("cannot average an empty set of angles")
    c, s = np.mean(np.cos(a)), np.mean(np.sin(a))
    if np.hypot(c, s) < 1e-12:
        raise UndefinedMeanError("angles cancel; circular mean is undefined")
    return wrap_phase(np.arctan2(s, c))
