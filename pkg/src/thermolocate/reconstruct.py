"""
Grid-search localisation of a point source from a boundary patch.

Static data: for every candidate location the power ``Q`` and offset ``C``
of ``T = Q F(r) + C`` are fitted from the coldest and hottest patch
points, and the candidate with the smallest RMS misfit wins.

Dynamic data: for every candidate the spectra read at the nearest patch
point fix the amplitude of a predicted thermal-wave profile per frequency
bin.  Bins whose profile exceeds ``a_t`` on fewer than ``m_t`` points are
dropped; the remaining bins give an amplitude misfit (summed into
``sigma1``) and a phase-shape misfit (summed into ``sigma2``).  Each sum
yields its own best candidate.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import ConfigError, DomainError, NoSolutionError
from .model import Medium, static_factor, wrap_phase
from .simulator import MeasurementPatch, _rotation_to
from .spectral import SpectrumPatch, normalize_phase

__all__ = [
    "CandidateGrid",
    "StaticReconstruction",
    "DynamicReconstruction",
    "make_candidate_grid",
    "fit_power_AQ",
    "static_penalty",
    "static_landscape",
    "reconstruct_static",
    "predicted_amplitude_profile",
    "truncate_patch",
    "amplitude_penalty",
    "phase_penalty",
    "recover_source_spectrum",
    "anchor_spectra",
    "reconstruct_dynamic",
    "location_error",
]

PHASE_NORMALIZATIONS = ("none", "std")


@dataclass(frozen=True, eq=False)
class CandidateGrid:
    """Candidate source locations with their spherical lattice coordinates.

    ``spherical`` holds (r, theta, phi) per candidate, with theta measured
    from the cap axis.
    """

    centers: np.ndarray
    spherical: np.ndarray
    resolution: tuple[int, int, int]
    radial_range: tuple[float, float]
    axis: np.ndarray
    cap_angle: float

    def __len__(self):
        return len(self.centers)

    @property
    def spacing(self) -> float:
        """Largest distance between lattice neighbours (along r, theta or phi)."""
        n_r, n_t, n_p = self.resolution
        c = self.centers.reshape(n_r, n_t, n_p, 3)
        gaps = [0.0]
        if n_r > 1:
            gaps.append(np.linalg.norm(np.diff(c, axis=0), axis=-1).max())
        if n_t > 1:
            gaps.append(np.linalg.norm(np.diff(c, axis=1), axis=-1).max())
        if n_p > 1:
            gaps.append(np.linalg.norm(c - np.roll(c, 1, axis=2), axis=-1).max())
        return float(max(gaps))


@dataclass
class StaticReconstruction:
    x0: np.ndarray
    Q: float
    C: float
    epsilon: float
    index: int
    epsilon_field: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "x0": [float(v) for v in self.x0],
            "Q": float(self.Q),
            "C": float(self.C),
            "epsilon": float(self.epsilon),
            "candidate_index": int(self.index),
        }


@dataclass
class DynamicReconstruction:
    """Two answers, one per criterion; they are never merged."""

    freqs: np.ndarray
    x0_amp: np.ndarray
    x0_phase: np.ndarray
    index_amp: int
    index_phase: int
    S_amp: np.ndarray
    phi_amp: np.ndarray
    S_phase: np.ndarray
    phi_phase: np.ndarray
    sigma1: float
    sigma2: float
    a_t: float
    m_t: int
    bins_amp: list = field(default_factory=list)
    bins_phase: list = field(default_factory=list)
    sigma1_field: np.ndarray | None = None
    sigma2_field: np.ndarray | None = None

    def to_dict(self) -> dict:
        def spectrum(S, phi):
            return [
                {"bin": int(n), "freq": float(self.freqs[n]), "S": float(S[n]), "phi": float(phi[n])}
                for n in range(len(self.freqs))
            ]

        return {
            "amplitude_criterion": {
                "x0": [float(v) for v in self.x0_amp],
                "sigma1": float(self.sigma1),
                "candidate_index": int(self.index_amp),
                "active_bins": [int(b) for b in self.bins_amp],
                "spectrum": spectrum(self.S_amp, self.phi_amp),
            },
            "phase_criterion": {
                "x0": [float(v) for v in self.x0_phase],
                "sigma2": float(self.sigma2),
                "candidate_index": int(self.index_phase),
                "active_bins": [int(b) for b in self.bins_phase],
                "spectrum": spectrum(self.S_phase, self.phi_phase),
            },
            "truncation": {"A_t": float(self.a_t), "M_t": int(self.m_t)},
        }


def location_error(estimate, truth) -> float:
    return float(np.linalg.norm(np.asarray(estimate, float) - np.asarray(truth, float)))


# ---------------------------------------------------------------------------
# Candidate grid
# ---------------------------------------------------------------------------


def make_candidate_grid(
    cap_direction,
    cap_angle: float,
    resolution,
    radial_range,
    extraction_radius: float | None = None,
) -> CandidateGrid:
    """Spherical lattice about the origin filling the cone under the patch cap.

    Radii run from ``radial_range[0]`` to ``radial_range[1]`` inclusive,
    polar angles sit at cell centres ``(j + 1/2) cap_angle / n_theta`` (so
    no two candidates coincide on the axis), azimuths at ``2 pi k / n_phi``.
    Candidates are ordered r-major, phi fastest; ties in every search are
    broken by this order.
    """
    n_r, n_t, n_p = (int(v) for v in resolution)
    if min(n_r, n_t, n_p) < 2:
        raise ConfigError("candidate resolution must be >= 2 in every dimension")
    r_min, r_max = (float(v) for v in radial_range)
    if not 0 < r_min < r_max:
        raise ConfigError("radial range must satisfy 0 < r_min < r_max")
    if extraction_radius is not None and not r_max < extraction_radius:
        raise ConfigError("candidates must lie strictly below the extraction surface")
    radii = np.linspace(r_min, r_max, n_r)
    thetas = (np.arange(n_t) + 0.5) * cap_angle / n_t
    phis = np.arange(n_p) * 2.0 * np.pi / n_p
    R, Th, Ph = np.meshgrid(radii, thetas, phis, indexing="ij")
    local = np.stack(
        [R * np.sin(Th) * np.cos(Ph), R * np.sin(Th) * np.sin(Ph), R * np.cos(Th)], axis=-1
    ).reshape(-1, 3)
    rot = _rotation_to(cap_direction)
    centers = local @ rot.T
    if np.any(centers[:, 2] <= 0):
        raise ConfigError("candidate cone crosses the flat face of the domain")
    spherical = np.column_stack([R.ravel(), Th.ravel(), Ph.ravel()])
    axis = rot[:, 2].copy()
    return CandidateGrid(centers, spherical, (n_r, n_t, n_p), (r_min, r_max), axis, float(cap_angle))


def _as_centers(grid) -> np.ndarray:
    if isinstance(grid, CandidateGrid):
        return grid.centers
    centers = np.asarray(grid, dtype=float).reshape(-1, 3)
    if len(centers) == 0:
        raise ConfigError("empty candidate grid")
    return centers


def _map_chunks(func, n, chunk, workers):
    """Apply ``func(start, stop)`` over [0, n) in chunks and concatenate in order."""
    bounds = [(s, min(n, s + chunk)) for s in range(0, n, chunk)]
    if workers and workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: func(*b), bounds))
    else:
        parts = [func(*b) for b in bounds]
    return [np.concatenate(p) for p in zip(*parts)]


# ---------------------------------------------------------------------------
# Static
# ---------------------------------------------------------------------------


def _aq_anchors(patch: MeasurementPatch, nav: int):
    values = np.asarray(patch.values, dtype=float)
    if nav < 1 or len(values) < 2 * nav:
        raise DomainError(f"patch needs at least {2 * nav} points for nav={nav}")
    order = np.argsort(values, kind="stable")
    lo, hi = order[:nav], order[-nav:]
    pos = np.asarray(patch.positions, dtype=float)
    return values[lo].mean(), values[hi].mean(), pos[lo].mean(axis=0), pos[hi].mean(axis=0)


def _aq_solve(T1, T2, r1, r2, medium):
    F1, F2 = static_factor(r1, medium), static_factor(r2, medium)
    dF = F1 - F2
    with np.errstate(divide="ignore", invalid="ignore"):
        Q = np.where(np.abs(dF) > 1e-14 * np.maximum(np.abs(F1), np.abs(F2)), (T1 - T2) / dF, np.nan)
    C = 0.5 * ((T1 - Q * F1) + (T2 - Q * F2))
    return Q, C


def fit_power_AQ(patch: MeasurementPatch, x0, medium: Medium, nav: int = 1):
    """Power and offset of the static point model for one candidate.

    The ``nav`` coldest and ``nav`` hottest patch values (and the mean of
    their positions) serve as two anchors; ``Q`` makes the model difference
    between the anchors match the data, and ``C`` is the mean of the two
    offsets this implies.
    """
    T1, T2, x1, x2 = _aq_anchors(patch, nav)
    x0 = np.asarray(x0, dtype=float)
    r1, r2 = np.linalg.norm(x1 - x0), np.linalg.norm(x2 - x0)
    if r1 == 0 or r2 == 0:
        raise DomainError("candidate coincides with an anchor point")
    Q, C = _aq_solve(T1, T2, r1, r2, medium)
    if not np.isfinite(Q):
        raise DomainError("candidate is equidistant from both anchors")
    return float(Q), float(C)


def static_penalty(patch: MeasurementPatch, x0, Q: float, C: float, medium: Medium) -> float:
    """RMS misfit between the patch and ``Q F(r) + C``."""
    r = np.linalg.norm(np.asarray(patch.positions, float) - np.asarray(x0, float), axis=1)
    resid = np.asarray(patch.values, float) - (Q * static_factor(r, medium) + C)
    return float(np.sqrt(np.mean(resid**2)))


def static_landscape(patch: MeasurementPatch, grid, medium: Medium, nav: int = 1, workers: int = 1, chunk: int = 256):
    """(Q, C, epsilon) for every candidate; rejected candidates get epsilon = inf."""
    centers = _as_centers(grid)
    T1, T2, x1, x2 = _aq_anchors(patch, nav)
    pos = np.asarray(patch.positions, dtype=float)
    vals = np.asarray(patch.values, dtype=float)

    def work(a, b):
        c = centers[a:b]
        Q, C = _aq_solve(
            T1, T2, np.linalg.norm(x1 - c, axis=1), np.linalg.norm(x2 - c, axis=1), medium
        )
        r = np.linalg.norm(pos[None, :, :] - c[:, None, :], axis=2)
        with np.errstate(divide="ignore", invalid="ignore"):
            model = Q[:, None] * static_factor(r, medium) + C[:, None]
            eps = np.sqrt(np.mean((vals[None, :] - model) ** 2, axis=1))
        bad = ~np.isfinite(Q) | (r.min(axis=1) == 0) | ~np.isfinite(eps)
        return np.where(bad, np.nan, Q), np.where(bad, np.nan, C), np.where(bad, np.inf, eps)

    Q, C, eps = _map_chunks(work, len(centers), chunk, workers)
    return Q, C, eps


def reconstruct_static(
    patch: MeasurementPatch,
    grid,
    medium: Medium,
    nav: int = 1,
    workers: int = 1,
    keep_field: bool = False,
) -> StaticReconstruction:
    """Exhaustive search; the first candidate with the smallest penalty wins."""
    centers = _as_centers(grid)
    Q, C, eps = static_landscape(patch, centers, medium, nav, workers)
    if not np.isfinite(eps).any():
        raise NoSolutionError("every candidate was rejected")
    i = int(np.argmin(eps))
    return StaticReconstruction(
        centers[i].copy(), float(Q[i]), float(C[i]), float(eps[i]), i, eps if keep_field else None
    )


# ---------------------------------------------------------------------------
# Dynamic
# ---------------------------------------------------------------------------


def _wave_number(f, medium: Medium):
    return np.sqrt(np.pi * np.asarray(f, dtype=float) / medium.alpha)


def predicted_amplitude_profile(x0, anchor_amplitude: float, frequency: float, medium: Medium, positions, anchor: int | None = None):
    """Thermal-wave amplitude profile pinned to ``anchor_amplitude`` at the anchor point.

    ``anchor`` defaults to the patch point nearest ``x0``.  Only the ratio
    ``F(r) exp(-D(r)) / (F(r_C) exp(-D(r_C)))`` enters, so the profile does
    not depend on the power units.
    """
    if anchor_amplitude < 0:
        raise DomainError("anchor amplitude must be >= 0")
    r = np.linalg.norm(np.asarray(positions, float) - np.asarray(x0, float), axis=1)
    c = int(np.argmin(r)) if anchor is None else int(anchor)
    rc = r[c]
    k = _wave_number(frequency, medium)
    return anchor_amplitude * (rc / r) * np.exp(-k * (r - rc))


def truncate_patch(profile, a_t: float, m_t: int) -> np.ndarray:
    """Indices where the profile exceeds ``a_t``; empty if fewer than ``m_t``."""
    if a_t < 0 or m_t < 0:
        raise DomainError("truncation parameters must be >= 0")
    idx = np.flatnonzero(np.asarray(profile) > a_t)
    if len(idx) < m_t:
        return idx[:0]
    return idx


def amplitude_penalty(data, model) -> float:
    d = np.asarray(data, float) - np.asarray(model, float)
    return float(np.sqrt(np.mean(d * d)))


def phase_penalty(data_phase, model_phase, subset, normalization: str = "std") -> float:
    """Phase-shape misfit on ``subset``: root-sum-square divided by the subset size.

    Both inputs must already be zeroed at the anchor point.  With
    ``normalization="std"`` the model is first rescaled to the data's
    standard deviation on the subset.
    """
    if normalization not in PHASE_NORMALIZATIONS:
        raise ConfigError(f"phase normalization must be one of {PHASE_NORMALIZATIONS}")
    subset = np.asarray(subset)
    if subset.size == 0:
        raise DomainError("phase penalty needs a nonempty subset")
    d = np.asarray(data_phase, float)[subset]
    m = np.asarray(model_phase, float)[subset]
    if normalization == "std":
        sm = np.std(m)
        if sm > 0:
            m = m * (np.std(d) / sm)
    return float(np.sqrt(np.sum((d - m) ** 2)) / subset.size)


def recover_source_spectrum(x0, anchor_amplitudes, anchor_phases, freqs, anchor_position, medium: Medium):
    """Invert the point model at the anchor: source amplitude and phase per bin.

    ``anchor_position`` may be a single point or the (k, 3) neighbourhood
    the anchor bins were averaged over. In the latter case the model is
    averaged the same way (arithmetic mean of gains, circular mean of
    phasors), so noiseless data are inverted exactly.
    """
    x0 = np.asarray(x0, float)
    P = np.atleast_2d(np.asarray(anchor_position, float))
    r = np.linalg.norm(P - x0, axis=1)
    if np.any(r <= 0):
        raise DomainError("anchor coincides with the candidate")
    d = np.outer(r, _wave_number(freqs, medium))
    gain = (static_factor(r, medium)[:, None] * np.exp(-d)).mean(axis=0)
    lag = np.angle(np.exp(-1j * d).mean(axis=0))
    S = np.asarray(anchor_amplitudes, float) / gain
    phi = wrap_phase(np.asarray(anchor_phases, float) - lag)
    return S, np.atleast_1d(phi)


def anchor_spectra(spec: SpectrumPatch, k: int = 9, return_neighbours: bool = False):
    """Neighbourhood-averaged spectra for every patch point.

    Amplitudes are averaged arithmetically over the ``k`` nearest points,
    phases as a circular mean.
    """
    k = max(1, min(int(k), spec.n_points))
    _, nb = cKDTree(spec.positions).query(spec.positions, k=k)
    nb = np.asarray(nb).reshape(spec.n_points, k)
    amps = spec.amplitudes[nb].mean(axis=1)
    z = np.exp(1j * spec.phases[nb]).mean(axis=1)
    if return_neighbours:
        return amps, np.angle(z), nb
    return amps, np.angle(z)


class _PhaseCache:
    def __init__(self, spec):
        self.spec = spec
        self.store = {}

    def get(self, c, n):
        key = (c, n)
        if key not in self.store:
            self.store[key] = normalize_phase(self.spec, n, c)
        return self.store[key]


def reconstruct_dynamic(
    spec: SpectrumPatch,
    grid,
    medium: Medium,
    a_t: float = 0.02,
    m_t: int = 900,
    anchor_k: int = 9,
    phase_normalization: str = "std",
    bins=None,
    workers: int = 1,
    keep_field: bool = False,
    chunk: int = 128,
) -> DynamicReconstruction:
    """Search the grid under the amplitude and the phase criterion.

    ``bins`` selects the frequency bins considered (default: every bin
    except DC).
    """
    if phase_normalization not in PHASE_NORMALIZATIONS:
        raise ConfigError(f"phase normalization must be one of {PHASE_NORMALIZATIONS}")
    centers = _as_centers(grid)
    pos = spec.positions
    freqs = spec.freqs
    bins = np.arange(1, len(freqs)) if bins is None else np.asarray(bins, dtype=int)
    kn = _wave_number(freqs, medium)
    amp_anchor, ph_anchor, nbrs = anchor_spectra(spec, anchor_k, return_neighbours=True)
    data_amp = spec.amplitudes
    phases = _PhaseCache(spec)

    def work(a, b):
        c_chunk = centers[a:b]
        r_all = np.linalg.norm(pos[None, :, :] - c_chunk[:, None, :], axis=2)
        s1 = np.full(b - a, np.inf)
        s2 = np.full(b - a, np.inf)
        for j in range(b - a):
            r = r_all[j]
            c = int(np.argmin(r))
            rc = r[c]
            if rc == 0:
                continue
            total1 = total2 = 0.0
            used = 0
            for n in bins:
                A_c = amp_anchor[c, n]
                if not A_c > a_t:
                    continue
                prof = A_c * (rc / r) * np.exp(-kn[n] * (r - rc))
                sub = truncate_patch(prof, a_t, m_t)
                if sub.size == 0:
                    continue
                used += 1
                total1 += amplitude_penalty(data_amp[:, n], prof)
                model_ph = kn[n] * (rc - r)
                total2 += phase_penalty(phases.get(c, n), model_ph, sub, phase_normalization)
            if used:
                s1[j], s2[j] = total1, total2
        return s1, s2

    sigma1, sigma2 = _map_chunks(work, len(centers), chunk, workers)
    if not np.isfinite(sigma1).any():
        raise NoSolutionError("every frequency bin was truncated at every candidate")
    i1, i2 = int(np.argmin(sigma1)), int(np.argmin(sigma2))

    def solution(i):
        x0 = centers[i]
        r = np.linalg.norm(pos - x0, axis=1)
        c = int(np.argmin(r))
        S, phi = recover_source_spectrum(x0, amp_anchor[c], ph_anchor[c], freqs, pos[nbrs[c]], medium)
        active = []
        for n in bins:
            A_c = amp_anchor[c, n]
            if A_c > a_t:
                prof = A_c * (r[c] / r) * np.exp(-kn[n] * (r - r[c]))
                if truncate_patch(prof, a_t, m_t).size:
                    active.append(int(n))
        keep = np.zeros(len(freqs), dtype=bool)
        keep[active] = True
        return x0.copy(), np.where(keep, S, 0.0), np.where(keep, phi, 0.0), active

    x1, S1, p1, b1 = solution(i1)
    x2, S2, p2, b2 = solution(i2)
    return DynamicReconstruction(
        freqs=freqs,
        x0_amp=x1,
        x0_phase=x2,
        index_amp=i1,
        index_phase=i2,
        S_amp=S1,
        phi_amp=p1,
        S_phase=S2,
        phi_phase=p2,
        sigma1=float(sigma1[i1]),
        sigma2=float(sigma2[i2]),
        a_t=a_t,
        m_t=m_t,
        bins_amp=b1,
        bins_phase=b2,
        sigma1_field=sigma1 if keep_field else None,
        sigma2_field=sigma2 if keep_field else None,
    )
