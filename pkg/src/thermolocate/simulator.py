"""
Synthetic measurements from an explicit finite-difference heat solver.

The body is a half ball ``|x| <= ball_radius, z >= 0`` discretised on a
regular lattice of nodes ``x = h * (i, j, k)``.  Every face between an
interior node and an exterior one carries a Robin condition

    dT/dn = robin_coeff * (ambient - T)

closed with a ghost value, so the update per node is

    T += alpha dt / h^2 * (sum_in (T_nb - T) + n_out * h * robin_coeff * (ambient - T))
         + dt * source_density.

With ``robin_coeff == 0`` the interior sum telescopes and the total
temperature is conserved to round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.signal import detrend as _scipy_detrend

from .exceptions import ConfigError, DomainError, StabilityError
from .model import Medium, SourceSpec

__all__ = [
    "DomainSpec",
    "RobinBoundary",
    "Stage",
    "StageSchedule",
    "Domain",
    "MeasurementPatch",
    "DynamicPatch",
    "StageResult",
    "build_domain",
    "stability_limit",
    "step_heat",
    "run_stages",
    "steady_state",
    "cap_points",
    "extract_patch",
    "add_noise",
    "detrend",
]

STABILITY_SAFETY = 0.9


@dataclass(frozen=True)
class DomainSpec:
    ball_radius: float
    grid_spacing: float

    def __post_init__(self):
        if not (self.ball_radius > 0 and self.grid_spacing > 0):
            raise ConfigError("ball_radius and grid_spacing must be positive")
        if self.ball_radius / self.grid_spacing < 10 - 1e-9:
            raise ConfigError(
                f"grid too coarse: ball_radius/grid_spacing = "
                f"{self.ball_radius / self.grid_spacing:.3g} < 10"
            )


@dataclass(frozen=True)
class RobinBoundary:
    """``robin_coeff`` is the transfer coefficient divided by conductivity (1/length)."""

    robin_coeff: float = 0.0
    ambient: float = 0.0

    def __post_init__(self):
        if not self.robin_coeff >= 0:
            raise ConfigError("robin_coeff must be >= 0")


@dataclass(frozen=True)
class Stage:
    dt: float
    duration: float
    sample_rate: float | None = None

    @property
    def n_steps(self) -> int:
        n = self.duration / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ConfigError(f"stage duration {self.duration} is not a multiple of dt {self.dt}")
        return int(round(n))

    @property
    def steps_per_frame(self) -> int:
        n = 1.0 / (self.sample_rate * self.dt)
        if n < 1 - 1e-9 or abs(n - round(n)) > 1e-9 * n:
            raise ConfigError(
                f"sample_rate {self.sample_rate} Hz needs a whole number of steps of dt {self.dt}"
            )
        return int(round(n))


@dataclass(frozen=True)
class StageSchedule:
    stages: tuple[Stage, ...]

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        for st in self.stages:
            if not (st.dt > 0 and st.duration >= 0):
                raise ConfigError("stage dt must be > 0 and duration >= 0")
            st.n_steps
            if st.sample_rate is not None:
                st.steps_per_frame
                if st.duration > 0 and st.n_steps % st.steps_per_frame:
                    raise ConfigError("sampled stage must hold a whole number of frames")

    def validate(self, domain: "Domain", medium: Medium, boundary: RobinBoundary):
        bound = stability_limit(domain, medium, boundary)
        for st in self.stages:
            if st.dt > bound:
                raise StabilityError(
                    f"dt={st.dt} exceeds the explicit stability bound {bound:.6g}", bound=bound
                )


@dataclass(frozen=True, eq=False)
class Domain:
    """Lattice, interior mask and per-node neighbour counts."""

    spec: DomainSpec
    origin: np.ndarray  # coordinate of node (0, 0, 0)
    mask: np.ndarray
    n_inside: np.ndarray  # interior 6-neighbours of each node

    @property
    def h(self) -> float:
        return self.spec.grid_spacing

    @property
    def shape(self):
        return self.mask.shape

    @property
    def n_outside(self) -> np.ndarray:
        return np.where(self.mask, 6 - self.n_inside, 0)

    def coords(self) -> np.ndarray:
        idx = np.indices(self.shape).astype(float)
        return np.moveaxis(idx, 0, -1) * self.h + self.origin

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return (np.linalg.norm(p, axis=-1) <= self.spec.ball_radius) & (p[..., 2] >= 0)

    def uniform(self, value: float) -> np.ndarray:
        return np.where(self.mask, float(value), 0.0)


@dataclass(frozen=True)
class MeasurementPatch:
    positions: np.ndarray
    values: np.ndarray
    extraction_radius: float | None = None

    def __post_init__(self):
        if len(self.positions) == 0:
            raise DomainError("empty patch")
        if len(self.values) != len(self.positions):
            raise DomainError("one value per patch point required")


@dataclass(frozen=True)
class DynamicPatch:
    """Time series per point, sampled at ``sample_rate`` starting at ``t0``."""

    positions: np.ndarray
    series: np.ndarray
    sample_rate: float
    t0: float = 0.0
    extraction_radius: float | None = None

    def __post_init__(self):
        if self.series.ndim != 2 or self.series.shape[0] != len(self.positions):
            raise DomainError("series must have shape (n_points, n_samples)")
        if self.series.shape[1] < 2:
            raise DomainError("need at least two samples per point")
        if not self.sample_rate > 0:
            raise DomainError("sample_rate must be > 0")

    @property
    def n_samples(self) -> int:
        return self.series.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_samples) / self.sample_rate


@dataclass
class StageResult:
    final: np.ndarray
    frames: np.ndarray  # (n_frames, *grid shape)
    frame_times: np.ndarray
    t_end: float
    frame_rate: float | None = None


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------


def build_domain(spec: DomainSpec) -> Domain:
    h, R = spec.grid_spacing, spec.ball_radius
    n = int(math.floor(R / h + 1e-9))
    origin = np.array([-n * h, -n * h, 0.0])
    shape = (2 * n + 1, 2 * n + 1, n + 1)
    idx = np.indices(shape).astype(float)
    pts = np.moveaxis(idx, 0, -1) * h + origin
    mask = np.linalg.norm(pts, axis=-1) <= R * (1 + 1e-12)
    padded = np.pad(mask, 1).astype(np.int8)
    n_in = (
        padded[2:, 1:-1, 1:-1]
        + padded[:-2, 1:-1, 1:-1]
        + padded[1:-1, 2:, 1:-1]
        + padded[1:-1, :-2, 1:-1]
        + padded[1:-1, 1:-1, 2:]
        + padded[1:-1, 1:-1, :-2]
    )
    n_in = np.where(mask, n_in, 0).astype(np.int8)
    return Domain(spec=spec, origin=origin, mask=mask, n_inside=n_in)


def stability_limit(domain: Domain, medium: Medium, boundary: RobinBoundary) -> float:
    """Largest explicit step keeping every update a convex combination (times safety)."""
    h = domain.h
    hk = h * boundary.robin_coeff
    return STABILITY_SAFETY * h * h / (6.0 * medium.alpha * max(1.0, hk))


def _source_weights(domain: Domain, source: SourceSpec) -> np.ndarray:
    """Per-node share (1/volume) of a source's total power.

    A node belongs to a ball source when its position lies within the
    radius; a point source (or a ball too small to cover any node) falls
    back to the nearest interior node.
    """
    pts = domain.coords()
    d = np.linalg.norm(pts - source.position, axis=-1)
    cells = domain.mask & (d <= source.radius * (1 + 1e-12))
    if not cells.any():
        d_in = np.where(domain.mask, d, np.inf)
        cells = np.zeros_like(domain.mask)
        cells[np.unravel_index(np.argmin(d_in), d_in.shape)] = True
        if not np.isfinite(d_in[cells]).all():
            raise ConfigError("source lies outside the domain")
    return cells / (cells.sum() * domain.h**3)


class _Stepper:
    def __init__(self, domain, sources, medium, boundary):
        self.domain = domain
        self.sources = list(sources)
        self.weights = [_source_weights(domain, s) for s in self.sources]
        self.coef = medium.alpha / domain.h**2
        self.hk = domain.h * boundary.robin_coeff
        self.ambient = boundary.ambient
        self.n_in = domain.n_inside.astype(float)
        self.n_out = domain.n_outside.astype(float)
        self.mask = domain.mask
        self._pad = np.zeros(tuple(s + 2 for s in domain.shape))

    def laplacian_sum(self, T):
        p = self._pad
        p[1:-1, 1:-1, 1:-1] = T
        nb = (
            p[2:, 1:-1, 1:-1]
            + p[:-2, 1:-1, 1:-1]
            + p[1:-1, 2:, 1:-1]
            + p[1:-1, :-2, 1:-1]
            + p[1:-1, 1:-1, 2:]
            + p[1:-1, 1:-1, :-2]
        )
        out = nb - self.n_in * T
        if self.hk:
            out += self.n_out * self.hk * (self.ambient - T)
        return out

    def step(self, T, t, dt):
        new = T + dt * self.coef * self.laplacian_sum(T)
        for src, w in zip(self.sources, self.weights):
            new += w * src.signal.integral(t, t + dt)
        new[~self.mask] = 0.0
        return new


def _as_sources(source) -> list[SourceSpec]:
    if source is None:
        return []
    if isinstance(source, SourceSpec):
        return [source]
    return list(source)


def step_heat(
    state: np.ndarray,
    source,
    medium: Medium,
    boundary: RobinBoundary,
    dt: float,
    domain: Domain,
    t: float = 0.0,
) -> np.ndarray:
    """One explicit Euler step from time ``t``.

    Source cells receive the exact integral of the signal over the step,
    spread evenly over the cells' volume.
    """
    bound = stability_limit(domain, medium, boundary)
    if dt > bound:
        raise StabilityError(f"dt={dt} exceeds the stability bound {bound:.6g}", bound=bound)
    return _Stepper(domain, _as_sources(source), medium, boundary).step(state, t, dt)


def run_stages(
    domain: Domain,
    source,
    medium: Medium,
    boundary: RobinBoundary,
    schedule: StageSchedule,
    initial: np.ndarray | None = None,
    t_start: float = 0.0,
) -> StageResult:
    """Run stages back to back, each starting from the previous final field.

    Frames are recorded only in stages with a sample rate, at the start of
    each frame interval.
    """
    schedule.validate(domain, medium, boundary)
    stepper = _Stepper(domain, _as_sources(source), medium, boundary)
    T = domain.uniform(boundary.ambient) if initial is None else np.array(initial, dtype=float)
    t = t_start
    frames, times, rate = [], [], None
    for st in schedule.stages:
        n = st.n_steps
        every = st.steps_per_frame if st.sample_rate is not None else 0
        if every:
            rate = st.sample_rate
        stage_start = t
        for i in range(n):
            if every and i % every == 0:
                frames.append(T.copy())
                times.append(t)
            T = stepper.step(T, t, st.dt)
            # step count, not repeated addition, keeps frame times exact
            t = stage_start + (i + 1) * st.dt
    frames_arr = np.array(frames) if frames else np.empty((0,) + domain.shape)
    return StageResult(T, frames_arr, np.array(times), t, rate)


def steady_state(
    domain: Domain, source, medium: Medium, boundary: RobinBoundary, rtol: float = 1e-12
) -> np.ndarray:
    """Steady field of the discrete operator for the sources' mean power.

    Solves the sparse linear system directly with conjugate gradients; needs
    ``robin_coeff > 0`` for a unique solution.
    """
    if boundary.robin_coeff <= 0:
        raise ConfigError("steady state needs robin_coeff > 0")
    sources = _as_sources(source)
    mask = domain.mask
    index = -np.ones(domain.shape, dtype=np.int64)
    index[mask] = np.arange(mask.sum())
    n = int(mask.sum())
    hk = domain.h * boundary.robin_coeff
    diag = domain.n_inside[mask].astype(float) + hk * domain.n_outside[mask]
    rows, cols = [np.arange(n)], [np.arange(n)]
    vals = [diag]
    pad = np.pad(index, 1, constant_values=-1)
    centre = pad[1:-1, 1:-1, 1:-1]
    for axis in range(3):
        for shift in (1, -1):
            nb = np.roll(pad, -shift, axis=axis)[1:-1, 1:-1, 1:-1]
            sel = (centre >= 0) & (nb >= 0)
            rows.append(centre[sel])
            cols.append(nb[sel])
            vals.append(-np.ones(sel.sum()))
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), (n, n))
    rhs = hk * boundary.ambient * domain.n_outside[mask].astype(float)
    for src in sources:
        rhs += _source_weights(domain, src)[mask] * src.signal.dc_offset * domain.h**2 / medium.alpha
    x, info = spla.cg(A, rhs, rtol=rtol, atol=0.0, maxiter=20 * n)
    if info != 0:
        raise ConfigError(f"steady-state solve did not converge (info={info})")
    out = np.zeros(domain.shape)
    out[mask] = x
    return out


# ---------------------------------------------------------------------------
# Patches
# ---------------------------------------------------------------------------

_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


def _rotation_to(direction) -> np.ndarray:
    """Rotation matrix taking +z onto ``direction``."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    z = np.array([0.0, 0.0, 1.0])
    v = np.cross(z, d)
    c = float(np.dot(z, d))
    if np.linalg.norm(v) < 1e-15:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx / (1.0 + c)


def cap_points(radius: float, direction, cap_angle: float, spacing: float) -> np.ndarray:
    """Near-uniform points on a spherical cap (spiral lattice about the cap axis).

    The full-sphere lattice has ``4 pi radius^2 / spacing^2`` points; the
    ones within ``cap_angle`` of the axis are kept, so the count grows with
    the cap area.
    """
    if not (0 < cap_angle <= math.pi):
        raise ConfigError("cap_angle must lie in (0, pi]")
    n_full = max(1, int(round(4.0 * math.pi * radius**2 / spacing**2)))
    n_cap = int(math.floor(n_full * (1.0 - math.cos(cap_angle)) / 2.0))
    n_cap = max(1, n_cap)
    i = np.arange(n_cap)
    cos_t = 1.0 - 2.0 * (i + 0.5) / n_full
    sin_t = np.sqrt(np.clip(1.0 - cos_t**2, 0.0, None))
    az = i * _GOLDEN_ANGLE
    local = np.column_stack([sin_t * np.cos(az), sin_t * np.sin(az), cos_t]) * radius
    return local @ _rotation_to(direction).T


def _interp_weights(domain: Domain, points: np.ndarray):
    """Trilinear weights over the interior corners of each point's lattice cell.

    Corners outside the body are dropped and the remaining weights
    renormalised.
    """
    rel = (points - domain.origin) / domain.h
    base = np.floor(rel).astype(np.int64)
    frac = rel - base
    idx_list, w_list = [], []
    shape = np.array(domain.shape)
    for corner in np.ndindex(2, 2, 2):
        c = np.array(corner)
        idx = base + c
        w = np.prod(np.where(c == 1, frac, 1.0 - frac), axis=1)
        inb = np.all((idx >= 0) & (idx < shape), axis=1)
        safe = np.where(inb[:, None], idx, 0)
        ok = inb & domain.mask[safe[:, 0], safe[:, 1], safe[:, 2]]
        idx_list.append(np.ravel_multi_index(safe.T, domain.shape))
        w_list.append(np.where(ok, w, 0.0))
    idx = np.column_stack(idx_list)
    w = np.column_stack(w_list)
    total = w.sum(axis=1)
    if np.any(total <= 1e-12):
        raise ConfigError("patch point has no interior lattice corner")
    return idx, w / total[:, None]


def extract_patch(
    domain: Domain,
    data,
    extraction_radius: float,
    cap_direction,
    cap_angle: float,
    spacing: float,
    sample_rate: float | None = None,
    t0: float = 0.0,
):
    """Interpolate a field (or a frame stack) onto a cap of the sphere ``|x| = extraction_radius``.

    ``data`` is either one grid field, giving a :class:`MeasurementPatch`,
    or an array of frames / a :class:`StageResult`, giving a
    :class:`DynamicPatch`.
    """
    if isinstance(data, StageResult):
        sample_rate = data.frame_rate if sample_rate is None else sample_rate
        t0 = float(data.frame_times[0]) if len(data.frame_times) else t0
        data = data.frames
    if not 0 < extraction_radius < domain.spec.ball_radius:
        raise ConfigError("extraction radius must lie inside the ball")
    pts = cap_points(extraction_radius, cap_direction, cap_angle, spacing)
    if not domain.contains(pts).all():
        raise ConfigError("measurement cap leaves the domain")
    idx, w = _interp_weights(domain, pts)
    arr = np.asarray(data, dtype=float)
    if arr.shape == domain.shape:
        vals = np.sum(arr.ravel()[idx] * w, axis=1)
        return MeasurementPatch(pts, vals, extraction_radius)
    if arr.ndim != 4 or arr.shape[1:] != domain.shape:
        raise DomainError("data must be a grid field or a stack of frames")
    if sample_rate is None:
        raise ConfigError("a frame stack needs a sample_rate")
    flat = arr.reshape(arr.shape[0], -1)
    series = np.einsum("fpk,pk->pf", flat[:, idx], w)
    return DynamicPatch(pts, series, sample_rate, t0, extraction_radius)


def add_noise(patch, percent: float, seed, literal_variance: bool = False):
    """Add white Gaussian noise scaled by the patch's noiseless value range.

    The standard deviation is ``percent * (max - min)``; with
    ``literal_variance`` it is ``sqrt(percent * (max - min))`` instead.
    """
    if percent < 0:
        raise DomainError("noise percent must be >= 0")
    if percent == 0:
        return patch
    values = patch.values if isinstance(patch, MeasurementPatch) else patch.series
    spread = float(np.max(values) - np.min(values))
    sigma = math.sqrt(percent * spread) if literal_variance else percent * spread
    rng = np.random.default_rng(seed)
    noisy = values + rng.normal(0.0, sigma, size=values.shape)
    if isinstance(patch, MeasurementPatch):
        return replace(patch, values=noisy)
    return replace(patch, series=noisy)


def detrend(series):
    """Subtract the least-squares line from each series (last axis)."""
    arr = np.asarray(series, dtype=float)
    if arr.shape[-1] < 3:
        raise DomainError("detrend needs at least 3 samples")
    return _scipy_detrend(arr, axis=-1, type="linear")
