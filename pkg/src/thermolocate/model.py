"""
Analytic forward models for a point heat source in free space.

All models solve

    dT/dt = alpha * Laplace(T) + s(t) * delta(x - x0)

with constant diffusivity ``alpha``.  The library is unit agnostic: the
heat capacity is folded into the source power, so ``s`` carries units of
temperature * volume / time and every quantity must come from one
consistent unit system.

The closed forms are

    static:    T(r)    = Q / (4 pi alpha r) + C
    harmonic:  T(r, t) = S / (4 pi alpha r) * exp(-k r) * cos(2 pi f t + phi - k r),
               k = sqrt(pi f / alpha)

and :func:`duhamel_temperature` integrates the time convolution with the
Gaussian kernel numerically, as an independent check of both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .exceptions import AccuracyError, DomainError

__all__ = [
    "Harmonic",
    "SignalSpec",
    "SourceSpec",
    "Medium",
    "SpectralResponse",
    "wrap_phase",
    "ball_volume",
    "bessel_j",
    "gaussian_kernel",
    "duhamel_temperature",
    "fit_steady_oscillation",
    "static_factor",
    "attenuation_exponent",
    "static_point_temperature",
    "steady_spectral_response",
    "dynamic_point_temperature",
    "field_temperature",
    "phase_modulated_expansion",
    "amplitude_modulated_expansion",
]

_FREQ_MERGE_RTOL = 1e-12


def wrap_phase(phi):
    """Map angles into (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2.0 * np.pi)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def ball_volume(radius: float) -> float:
    return 4.0 / 3.0 * math.pi * radius**3


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Harmonic:
    """One cosine component ``amplitude * cos(2 pi frequency t + phase)``.

    Zero frequencies are rejected; a constant power belongs in
    :attr:`SignalSpec.dc_offset`.
    """

    amplitude: float
    frequency: float
    phase: float = 0.0

    def __post_init__(self):
        a, f, p = float(self.amplitude), float(self.frequency), float(self.phase)
        if not (math.isfinite(a) and math.isfinite(f) and math.isfinite(p)):
            raise DomainError("harmonic fields must be finite")
        if a < 0:
            raise DomainError(f"harmonic amplitude must be >= 0, got {a}")
        if f <= 0:
            raise DomainError(
                f"harmonic frequency must be > 0, got {f}; use dc_offset for constant power"
            )
        object.__setattr__(self, "amplitude", a)
        object.__setattr__(self, "frequency", f)
        object.__setattr__(self, "phase", wrap_phase(p))

    @property
    def phasor(self) -> complex:
        return self.amplitude * complex(math.cos(self.phase), math.sin(self.phase))


def _merge_components(dc: float, components: Iterable[tuple[float, float, float]]):
    """Fold signed (amplitude, frequency, phase) triples into canonical harmonics.

    Negative frequencies are mirrored (cos is even, so the phase flips sign),
    zero frequencies go to the constant term, and equal frequencies are
    summed as phasors.
    """
    merged: list[list] = []  # [frequency, phasor]
    for amp, freq, phase in components:
        if amp == 0.0:
            continue
        if freq < 0:
            freq, phase = -freq, -phase
        if freq == 0.0:
            dc += amp * math.cos(phase)
            continue
        z = amp * complex(math.cos(phase), math.sin(phase))
        for entry in merged:
            if abs(entry[0] - freq) <= _FREQ_MERGE_RTOL * max(entry[0], freq):
                entry[1] += z
                break
        else:
            merged.append([freq, z])
    harmonics = [
        Harmonic(abs(z), f, math.atan2(z.imag, z.real)) for f, z in merged if abs(z) > 0.0
    ]
    return dc, harmonics


@dataclass(frozen=True)
class SignalSpec:
    """Source signal ``s(t) = dc_offset + sum_n S_n cos(2 pi f_n t + phi_n)``."""

    dc_offset: float = 0.0
    harmonics: tuple[Harmonic, ...] = ()

    def __post_init__(self):
        hs = tuple(sorted(self.harmonics, key=lambda h: h.frequency))
        for a, b in zip(hs, hs[1:]):
            if a.frequency == b.frequency:
                raise DomainError(f"duplicate harmonic frequency {a.frequency}")
        if not math.isfinite(float(self.dc_offset)):
            raise DomainError("dc_offset must be finite")
        object.__setattr__(self, "dc_offset", float(self.dc_offset))
        object.__setattr__(self, "harmonics", hs)

    @classmethod
    def constant(cls, power: float) -> "SignalSpec":
        return cls(dc_offset=power)

    @classmethod
    def cosine(cls, amplitude: float, frequency: float, phase: float = 0.0, dc_offset: float = 0.0):
        return cls(dc_offset=dc_offset, harmonics=(Harmonic(amplitude, frequency, phase),))

    @classmethod
    def from_components(cls, components, dc_offset: float = 0.0) -> "SignalSpec":
        """Build from signed ``(amplitude, frequency, phase)`` triples."""
        dc, hs = _merge_components(dc_offset, components)
        return cls(dc_offset=dc, harmonics=tuple(hs))

    @property
    def is_zero(self) -> bool:
        return self.dc_offset == 0.0 and not self.harmonics

    @property
    def max_frequency(self) -> float:
        return max((h.frequency for h in self.harmonics), default=0.0)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self.dc_offset)
        for h in self.harmonics:
            out = out + h.amplitude * np.cos(2.0 * np.pi * h.frequency * t + h.phase)
        return out

    def integral(self, t0, t1):
        """Exact integral of s over [t0, t1]."""
        out = self.dc_offset * (t1 - t0)
        for h in self.harmonics:
            w = 2.0 * np.pi * h.frequency
            out += h.amplitude / w * (np.sin(w * t1 + h.phase) - np.sin(w * t0 + h.phase))
        return out

    def scaled(self, factor: float) -> "SignalSpec":
        comps = [(factor * h.amplitude, h.frequency, h.phase) for h in self.harmonics]
        return SignalSpec.from_components(comps, dc_offset=factor * self.dc_offset)

    def __add__(self, other: "SignalSpec") -> "SignalSpec":
        if not isinstance(other, SignalSpec):
            return NotImplemented
        comps = [(h.amplitude, h.frequency, h.phase) for h in self.harmonics + other.harmonics]
        return SignalSpec.from_components(comps, dc_offset=self.dc_offset + other.dc_offset)


@dataclass(frozen=True)
class SourceSpec:
    """A point (``radius == 0``) or uniform ball source.

    Powers in ``signal`` are totals.  Use :meth:`from_density` for a ball
    whose power is given per unit volume.
    """

    center: tuple[float, float, float]
    radius: float = 0.0
    signal: SignalSpec = field(default_factory=SignalSpec)

    def __post_init__(self):
        c = tuple(float(v) for v in np.asarray(self.center, dtype=float).reshape(3))
        if not all(math.isfinite(v) for v in c):
            raise DomainError("source center must be finite")
        if not self.radius >= 0:
            raise DomainError(f"source radius must be >= 0, got {self.radius}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @classmethod
    def from_density(cls, center, radius: float, signal: SignalSpec) -> "SourceSpec":
        return cls(center, radius, signal.scaled(ball_volume(radius)))

    @property
    def position(self) -> np.ndarray:
        return np.array(self.center)


@dataclass(frozen=True)
class Medium:
    alpha: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise DomainError(f"diffusivity must be > 0, got {self.alpha}")


@dataclass(frozen=True)
class SpectralResponse:
    """Temperature per unit source power and the phase lag it picks up."""

    gain: float | np.ndarray
    phase_shift: float | np.ndarray


# ---------------------------------------------------------------------------
# Bessel functions of the first kind, integer order
# ---------------------------------------------------------------------------


def bessel_j(order: int, x: float) -> float:
    """J_order(x) by its power series.

    Absolute error is below 1e-15 for |x| <= 5; cancellation between terms
    grows it to about 1e-13 at |x| = 10 and 1e-9 at |x| = 20.
    """
    order = int(order)
    if order < 0:
        return (-1) ** (-order) * bessel_j(-order, x)
    half = 0.5 * x
    term = half**order / math.factorial(order)
    total = term
    m = 0
    while True:
        m += 1
        term *= -(half * half) / (m * (m + order))
        total += term
        if abs(term) <= 1e-17 * abs(total) and m > abs(half):
            break
        if m > 500:
            break
    return total


# ---------------------------------------------------------------------------
# Kernels and closed forms
# ---------------------------------------------------------------------------


def gaussian_kernel(x, t: float, medium: Medium):
    """Free-space heat kernel ``(4 pi alpha t)^-3/2 exp(-|x|^2 / (4 alpha t))``.

    ``x`` may be a single 3-vector or an array of shape (..., 3).
    """
    if not t > 0:
        raise DomainError(f"heat kernel needs t > 0, got {t}")
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    a4t = 4.0 * medium.alpha * t
    return (math.pi * a4t) ** -1.5 * np.exp(-r2 / a4t)


def static_factor(r, medium: Medium):
    """F(r) = 1 / (4 pi alpha r)."""
    return 1.0 / (4.0 * np.pi * medium.alpha * np.asarray(r, dtype=float))


def attenuation_exponent(r, f, medium: Medium):
    """D(r, f) = sqrt(pi f / alpha) * r, the thermal-wave decay exponent."""
    return np.sqrt(np.pi * np.asarray(f, dtype=float) / medium.alpha) * np.asarray(r, dtype=float)


def _check_distance(r):
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise DomainError("distance to the source must be > 0")
    return r


def static_point_temperature(r, Q: float, C: float, medium: Medium):
    r = _check_distance(r)
    out = Q * static_factor(r, medium) + C
    return float(out) if out.ndim == 0 else out


def steady_spectral_response(r, f, medium: Medium) -> SpectralResponse:
    """Steady periodic response to a unit-amplitude cosine source.

    The lag is ``-k r`` with no constant offset: the half-line transform of
    ``exp(-r^2/w) w^(-3/2)`` is ``sqrt(pi)/r * exp(-(1 - i) k r)``, which the
    Duhamel quadrature reproduces.  At ``f == 0`` this reduces to the
    static factor with zero lag.
    """
    r = _check_distance(r)
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise DomainError("frequency must be >= 0")
    d = attenuation_exponent(r, f, medium)
    gain = static_factor(r, medium) * np.exp(-d)
    phase = -d
    if gain.ndim == 0:
        return SpectralResponse(float(gain), float(phase))
    return SpectralResponse(gain, phase)


def dynamic_point_temperature(x, t, source: SourceSpec, medium: Medium):
    """Steady-state field of one source, treated as a point at its center.

    ``x`` has shape (..., 3); ``t`` broadcasts against ``x.shape[:-1]``.
    """
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x - source.position, axis=-1)
    if np.any(r == 0):
        raise DomainError("evaluation point coincides with the source")
    t = np.asarray(t, dtype=float)
    sig = source.signal
    out = sig.dc_offset * static_factor(r, medium)
    for h in sig.harmonics:
        resp = steady_spectral_response(r, h.frequency, medium)
        out = out + h.amplitude * resp.gain * np.cos(
            2.0 * np.pi * h.frequency * t + h.phase + resp.phase_shift
        )
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def field_temperature(x, t, sources: Sequence[SourceSpec], medium: Medium, offset: float = 0.0):
    """Superposition of :func:`dynamic_point_temperature` over several sources."""
    total = offset
    for src in sources:
        total = total + np.asarray(dynamic_point_temperature(x, t, src, medium))
    total = np.asarray(total, dtype=float)
    return float(total) if total.ndim == 0 else total


# ---------------------------------------------------------------------------
# Duhamel quadrature (oracle)
# ---------------------------------------------------------------------------


def _midpoint_log(func, lo, hi, n):
    """Composite midpoint in v = ln w on [lo, hi]."""
    a, b = math.log(lo), math.log(hi)
    h = (b - a) / n
    v = a + h * (np.arange(n) + 0.5)
    w = np.exp(v)
    return h * np.sum(func(w) * w)


def _midpoint_lin(func, lo, hi, n, chunk=1 << 20):
    h = (hi - lo) / n
    total = 0.0
    for start in range(0, n, chunk):
        idx = np.arange(start, min(n, start + chunk))
        total += np.sum(func(lo + h * (idx + 0.5)))
    return h * total


def duhamel_temperature(
    x,
    t,
    signal: SignalSpec,
    medium: Medium,
    rtol: float = 1e-4,
    nodes_per_period: int = 20,
    max_nodes: int = 1 << 25,
):
    """Temperature from a point source at the origin by direct time convolution.

    Evaluates

        T(x, t) = 1 / (4 alpha pi^(3/2)) * int_0^{4 alpha t} exp(-|x|^2/w) w^(-3/2) s(t - w/(4 alpha)) dw

    with zero initial temperature.  The w-axis is split at ``8 |x|^2``: the
    lower part (where the Gaussian factor switches on) uses midpoints evenly
    spaced in ``ln w``, the upper part uses evenly spaced midpoints.  Both
    start at ``nodes_per_period`` nodes per period of the fastest harmonic
    and are halved until successive results differ by less than ``rtol``
    relative to the largest ``|T|`` among the requested times.

    ``t`` may be a scalar or a 1-D array; the convergence test is applied
    jointly so that samples near a zero crossing do not stall refinement.
    """
    x = np.asarray(x, dtype=float)
    r2 = float(np.dot(x, x))
    if r2 == 0.0:
        raise DomainError("Duhamel integral is singular at the source location")
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(~(times > 0)):
        raise DomainError("Duhamel integral needs t > 0")
    if signal.is_zero:
        out = np.zeros_like(times)
        return float(out[0]) if np.ndim(t) == 0 else out

    a4 = 4.0 * medium.alpha
    prefactor = 1.0 / (a4 * math.pi**1.5)
    fmax = signal.max_frequency
    w_period = a4 / fmax if fmax > 0 else math.inf
    w_lo = r2 / 700.0
    w_split = 8.0 * r2

    def integrate(tk, level):
        W = a4 * tk
        if W <= w_lo:
            return 0.0, 0

        def g(w):
            return np.exp(-r2 / w) * w**-1.5 * signal(tk - w / a4)

        hi = min(W, w_split)
        n_log = 64
        if math.isfinite(w_period):
            dv = w_period / (nodes_per_period * hi)
            n_log = max(n_log, math.ceil(math.log(hi / w_lo) / dv))
        n_log <<= level
        total = _midpoint_log(g, w_lo, hi, n_log)
        used = n_log
        if W > w_split:
            n_lin = 64
            if math.isfinite(w_period):
                n_lin = max(n_lin, math.ceil((W - w_split) * nodes_per_period / w_period))
            n_lin <<= level
            total += _midpoint_lin(g, w_split, W, n_lin)
            used += n_lin
        return total, used

    prev = None
    level = 0
    while True:
        vals, used = zip(*(integrate(tk, level) for tk in times))
        cur = prefactor * np.array(vals)
        if prev is not None:
            scale = np.max(np.abs(cur))
            change = np.max(np.abs(cur - prev))
            if change <= rtol * scale or scale == 0.0:
                break
        if max(used) * 2 > max_nodes:
            raise AccuracyError(
                f"Duhamel quadrature did not reach rtol={rtol} within {max_nodes} nodes",
                estimate=cur if np.ndim(t) else float(cur[0]),
            )
        prev = cur
        level += 1
    return float(cur[0]) if np.ndim(t) == 0 else cur


def fit_steady_oscillation(
    r: float,
    harmonic: Harmonic,
    medium: Medium,
    min_periods: int = 5,
    samples: int = 32,
    settle_rtol: float = 1e-3,
    quad_rtol: float = 1e-4,
    max_periods: int = 1 << 16,
):
    """Amplitude and phase lag of the Duhamel response to one cosine source.

    A cosine ``a + b cos(wt) + c sin(wt)`` is least-squares fitted to
    ``samples`` points of the last period before a horizon ``t_end``.  The
    horizon starts at ``min_periods`` periods and doubles until the fitted
    amplitude and phase change by less than ``settle_rtol`` (the transient
    of the convolution decays only algebraically).

    Returns ``(gain, phase_shift, t_end)`` where gain is per unit amplitude.
    """
    f = harmonic.frequency
    period = 1.0 / f
    x = np.array([r, 0.0, 0.0])
    sig = SignalSpec(harmonics=(harmonic,))
    omega = 2.0 * np.pi * f
    frac = np.arange(samples) / samples

    def fit(periods):
        t_end = periods * period
        ts = t_end - period + frac * period
        vals = duhamel_temperature(x, ts, sig, medium, rtol=quad_rtol)
        basis = np.column_stack([np.ones_like(ts), np.cos(omega * ts), np.sin(omega * ts)])
        (_, b, c), *_ = np.linalg.lstsq(basis, vals, rcond=None)
        amp = math.hypot(b, c) / harmonic.amplitude
        lag = wrap_phase(math.atan2(-c, b) - harmonic.phase)
        return amp, lag, t_end

    periods = min_periods
    prev = fit(periods)
    while True:
        periods *= 2
        if periods > max_periods:
            raise AccuracyError("transient did not settle", estimate=prev)
        cur = fit(periods)
        if (
            abs(cur[0] - prev[0]) <= settle_rtol * abs(cur[0])
            and abs(wrap_phase(cur[1] - prev[1])) <= settle_rtol
        ):
            return cur
        prev = cur


# ---------------------------------------------------------------------------
# Modulated sources
# ---------------------------------------------------------------------------


def phase_modulated_expansion(omega: float, B: float, omega_m: float, K: int) -> SignalSpec:
    """Truncated Bessel expansion of ``cos(omega t + B sin(omega_m t))``.

    Keeps orders ``-K..K``; sidebands that land on negative frequencies are
    folded back, and a sideband landing exactly on zero frequency goes to
    the constant term.
    """
    if K < 0:
        raise DomainError("truncation order must be >= 0")
    comps = [
        (bessel_j(k, B), (omega + k * omega_m) / (2.0 * np.pi), 0.0) for k in range(-K, K + 1)
    ]
    return SignalSpec.from_components(comps)


def amplitude_modulated_expansion(omega: float, M: float, omega_a: float, phi: float) -> SignalSpec:
    """``(1 + M cos(omega_a t)) cos(omega t + phi)`` as carrier plus two sidebands.

    Both sidebands carry the carrier phase ``phi``.
    """
    two_pi = 2.0 * np.pi
    comps = [
        (1.0, omega / two_pi, phi),
        (M / 2.0, (omega + omega_a) / two_pi, phi),
        (M / 2.0, (omega - omega_a) / two_pi, phi),
    ]
    return SignalSpec.from_components(comps)
