"""Localisation of buried point-like heat sources from boundary temperatures."""

__version__ = "0.1.0"

from .exceptions import (  # noqa: E402
    AccuracyError,
    ConfigError,
    DataMismatchError,
    DomainError,
    NoSolutionError,
    StabilityError,
    ThermolocateError,
    UndefinedMeanError,
)
from .model import (  # noqa: E402
    Harmonic,
    Medium,
    SignalSpec,
    SourceSpec,
    SpectralResponse,
    amplitude_modulated_expansion,
    ball_volume,
    bessel_j,
    duhamel_temperature,
    dynamic_point_temperature,
    field_temperature,
    fit_steady_oscillation,
    gaussian_kernel,
    phase_modulated_expansion,
    static_factor,
    static_point_temperature,
    steady_spectral_response,
)
from .simulator import (  # noqa: E402
    DomainSpec,
    DynamicPatch,
    MeasurementPatch,
    RobinBoundary,
    Stage,
    StageSchedule,
    add_noise,
    build_domain,
    detrend,
    extract_patch,
    run_stages,
    step_heat,
)
from .spectral import SpectrumPatch, average_phase, normalize_phase, spectrum, unwrap_phase  # noqa: E402
from .reconstruct import (  # noqa: E402
    CandidateGrid,
    DynamicReconstruction,
    StaticReconstruction,
    fit_power_AQ,
    make_candidate_grid,
    reconstruct_dynamic,
    reconstruct_static,
)
from .analysis import (  # noqa: E402
    DistinguishabilityMap,
    distinguishability_map,
    dynamic_distinguishability,
    static_distinguishability,
)
