"""End-to-end acceptance checks, one test per criterion, at the stated tolerances.

Each test records a single PASS/FAIL line, collected in the terminal summary.
Criteria that cannot be met as stated are run faithfully and left failing;
the analysis is in the decisions ledger.
"""

import itertools
import math
import time

import numpy as np

from thermolocate.cli import candidate_grid, main, reconstruct_patch, simulate_patch
from thermolocate.config import Scenario, resolve_config
from thermolocate.model import (
    Harmonic,
    Medium,
    SignalSpec,
    SourceSpec,
    amplitude_modulated_expansion,
    bessel_j,
    dynamic_point_temperature,
    fit_steady_oscillation,
    static_factor,
    static_point_temperature,
    steady_spectral_response,
    wrap_phase,
)
from thermolocate.reconstruct import location_error, make_candidate_grid, reconstruct_dynamic, reconstruct_static
from thermolocate.simulator import (
    DomainSpec,
    DynamicPatch,
    MeasurementPatch,
    RobinBoundary,
    add_noise,
    build_domain,
    cap_points,
    detrend,
    stability_limit,
    steady_state,
    step_heat,
)
from thermolocate.spectral import spectrum

AXIS = np.array([40.0, 40.0, 50.0])
CAP = math.radians(30)


# --- 1 ----------------------------------------------------------------------------


def _oracle_case(r, f, alpha):
    m = Medium(alpha)
    gain, lag, _ = fit_steady_oscillation(r, Harmonic(1.0, f), m)
    resp = steady_spectral_response(r, f, m)
    rel = abs(gain - resp.gain) / resp.gain
    dphi = abs(wrap_phase(lag - resp.phase_shift))
    return rel, dphi


def test_1_oracle_equivalence(acceptance_line):
    t0 = time.perf_counter()
    grid = list(itertools.product((0.02, 0.05), (0.15, 0.5, 1.0), (1e-7, 1e-6)))
    admissible = [(r, f, a) for r, f, a in grid if r * math.sqrt(math.pi * f / a) <= 8]
    listed = [_oracle_case(*c) for c in admissible]
    # the listed set is empty, so the same f and alpha are checked at distances with D = 1, 4, 8
    substitute = []
    for f, a, D in itertools.product((0.15, 0.5, 1.0), (1e-7, 1e-6), (1.0, 4.0, 8.0)):
        r = D / math.sqrt(math.pi * f / a)
        substitute.append(_oracle_case(r, f, a))
    elapsed = time.perf_counter() - t0
    worst_rel = max(c[0] for c in listed + substitute)
    worst_phase = max(c[1] for c in listed + substitute)
    ok = worst_rel < 0.01 and worst_phase < 0.05 and elapsed < 60
    acceptance_line(
        1,
        ok,
        f"listed cases admissible {len(admissible)}/{len(grid)}; D in {{1,4,8}} substitute over 18 cases: "
        f"max rel amp err {worst_rel:.2e}, max phase err {worst_phase:.2e} rad, {elapsed:.1f} s",
    )
    assert ok


# --- 2 ----------------------------------------------------------------------------


def _local_spacing(grid, index):
    """Largest distance from a node to its lattice neighbours."""
    n = grid.resolution
    c = grid.centers.reshape(*n, 3)
    ir, it, ip = np.unravel_index(index, n)
    here = c[ir, it, ip]
    nbrs = [c[ir, it, (ip + 1) % n[2]], c[ir, it, (ip - 1) % n[2]]]
    nbrs += [c[k, it, ip] for k in (ir - 1, ir + 1) if 0 <= k < n[0]]
    nbrs += [c[ir, k, ip] for k in (it - 1, it + 1) if 0 <= k < n[1]]
    return max(float(np.linalg.norm(v - here)) for v in nbrs)


def test_2_static_closed_loop(acceptance_line):
    med = Medium(2.0)
    grid = make_candidate_grid(AXIS, CAP, (12, 12, 12), (30.0, 86.0), 90.0)
    pts = cap_points(90.0, AXIS, CAP, 2.0)
    rng = np.random.default_rng(2)
    node_ok, worst_q, worst_c, worst_off = True, 0.0, 0.0, 0.0
    for i in rng.choice(len(grid), 6, replace=False):
        x0 = grid.centers[i]
        patch = MeasurementPatch(pts, static_point_temperature(np.linalg.norm(pts - x0, axis=1), 5.0, 20.0, med), 90.0)
        rec = reconstruct_static(patch, grid, med)
        node_ok &= rec.index == i
        worst_q = max(worst_q, abs(rec.Q - 5.0))
        worst_c = max(worst_c, abs(rec.C - 20.0))
    # the spherical lattice is anisotropic, so the bound uses the spacing around the truth
    worst_ratio = 0.0
    for _ in range(6):
        j = int(rng.integers(len(grid)))
        h = _local_spacing(grid, j)
        x0 = grid.centers[j] + rng.uniform(-0.3, 0.3, 3) * h
        patch = MeasurementPatch(pts, static_point_temperature(np.linalg.norm(pts - x0, axis=1), 5.0, 20.0, med), 90.0)
        err = location_error(reconstruct_static(patch, grid, med).x0, x0)
        worst_off = max(worst_off, err)
        worst_ratio = max(worst_ratio, err / (math.sqrt(3) * h))
    ok = node_ok and worst_q <= 1e-6 and worst_c <= 1e-6 and worst_ratio <= 1.0
    acceptance_line(
        2,
        ok,
        f"exact node {node_ok}; |dQ| {worst_q:.1e}, |dC| {worst_c:.1e}; off-node error {worst_off:.2f}, "
        f"at most {worst_ratio:.2f} x sqrt(3) x local spacing",
    )
    assert ok


# --- 3 ----------------------------------------------------------------------------


def test_3_dynamic_closed_loop(acceptance_line):
    cfg = resolve_config({"preset": "halfball_dynamic_A1", "reconstruction": {"resolution": [12, 12, 12]}})
    scen = Scenario(cfg)
    med = scen.medium
    src = scen.sources[0]
    S, f, phi0 = src.signal.harmonics[0].amplitude, 0.2, 0.4
    grid = candidate_grid(scen, 85.0)
    i = int(np.argmin(np.linalg.norm(grid.centers - np.asarray(src.center), axis=1)))
    x0 = grid.centers[i]
    pts = cap_points(85.0, scen.extraction["cap_direction"], scen.extraction["cap_angle"], 0.5)
    t = np.arange(100) / 10.0
    truth = SourceSpec(tuple(x0), 0.0, SignalSpec.cosine(S, f, phi0))
    series = dynamic_point_temperature(pts[:, None, :], t[None, :], truth, med)
    spec = spectrum(DynamicPatch(pts, series, 10.0, 0.0, 85.0))
    rc = scen.reconstruction
    rec = reconstruct_dynamic(spec, grid, med, a_t=rc["a_t"], m_t=rc["m_t"], anchor_k=rc["anchor_k"])
    n = spec.bin_of(f)
    s_err = abs(rec.S_amp[n] - S) / S
    p_err = abs(wrap_phase(rec.phi_amp[n] - phi0))
    others = np.flatnonzero(np.delete(rec.S_amp, n))
    ok = rec.index_amp == i and s_err <= 0.01 and p_err <= 0.05 and others.size == 0
    acceptance_line(
        3,
        ok,
        f"amp-criterion node exact {rec.index_amp == i} (phase criterion error "
        f"{location_error(rec.x0_phase, x0):.2f}); S rel err {s_err:.1e}, phi err {p_err:.1e}; "
        f"nonzero off-source bins {others.size}",
    )
    assert ok


# --- 4 ----------------------------------------------------------------------------

NOISE = {0: "", 1: "_noise1", 5: "_noise5", 10: "_noise10"}
SEEDS = range(9)


def _medians():
    table = {}
    for label in "ABC":
        base = resolve_config({"preset": f"halfball_static_{label}1", "reconstruction": {"resolution": [20, 20, 20]}})
        clean = simulate_patch(base)
        for pct, suffix in NOISE.items():
            cfg = resolve_config({"preset": f"halfball_static_{label}1{suffix}", "reconstruction": {"resolution": [20, 20, 20]}})
            nz = Scenario(cfg).noise
            errs = []
            for seed in SEEDS:
                patch = add_noise(clean, nz["percent"], seed, nz["literal_variance"])
                report, *_ = reconstruct_patch(cfg, patch)
                errs.append(report["table_row"]["location_error"])
            table[label, pct] = float(np.median(errs))
    return table


def test_4_error_trend_over_depth_and_noise(acceptance_line):
    t0 = time.perf_counter()
    table = _medians()
    elapsed = time.perf_counter() - t0
    noise = sorted(NOISE)
    by_source = all(table["A", p] <= table["B", p] <= table["C", p] for p in noise)
    by_noise = all(table[s, a] <= table[s, b] for s in "ABC" for a, b in zip(noise, noise[1:]))
    a1 = table["A", 0] <= 15.0
    ok = by_source and by_noise and a1 and elapsed <= 1800
    rows = "; ".join(f"{s}: " + ", ".join(f"{table[s, p]:.1f}" for p in noise) for s in "ABC")
    acceptance_line(
        4,
        ok,
        f"(a) A<=B<=C {by_source}, (b) monotone in noise {by_noise}, A1 {table['A', 0]:.1f} <= 15 {a1}; "
        f"medians at 0/1/5/10% [{rows}]; {elapsed:.0f} s",
    )
    assert ok


# --- 5 ----------------------------------------------------------------------------


def test_5_simulator_physics(acceptance_line):
    med = Medium(2.0)
    # energy conservation, insulated and source-free
    d = build_domain(DomainSpec(10.0, 1.0))
    bd = RobinBoundary(0.0, 0.0)
    T = np.where(d.mask, np.random.default_rng(5).uniform(10, 30, d.shape), 0.0)
    src = SourceSpec((0, 0, 5), 0.0, SignalSpec())
    dt = stability_limit(d, med, bd)
    drift = 0.0
    for _ in range(20):
        new = step_heat(T, src, med, bd, dt, d)
        drift = max(drift, abs(new[d.mask].sum() - T[d.mask].sum()) / abs(T[d.mask].sum()))
        T = new
    # exterior of a ball source against the equal-power point source, beyond 2R
    m1 = Medium(1.0)
    big = build_domain(DomainSpec(100.0, 2.0))
    c = np.array([0.0, 0.0, 50.0])
    T = steady_state(big, SourceSpec(tuple(c), 5.0, SignalSpec.constant(1000.0)), m1, RobinBoundary(1.0, 0.0))
    r = np.linalg.norm(big.coords() - c, axis=-1)
    sel = big.mask & (r >= 10.0) & (r <= 15.0)
    model = 1000.0 * static_factor(r[sel], m1)
    offset = np.mean(T[sel] - model)
    ext = float(np.max(np.abs(T[sel] - offset - model) / model))
    # steady patch shape on scenario A1
    patch = simulate_patch(resolve_config({"preset": "halfball_static_A1"}))
    rr = np.linalg.norm(patch.positions - AXIS, axis=1)
    corr = float(np.corrcoef(patch.values, static_factor(rr, med))[0, 1])
    ok = drift <= 1e-10 and ext <= 0.03 and corr >= 0.95
    acceptance_line(5, ok, f"energy drift/step {drift:.1e}; exterior-sphere max rel err {ext:.3f}; A1 correlation {corr:.4f}")
    assert ok


# --- 6 ----------------------------------------------------------------------------


def test_6_spectral_exactness(acceptance_line):
    rng = np.random.default_rng(6)
    N, fs = 100, 10.0
    t = np.arange(N) / fs
    pos = np.zeros((1, 3))
    worst_bin = 0.0
    for n in range(1, N // 2):
        A, ph = rng.uniform(0.1, 10), rng.uniform(-3, 3)
        sp = spectrum(DynamicPatch(pos, (A * np.cos(2 * np.pi * n * fs / N * t + ph))[None], fs))
        worst_bin = max(worst_bin, abs(sp.amplitudes[0, n] - A), abs(wrap_phase(sp.phases[0, n] - ph)))
    worst_parseval = 0.0
    for size in (64, 65, 100, 101):
        x = rng.normal(0, 3, size)
        A = spectrum(DynamicPatch(pos, x[None], fs)).amplitudes[0]
        power = A[0] ** 2 + (np.sum(A[1:-1] ** 2) / 2 + A[-1] ** 2 if size % 2 == 0 else np.sum(A[1:] ** 2) / 2)
        worst_parseval = max(worst_parseval, abs(power - np.mean(x**2)) / np.mean(x**2))
    affine = rng.uniform(-5, 5, (20, 1)) + rng.uniform(-2, 2, (20, 1)) * t
    worst_trend = float(np.abs(detrend(affine)).max())
    ok = worst_bin <= 1e-9 and worst_parseval <= 1e-6 and worst_trend <= 1e-10
    acceptance_line(6, ok, f"integer-bin err {worst_bin:.1e}; Parseval rel err {worst_parseval:.1e}; affine residual {worst_trend:.1e}")
    assert ok


# --- 7 ----------------------------------------------------------------------------


def _pm_error(K):
    from thermolocate.model import phase_modulated_expansion

    w, wm, B = 2 * math.pi * 1.0, 2 * math.pi * 0.2, 2.0
    t = np.linspace(0, 5, 5001)
    return float(np.abs(phase_modulated_expansion(w, B, wm, K)(t) - np.cos(w * t + B * np.sin(wm * t))).max())


def test_7_modulation_expansions(acceptance_line):
    pm8, pm9 = _pm_error(8), _pm_error(9)
    w, wa, M, phi = 2 * math.pi, 0.4 * math.pi, 0.7, 0.3
    t = np.linspace(0, 10, 2001)
    am = float(np.abs(amplitude_modulated_expansion(w, M, wa, phi)(t) - (1 + M * np.cos(wa * t)) * np.cos(w * t + phi)).max())
    sidelobe = abs(bessel_j(0, 2.0)) < abs(bessel_j(1, 2.0))
    ok = pm8 <= 1e-6 and am <= 1e-12 and sidelobe
    acceptance_line(
        7,
        ok,
        f"PM B=2 K=8 max err {pm8:.2e} (K=9: {pm9:.2e}, info only); AM identity err {am:.1e}; |J0(2)| < |J1(2)| {sidelobe}",
    )
    assert ok


# --- 8 ----------------------------------------------------------------------------

RUNS = [
    ("simulate", "halfball_static_A1_noise5", []),
    ("reconstruct", "halfball_static_A1_noise5", ["--penalty-field", "--threads", "2"]),
    ("simulate", "halfball_dynamic_A1_noise1", []),
    ("distinguishability", "tissue_static_map", []),
    ("distinguishability", "tissue_dynamic_map", []),
]


def _cli_outputs(out):
    for cmd, preset, extra in RUNS:
        assert main([cmd, "--preset", preset, "--out", str(out / preset), "--seed", "11", *extra]) == 0
    return {p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}


def test_8_determinism(tmp_path, acceptance_line):
    a = _cli_outputs(tmp_path / "a")
    b = _cli_outputs(tmp_path / "b")
    same = a.keys() == b.keys() and all(a[k] == b[k] for k in a)
    ok = same and len(a) >= 8
    acceptance_line(8, ok, f"{len(a)} output files from {len(RUNS)} preset runs, byte-identical across repeats: {same}")
    assert ok
