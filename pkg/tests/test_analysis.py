import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermolocate.analysis import distinguishability_map, dynamic_distinguishability, static_distinguishability
from thermolocate.exceptions import DomainError
from thermolocate.model import Medium, SignalSpec, SourceSpec

Q_TOTAL = 29000 * 4 / 3 * math.pi * 0.01**3
STATIC = SourceSpec((0, 0, 0), 0.01, SignalSpec.constant(Q_TOTAL))


def wave(*freqs):
    return SourceSpec((0, 0, 0), 0.01, SignalSpec.from_components([(Q_TOTAL, f, 0.0) for f in freqs], dc_offset=Q_TOTAL))


def test_static_formula_example():
    a = 1e-7
    expected = Q_TOTAL / (4 * math.pi * a) * (1 / 0.02 - 1 / math.hypot(0.02, 0.05))
    assert static_distinguishability(STATIC, 0.02, Medium(a)) == pytest.approx(expected, rel=1e-12)


def test_zero_offset_gives_zero_contrast():
    assert static_distinguishability(STATIC, 0.03, Medium(1e-6), offset=0.0) == 0.0
    assert dynamic_distinguishability(wave(0.5), 0.03, Medium(1e-6), offset=0.0) == 0.0


def test_depth_must_exceed_the_radius():
    with pytest.raises(DomainError):
        static_distinguishability(STATIC, 0.01, Medium(1e-7))
    with pytest.raises(DomainError):
        dynamic_distinguishability(wave(0.5), 0.005, Medium(1e-7))


def test_frequency_lookup():
    src = wave(0.15, 1.0)
    with pytest.raises(DomainError):
        dynamic_distinguishability(src, 0.02, Medium(1e-6))
    with pytest.raises(DomainError):
        dynamic_distinguishability(src, 0.02, Medium(1e-6), f=0.5)


@settings(max_examples=60, deadline=None)
@given(
    d=st.floats(0.011, 0.08),
    dd=st.floats(1e-4, 0.05),
    log_a=st.floats(-7, -5),
)
def test_static_contrast_is_positive_and_decreasing_in_depth(d, dd, log_a):
    m = Medium(10**log_a)
    near = static_distinguishability(STATIC, d, m)
    far = static_distinguishability(STATIC, d + dd, m)
    assert near > far > 0


@settings(max_examples=60, deadline=None)
@given(d=st.floats(0.011, 0.05), dd=st.floats(1e-4, 0.02), log_a=st.floats(-6.5, -5))
def test_dynamic_contrast_is_decreasing_in_depth(d, dd, log_a):
    m = Medium(10**log_a)
    src = wave(0.15)
    assert dynamic_distinguishability(src, d, m) >= dynamic_distinguishability(src, d + dd, m) >= 0


def test_zero_frequency_limit_matches_static():
    m = Medium(1e-6)
    for f in (1e-8, 1e-10):
        dyn = dynamic_distinguishability(wave(f), 0.02, m)
        assert dyn == pytest.approx(static_distinguishability(STATIC, 0.02, m), rel=1e-3)


def test_higher_frequency_attenuates_more():
    src = wave(0.15, 1.0)
    for a in (1e-7, 1e-6, 1e-5):
        for d in (0.015, 0.03):
            m = Medium(a)
            assert dynamic_distinguishability(src, d, m, f=1.0) < dynamic_distinguishability(src, d, m, f=0.15)


def test_map_sweep():
    depths = np.linspace(0.0125, 0.05, 16)
    alphas = np.logspace(-7, -5, 9)
    mp = distinguishability_map(wave(0.15, 0.5, 1.0), depths, alphas, f=0.5)
    assert mp.values.shape == (16, 9) and mp.frequency == 0.5 and mp.power == Q_TOTAL
    assert np.all(mp.values >= 0)
    assert np.all(np.diff(mp.values, axis=0) <= 0)
    rows = list(mp.rows())
    assert len(rows) == 144 and rows[0] == (depths[0], alphas[0], 0.5, mp.values[0, 0])
    st_map = distinguishability_map(STATIC, depths, alphas)
    assert st_map.frequency == 0.0
    np.testing.assert_allclose(st_map.values[3, 4], static_distinguishability(STATIC, depths[3], Medium(alphas[4])))
