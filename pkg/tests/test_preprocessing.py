import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from freesense.errors import DomainError
from freesense.preprocessing import (
    FilterCoefficients,
    FilterSpec,
    TracePreprocessor,
    apply_filter,
    cutoff_from_hz,
    design_lowpass,
    filter_trace,
)
from freesense.trace import CsiTrace

FS = 1000.0


@pytest.fixture(scope="module")
def coeffs():
    return design_lowpass(FilterSpec.from_hz(10.0, FS, order=4))


def _steady_amplitude(coeffs, freq_hz, n=5000):
    t = np.arange(n) / FS
    out = apply_filter(coeffs, np.sin(2 * np.pi * freq_hz * t))
    return np.max(np.abs(out[-2000:]))


@pytest.mark.parametrize(
    "f_hz, expected",
    [(10.0, 0.0628318530717958), (250.0, math.pi / 2), (25.0, 0.15707963267948966)],
)
def test_cutoff_from_hz(f_hz, expected):
    assert cutoff_from_hz(f_hz, FS) == pytest.approx(expected, abs=1e-12)


def test_cutoff_anchor():
    assert round(cutoff_from_hz(10.0, FS), 2) == 0.06


@pytest.mark.parametrize("f_hz", [500.0, 600.0, 0.0, -1.0])
def test_cutoff_outside_band(f_hz):
    with pytest.raises(DomainError):
        cutoff_from_hz(f_hz, FS)


def test_filter_spec_validation():
    with pytest.raises(DomainError):
        FilterSpec(0.0)
    with pytest.raises(DomainError):
        FilterSpec(math.pi)
    with pytest.raises(DomainError):
        FilterSpec(0.1, order=0)


def test_butterworth_response(coeffs):
    wc = cutoff_from_hz(10.0, FS)
    h = np.abs(coeffs.frequency_response([0.0, wc, 10 * wc]))
    assert h[0] == pytest.approx(1.0, abs=1e-9)
    assert h[1] == pytest.approx(1 / math.sqrt(2), abs=1e-3)
    assert 20 * np.log10(h[2]) <= -40.0


def test_response_is_monotone(coeffs):
    h = np.abs(coeffs.frequency_response(np.linspace(0, math.pi, 512)))
    assert np.all(np.diff(h) <= 1e-12)


@pytest.mark.parametrize("order", [1, 2, 4, 6])
@pytest.mark.parametrize("cutoff_hz", [5.0, 10.0, 100.0])
def test_designs_are_stable(order, cutoff_hz):
    c = design_lowpass(FilterSpec.from_hz(cutoff_hz, FS, order))
    assert c.a[0] == 1.0
    assert c.is_stable()
    assert np.all(np.abs(c.poles()) < 1)


def test_coefficients_require_unit_a0():
    with pytest.raises(DomainError):
        FilterCoefficients([1.0], [2.0, 0.5])


def test_passband_and_stopband(coeffs):
    assert 0.70 <= _steady_amplitude(coeffs, 10.0) <= 0.72
    assert abs(_steady_amplitude(coeffs, 10.0) - 1 / math.sqrt(2)) <= 0.002
    assert _steady_amplitude(coeffs, 100.0) <= 0.01


def test_zero_in_zero_out(coeffs):
    assert np.array_equal(apply_filter(coeffs, np.zeros(100)), np.zeros(100))


def test_step_response_settles_to_one(coeffs):
    out = apply_filter(coeffs, np.ones(3000))
    assert out[-1] == pytest.approx(1.0, abs=1e-3)


@settings(max_examples=50, deadline=None)
@given(
    x=hnp.arrays(np.float64, st.integers(1, 300), elements=st.floats(-10, 10)),
    y=hnp.arrays(np.float64, 300, elements=st.floats(-10, 10)),
    c=st.floats(-5, 5),
)
def test_linearity(coeffs, x, y, c):
    y = y[: x.size]
    lhs = apply_filter(coeffs, c * x + y)
    rhs = c * apply_filter(coeffs, x) + apply_filter(coeffs, y)
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-9)
    assert apply_filter(coeffs, x).shape == x.shape


def test_two_dimensional_input_filters_columns(coeffs, rng):
    x = rng.normal(size=(200, 3))
    out = apply_filter(coeffs, x)
    for col in range(3):
        assert np.allclose(out[:, col], apply_filter(coeffs, x[:, col]), atol=1e-12)


def test_steady_start_has_no_transient(coeffs, rng):
    level = rng.uniform(8.0, 20.0, size=4)
    x = np.tile(level, (600, 1))
    assert np.allclose(apply_filter(coeffs, x, initial="steady"), x, rtol=0, atol=1e-9)
    cold = apply_filter(coeffs, x)
    assert np.all(np.abs(cold[:10] - x[:10]) > 1.0)


def test_steady_start_is_linear(coeffs, rng):
    x, y = rng.normal(size=(2, 300))
    lhs = apply_filter(coeffs, 2.5 * x + y, initial="steady")
    rhs = 2.5 * apply_filter(coeffs, x, initial="steady") + apply_filter(coeffs, y, initial="steady")
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-9)
    assert np.array_equal(apply_filter(coeffs, np.zeros(50), initial="steady"), np.zeros(50))


def test_unknown_initial_state(coeffs):
    with pytest.raises(DomainError):
        apply_filter(coeffs, np.ones(10), initial="warm")
    with pytest.raises(DomainError):
        FilterSpec(0.1, initial="warm")


def test_zero_phase_keeps_length(coeffs, rng):
    x = rng.normal(size=257)
    assert apply_filter(coeffs, x, zero_phase=True).shape == x.shape


@pytest.mark.parametrize("bad", [np.nan, np.inf])
def test_non_finite_input(coeffs, bad):
    with pytest.raises(DomainError):
        apply_filter(coeffs, np.array([1.0, bad, 2.0]))


def test_filter_trace_preserves_shape(make_trace):
    trace = make_trace(n_frames=400)
    out = filter_trace(trace, FilterSpec.from_hz(10.0, trace.sample_rate_hz))
    assert isinstance(out, CsiTrace)
    assert out.frames.shape == trace.frames.shape
    assert out.frames.dtype == np.float32
    assert out.n_streams == 180
    assert np.all(out.frames >= 0)


def test_preprocessor_matches_filter_trace(make_trace):
    trace = make_trace(n_frames=300)
    pre = TracePreprocessor(cutoff_hz=10.0, order=4)
    assert pre.process(trace) == filter_trace(trace, FilterSpec.from_hz(10.0, trace.sample_rate_hz, 4))
    assert pre.coefficients(trace.sample_rate_hz) is pre.coefficients(trace.sample_rate_hz)
