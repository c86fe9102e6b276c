"""Synthetic test signals with a known glottal source.

Used for the inverse-filter and round-trip checks, and handy for demos:
a source pulse train (analytic or from the fold model) is passed through
an all-pole vocal tract and a first-difference lip radiation.
"""

from __future__ import annotations

import numpy as np
from scipy import signal as sps
from scipy.interpolate import CubicSpline

from ._validation import check_scalar
from .exceptions import DomainError
from .glottal import PhysicalConstants, SampledSignal, estimate_period, flow_from_displacement
from .model import DEFAULT_DT, simulate

#: formant (centre Hz, bandwidth Hz) pairs of a few vowels
VOWELS = {
    "a": ((700.0, 80.0), (1220.0, 90.0), (2600.0, 120.0)),
    "i": ((300.0, 50.0), (2300.0, 120.0), (3000.0, 150.0)),
    "e": ((500.0, 60.0), (1500.0, 100.0), (2500.0, 120.0)),
}


def rosenberg_pulses(sample_rate, f0, duration, open_quotient=0.6, speed_quotient=2.0):
    """Rosenberg glottal-flow pulse train with unit peak."""
    check_scalar(f0, "f0", low=0.0, include_low=False)
    n = int(round(sample_rate * duration))
    period = sample_rate / f0
    t = np.arange(n) % period
    rise = open_quotient * period * speed_quotient / (1.0 + speed_quotient)
    fall = open_quotient * period / (1.0 + speed_quotient)
    opening = 0.5 * (1.0 - np.cos(np.pi * t / rise))
    closing = np.cos(np.pi * (t - rise) / (2.0 * fall))
    return np.where(t < rise, opening, np.where(t < rise + fall, closing, 0.0))


def vocal_tract(formants, sample_rate):
    """Denominator of an all-pole filter with one resonator per formant."""
    a = np.array([1.0])
    for freq, bw in formants:
        if not 0.0 < freq < sample_rate / 2:
            raise DomainError(f"formant {freq} Hz outside (0, {sample_rate / 2}) Hz")
        r = np.exp(-np.pi * bw / sample_rate)
        a = np.convolve(a, [1.0, -2.0 * r * np.cos(2.0 * np.pi * freq / sample_rate), r * r])
    return a


def synthesize_vowel(source, sample_rate, formants=VOWELS["a"], peak=0.9):
    """Pressure signal of ``source`` (a flow) after radiation and the vocal tract."""
    dflow = np.diff(np.asarray(source, dtype=float), prepend=source[0])
    p = sps.lfilter([1.0], vocal_tract(formants, sample_rate), dflow)
    scale = np.max(np.abs(p))
    if scale == 0.0:
        return SampledSignal(float(sample_rate), p)
    return SampledSignal(float(sample_rate), peak * p / scale)


def model_flow_signal(params, f0, sample_rate, duration, k=None, dt=DEFAULT_DT, settle=50.0):
    """Model glottal flow rescaled so that one limit-cycle period lasts ``1 / f0`` seconds.

    The first ``settle`` model time units are discarded. Returns the flow in
    Hz and the time scale (model units per second).
    """
    k = PhysicalConstants() if k is None else k
    probe = flow_from_displacement(simulate(params, dt, settle + 100.0), k).samples
    period = estimate_period(probe[int(settle / dt):], dt, 2.0, 30.0)
    time_scale = period * f0
    t_model = settle + duration * time_scale
    flow = flow_from_displacement(simulate(params, dt, t_model), k).samples
    grid = dt * np.arange(len(flow))
    t = np.arange(int(round(duration * sample_rate))) / sample_rate
    samples = CubicSpline(grid, flow)(settle + t * time_scale)
    return SampledSignal(float(sample_rate), samples), time_scale


def normalized_cross_correlation(x, y, max_lag=0):
    """Largest Pearson correlation of ``x`` and ``y`` over integer lags up to ``max_lag``."""
    x = np.asarray(x, dtype=float) - np.mean(x)
    y = np.asarray(y, dtype=float) - np.mean(y)
    if x.shape != y.shape:
        raise DomainError("signals must have equal length")
    best = -1.0
    for lag in range(-max_lag, max_lag + 1):
        a, b = (x[lag:], y[: len(y) - lag]) if lag >= 0 else (x[:lag], y[-lag:])
        denom = np.sqrt(np.dot(a, a) * np.dot(b, b))
        if denom > 0:
            best = max(best, float(np.dot(a, b) / denom))
    return best
