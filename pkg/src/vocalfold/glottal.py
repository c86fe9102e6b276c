"""Speech ingestion and both sides of the glottal-flow comparison.

The measured side estimates the volume velocity at the glottis from a
microphone signal by LPC inverse filtering; the model side converts fold
displacements into flow through the glottal aperture.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy import signal as sps
from scipy.io import wavfile
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_finite_array, check_scalar
from .exceptions import (
    CorruptWavError,
    SignalError,
    DomainError,
    EmptyAudioError,
    NoVoicingError,
    UnsupportedEncodingError,
)

log = logging.getLogger(__name__)

#: order of the all-pole glottal-pulse model used inside the inverse filter
GLOTTAL_ORDER = 4
#: pole of the leaky integrator that turns flow derivative into flow
INTEGRATOR_LEAK = 0.99
VOICING_THRESHOLD = 0.3


@dataclass(frozen=True)
class SampledSignal:
    """A mono audio signal sampled at ``sample_rate`` Hz."""

    sample_rate: float
    samples: np.ndarray = field(repr=False)
    label: str = ""

    def __post_init__(self):
        check_scalar(self.sample_rate, "sample_rate", low=0.0, include_low=False)
        object.__setattr__(self, "samples", check_finite_array(self.samples, "samples", ndim=1))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self):
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class PhysicalConstants:
    """Constants entering the two flow expressions (CGS units).

    ``xi0`` and ``fold_length_d`` default to 0.1 cm and 1.75 cm. The air
    and tract values are standard speech-acoustics references.
    ``midpoint_velocity_vc`` has no measured default and acts as a gain
    that the estimator recalibrates.
    """

    xi0: float = 0.1
    fold_length_d: float = 1.75
    air_density_rho: float = 1.14e-3
    sound_speed_c: float = 3.5e4
    glottal_area_A0: float = 0.3
    midpoint_velocity_vc: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            check_scalar(getattr(self, f.name), f.name, low=0.0, include_low=False)

    @property
    def flow_slope(self):
        """``vc * d``: flow change per unit of summed displacement."""
        return self.midpoint_velocity_vc * self.fold_length_d

    @property
    def pressure_to_flow(self):
        """``A(0) / (rho c)``: converts glottal pressure to volume velocity."""
        return self.glottal_area_A0 / (self.air_density_rho * self.sound_speed_c)


@dataclass(frozen=True)
class GlottalFlow:
    """Sampled volume velocity.

    Exactly one of ``sample_rate`` (physical time, Hz) and ``dt``
    (dimensionless model grid) is set.
    """

    samples: np.ndarray = field(repr=False)
    source: str = "measured"
    sample_rate: float | None = None
    dt: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "samples", check_finite_array(self.samples, "flow samples", ndim=1))
        if self.source not in ("measured", "model"):
            raise DomainError(f"source must be 'measured' or 'model', got {self.source!r}")
        if (self.sample_rate is None) == (self.dt is None):
            raise DomainError("exactly one of sample_rate and dt must be given")
        if self.sample_rate is not None:
            check_scalar(self.sample_rate, "sample_rate", low=0.0, include_low=False)
        else:
            check_scalar(self.dt, "dt", low=0.0, include_low=False)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def on_model_grid(self):
        return self.dt is not None

    @property
    def step(self):
        """Sample spacing in the flow's own time unit."""
        return self.dt if self.on_model_grid else 1.0 / self.sample_rate

    @property
    def t(self):
        return self.step * np.arange(len(self))

    def to_csv(self, path):
        write_flow_csv(self, path)


# --------------------------------------------------------------------- I/O


def load_wav(path):
    """Read a 16-bit PCM or 32-bit float WAV file as samples in ``[-1, 1]``.

    Multi-channel files keep only the first channel and emit a
    ``UserWarning``.

    Raises
    ------
    UnsupportedEncodingError, CorruptWavError, EmptyAudioError
    """
    path = Path(path)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except (ValueError, EOFError, IndexError) as exc:
        raise CorruptWavError(f"{path}: {exc}") from exc
    if data.dtype == np.int16:
        samples = data.astype(float) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(float)
    else:
        raise UnsupportedEncodingError(f"{path}: unsupported sample format {data.dtype}")
    if samples.ndim == 2:
        if samples.shape[1] > 1:
            warnings.warn(f"{path}: {samples.shape[1]} channels, using the first", UserWarning, stacklevel=2)
        samples = samples[:, 0]
    if samples.size == 0:
        raise EmptyAudioError(f"{path}: no audio samples")
    if not np.all(np.isfinite(samples)):
        raise CorruptWavError(f"{path}: non-finite samples")
    return SampledSignal(float(rate), samples, label=str(path))


def write_wav(path, sig, encoding="pcm16"):
    """Write ``sig`` as mono WAV; ``encoding`` is ``'pcm16'`` or ``'float32'``."""
    x = np.asarray(sig.samples)
    if encoding == "pcm16":
        data = np.clip(np.round(x * 32767.0), -32768, 32767).astype(np.int16)
    elif encoding == "float32":
        data = x.astype(np.float32)
    else:
        raise DomainError(f"unknown encoding {encoding!r}")
    wavfile.write(Path(path), int(round(sig.sample_rate)), data)


def write_flow_csv(flow, path):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "u0"])
        for t, u in zip(flow.t, flow.samples):
            writer.writerow([f"{t:.17g}", f"{u:.17g}"])


def read_flow_csv(path, source="measured"):
    """Read a ``t,u0`` CSV on a uniform grid of model time."""
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 2 or data.shape[0] < 2:
        raise SignalError(f"{path}: expected columns t,u0 with at least two rows")
    steps = np.diff(data[:, 0])
    dt = float(np.mean(steps))
    if dt <= 0 or np.max(np.abs(steps - dt)) > 1e-9 * max(1.0, abs(data[-1, 0])):
        raise DomainError(f"{path}: time column is not uniformly spaced")
    return GlottalFlow(data[:, 1], source=source, dt=dt)


# ------------------------------------------------------------- model side


def flow_from_displacement(traj, k=None):
    """Volume velocity ``vc * d * (2 xi0 + xi_l + xi_r)`` on the trajectory grid."""
    k = PhysicalConstants() if k is None else k
    u = k.flow_slope * (2.0 * k.xi0 + traj.xi_l + traj.xi_r)
    return GlottalFlow(u, source="model", dt=traj.dt)


# ---------------------------------------------------------------- pitch


def autocorrelation(x):
    """Biased autocorrelation normalised so that lag 0 equals one."""
    x = np.asarray(x, dtype=float) - np.mean(x)
    n = x.shape[0]
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spectrum = np.fft.rfft(x, nfft)
    r = np.fft.irfft(spectrum * np.conj(spectrum), nfft)[:n]
    if r[0] <= 0.0:
        return np.zeros(n)
    return r / r[0]


def estimate_period(samples, step, min_period, max_period, threshold=VOICING_THRESHOLD):
    """Fundamental period from the strongest autocorrelation peak in a lag band.

    Among the local maxima inside ``[min_period, max_period]`` the
    earliest one reaching 85% of the band maximum is chosen so that
    multiples of the true period are not preferred. The lag is refined
    by parabolic interpolation.

    Raises
    ------
    NoVoicingError
        If the signal is constant or no peak exceeds ``threshold``.
    """
    x = check_finite_array(samples, "samples", ndim=1, min_length=3)
    n = x.shape[0]
    # undo the (n - lag) / n taper of the biased estimate so the peak is not pulled early
    r = autocorrelation(x) * n / (n - np.arange(n))
    lo = max(1, int(np.ceil(min_period / step)))
    hi = min(x.shape[0] - 2, int(np.floor(max_period / step)))
    if hi <= lo:
        raise NoVoicingError("signal too short for the requested pitch range")
    band = r[lo - 1 : hi + 2]
    inner = band[1:-1]
    peaks = np.nonzero((inner > band[:-2]) & (inner >= band[2:]))[0]
    if peaks.size == 0:
        raise NoVoicingError("no autocorrelation peak in the pitch band")
    values = inner[peaks]
    best = values.max()
    if best < threshold:
        raise NoVoicingError(f"normalised autocorrelation peak {best:.3f} below voicing threshold {threshold}")
    pick = peaks[np.nonzero(values >= 0.85 * best)[0][0]]
    lag = lo + pick
    y0, y1, y2 = r[lag - 1], r[lag], r[lag + 1]
    denom = y0 - 2.0 * y1 + y2
    shift = 0.5 * (y0 - y2) / denom if denom != 0.0 else 0.0
    return (lag + shift) * step


def estimate_f0(sig, fmin=50.0, fmax=500.0, threshold=VOICING_THRESHOLD):
    """Fundamental frequency in Hz by autocorrelation in the ``fmin..fmax`` band."""
    period = estimate_period(sig.samples, 1.0 / sig.sample_rate, 1.0 / fmax, 1.0 / fmin, threshold)
    return 1.0 / period


# --------------------------------------------------------------- LPC


def levinson(r, order):
    """Levinson-Durbin recursion.

    Returns the prediction polynomial ``a`` (``a[0] == 1``), the
    reflection coefficients and the final prediction error.
    """
    a = np.zeros(order + 1)
    a[0] = 1.0
    k = np.zeros(order)
    err = r[0]
    for i in range(1, order + 1):
        if err <= 0.0:
            k[i - 1 :] = np.nan
            break
        acc = r[i] + np.dot(a[1:i], r[i - 1 : 0 : -1])
        ki = -acc / err
        k[i - 1] = ki
        a[1 : i + 1] = a[1 : i + 1] + ki * np.concatenate((a[i - 1 : 0 : -1], [1.0]))
        err *= 1.0 - ki * ki
    return a, k, err


def reflection_to_lpc(k):
    """Step-up recursion from reflection coefficients to the LPC polynomial."""
    a = np.array([1.0])
    for ki in k:
        ext = np.concatenate((a, [0.0]))
        a = ext + ki * ext[::-1]
    return a


def lpc(x, order):
    """Autocorrelation-method LPC of ``x`` with a tiny white-noise floor."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    r = np.array([np.dot(x[: n - j], x[j:]) for j in range(order + 1)])
    r[0] *= 1.0 + 1e-9
    return levinson(r, order)


def _stable(k):
    return bool(np.all(np.isfinite(k)) and np.all(np.abs(k) < 1.0))


def _leaky_integrate(x, leak=INTEGRATOR_LEAK):
    return sps.lfilter([1.0], [1.0, -leak], x)


# -------------------------------------------------------- inverse filter


@dataclass(frozen=True)
class InverseFilterConfig:
    """Framing and LPC settings for glottal inverse filtering.

    ``lpc_order=None`` selects ``sample_rate / 1000 + 2``.
    """

    lpc_order: int | None = None
    frame_ms: float = 32.0
    hop_ms: float = 16.0
    preemphasis: float = 0.97
    lowpass_hz: float = 4000.0

    def __post_init__(self):
        if self.lpc_order is not None and (isinstance(self.lpc_order, bool) or int(self.lpc_order) != self.lpc_order or self.lpc_order < 1):
            raise DomainError(f"lpc_order must be a positive integer, got {self.lpc_order!r}")
        check_scalar(self.frame_ms, "frame_ms", low=0.0, include_low=False)
        check_scalar(self.hop_ms, "hop_ms", low=0.0, include_low=False, high=self.frame_ms)
        check_scalar(self.preemphasis, "preemphasis", low=0.0, high=1.0, include_high=False)
        check_scalar(self.lowpass_hz, "lowpass_hz", low=0.0, include_low=False)

    def order_for(self, sample_rate):
        if self.lpc_order is not None:
            return int(self.lpc_order)
        return int(round(sample_rate / 1000.0)) + 2


class InverseFilter(TransformerMixin, BaseEstimator):
    """Frame-wise iterative adaptive LPC inverse filter.

    ``fit`` estimates one vocal-tract polynomial per analysis frame;
    ``transform`` applies the stored polynomials, overlap-adds the
    frame outputs, integrates the result to flow and scales it by
    ``A(0) / (rho c)``. Because ``transform`` is linear in its input,
    fitting once and transforming scaled copies scales the output
    exactly.

    Parameters
    ----------
    config : InverseFilterConfig, optional
    constants : PhysicalConstants, optional
    """

    def __init__(self, config=None, constants=None):
        self.config = config
        self.constants = constants

    def _cfg(self):
        return self.config if self.config is not None else InverseFilterConfig()

    def _k(self):
        return self.constants if self.constants is not None else PhysicalConstants()

    def _prepare(self, sig):
        cfg = self._cfg()
        x = sig.samples
        if 0.5 * sig.sample_rate > cfg.lowpass_hz * 1.0001:
            sos = sps.butter(8, cfg.lowpass_hz, fs=sig.sample_rate, output="sos")
            x = sps.sosfiltfilt(sos, x)
        return x

    def _framing(self, n, fs):
        cfg = self._cfg()
        frame = max(8, int(round(cfg.frame_ms * 1e-3 * fs)))
        hop = max(1, int(round(cfg.hop_ms * 1e-3 * fs)))
        n_frames = max(1, int(np.ceil(max(n - frame, 0) / hop)) + 1)
        return frame, hop, n_frames

    def fit(self, X, y=None):
        sig = X
        cfg = self._cfg()
        x = self._prepare(sig)
        fs = sig.sample_rate
        frame, hop, n_frames = self._framing(x.shape[0], fs)
        p = cfg.order_for(fs)
        if x.shape[0] < 2 * (p + GLOTTAL_ORDER + 1):
            raise DomainError("signal too short for inverse filtering")
        padded = np.concatenate((x, np.zeros(max(0, (n_frames - 1) * hop + frame - x.shape[0]))))
        window = np.hanning(frame)
        energy_floor = 1e-10 * max(np.max(np.abs(x)), 1e-300) ** 2 * frame
        refl = np.full((n_frames, p), np.nan)
        flags = np.zeros(n_frames, dtype=bool)
        voiced = np.zeros(n_frames, dtype=bool)
        for i in range(n_frames):
            seg = padded[i * hop : i * hop + frame]
            if not np.any(seg) or np.dot(seg, seg) <= energy_floor:
                continue
            voiced[i] = True
            k = self._iaif_frame(seg, window, p, cfg.preemphasis)
            if _stable(k):
                refl[i] = k
            else:
                flags[i] = True
        if not voiced.any():
            raise NoVoicingError(f"{sig.label or 'signal'}: no voiced frames")
        good = np.nonzero(voiced & ~flags)[0]
        if good.size == 0:
            raise NoVoicingError("LPC analysis unstable on every frame")
        for i in np.nonzero(~voiced | flags)[0]:
            # interpolate reflection coefficients, which keeps the result stable
            left = good[good < i]
            right = good[good > i]
            if left.size and right.size:
                li, ri = left[-1], right[0]
                w = (i - li) / (ri - li)
                refl[i] = (1.0 - w) * refl[li] + w * refl[ri]
            else:
                refl[i] = refl[left[-1] if left.size else right[0]]
        if flags.any():
            log.warning("%d unstable LPC frame(s) replaced by interpolation", int(flags.sum()))
        self.reflection_ = refl
        self.coefficients_ = np.array([reflection_to_lpc(k) for k in refl])
        self.unstable_frames_ = np.nonzero(flags)[0]
        self.frame_length_ = frame
        self.hop_length_ = hop
        self.sample_rate_ = fs
        return self

    @staticmethod
    def _iaif_frame(seg, window, p, preemphasis):
        emph = sps.lfilter([1.0, -preemphasis], [1.0], seg)
        # 1. remove the glottal spectral tilt with a first-order model
        a_tilt, _, _ = lpc(emph * window, 1)
        y = sps.lfilter(a_tilt, [1.0], emph)
        # 2. first vocal-tract estimate and glottal flow guess
        a_vt, _, _ = lpc(y * window, p)
        g1 = _leaky_integrate(sps.lfilter(a_vt, [1.0], seg))
        # 3. refined glottal model, then refined vocal tract
        a_gl, _, _ = lpc(g1 * window, GLOTTAL_ORDER)
        y2 = _leaky_integrate(sps.lfilter(a_gl, [1.0], seg))
        _, k, _ = lpc(y2 * window, p)
        return k

    def transform(self, X):
        check_is_fitted(self, "coefficients_")
        sig = X
        if sig.sample_rate != self.sample_rate_:
            raise DomainError("signal sample rate differs from the fitted one")
        x = self._prepare(sig)
        n = x.shape[0]
        frame, hop = self.frame_length_, self.hop_length_
        n_frames = self.coefficients_.shape[0]
        total = max(n, (n_frames - 1) * hop + frame)
        padded = np.concatenate((x, np.zeros(total - n)))
        # periodic Hann windows at 50% overlap sum to one
        window = np.hanning(frame + 1)[:-1]
        deriv = np.zeros(total)
        norm = np.zeros(total)
        p = self.coefficients_.shape[1] - 1
        for i, a in enumerate(self.coefficients_):
            start = i * hop
            ctx = max(0, start - p)
            seg = sps.lfilter(a, [1.0], padded[ctx : start + frame])[start - ctx :]
            deriv[start : start + frame] += window * seg
            norm[start : start + frame] += window
        deriv = deriv[:n] / np.where(norm[:n] > 1e-12, norm[:n], 1.0)
        flow = _leaky_integrate(deriv) * self._k().pressure_to_flow
        return GlottalFlow(flow, source="measured", sample_rate=sig.sample_rate)


def inverse_filter(sig, cfg=None, constants=None):
    """Estimate the glottal volume velocity ``A(0)/(rho c) * F^-1(p_m)``.

    Raises
    ------
    NoVoicingError
        If the signal has no energy.
    """
    return InverseFilter(cfg, constants).fit_transform(sig)
