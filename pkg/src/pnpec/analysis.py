"""Feature extraction, C-scan imaging, LOI detection, contrast and SNR studies."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .pnseq import legendre_sequence
from .puc import PucConfig, compress_array, lowpass_mask
from .waveform import BitMapping, SampledWaveform, synth_delta_train, synth_pn_waveform

VISIBILITY_THRESHOLD = 5.0


def time_index(t: float, sample_rate: float, n: int) -> int:
    """Nearest sample to `t`; exact ties go to the lower index."""
    if not 0 <= t < n / sample_rate:
        raise ValueError(f"t={t:g} s outside [0, {n / sample_rate:g}) s")
    x = t * sample_rate
    lower = math.floor(x)
    frac = x - lower
    if abs(frac - 0.5) <= 1e-9:
        idx = lower
    elif abs(frac - 1.0) <= 1e-9:
        idx = lower + 1
    else:
        idx = int(round(x))
    return min(idx, n - 1)


def feature_time_amplitude(hhat: SampledWaveform, t: float) -> float:
    """Trace value at the grid time nearest to `t`."""
    return float(hhat.samples[time_index(t, hhat.sample_rate, len(hhat))])


def _freq_bin(f: float, sample_rate: float, n: int) -> int:
    if not 0 <= f <= sample_rate / 2:
        raise ValueError(f"f={f:g} Hz outside [0, {sample_rate / 2:g}] Hz")
    return min(int(round(f * n / sample_rate)), n // 2)


def feature_spectral_magnitude(hhat: SampledWaveform, f: float) -> float:
    """One-sided DFT magnitude ``|X[k]|`` at the bin nearest to `f`."""
    k = _freq_bin(f, hhat.sample_rate, len(hhat))
    return float(np.abs(np.fft.rfft(hhat.samples)[k]))


@dataclass(frozen=True)
class Feature:
    """Scalar feature of a trace: ``kind`` is ``"time"`` (s) or ``"frequency"`` (Hz)."""

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("time", "frequency"):
            raise ValueError(f"unknown feature kind {self.kind!r}")

    def evaluate(self, traces: np.ndarray, sample_rate: float) -> np.ndarray:
        """Evaluate over the last axis of a trace stack."""
        n = traces.shape[-1]
        if self.kind == "time":
            return traces[..., time_index(self.value, sample_rate, n)].copy()
        k = _freq_bin(self.value, sample_rate, n)
        return np.abs(np.fft.rfft(traces, axis=-1)[..., k])


@dataclass
class CScanImage:
    """Feature map ``values[iy, ix]`` with its grid geometry."""

    values: np.ndarray
    feature: Feature
    pitch: Optional[float] = None
    origin: Optional[tuple] = None

    @property
    def shape(self):
        return self.values.shape


def cscan(dataset, feature: Feature) -> CScanImage:
    """Evaluate `feature` on every trace of a scan dataset."""
    traces = np.asarray(dataset.traces)
    if traces.ndim != 3:
        raise ValueError("dataset traces must have shape (ny, nx, n)")
    missing = np.argwhere(~np.all(np.isfinite(traces), axis=-1))
    if missing.size:
        coords = ", ".join(f"(ix={ix}, iy={iy})" for iy, ix in missing[:20])
        raise ValueError(f"dataset has missing points: {coords}")
    values = feature.evaluate(traces, dataset.sample_rate)
    grid = getattr(dataset, "grid", None)
    return CScanImage(
        values,
        feature,
        pitch=None if grid is None else grid.pitch,
        origin=None if grid is None else tuple(grid.origin),
    )


def find_loi(curves: Sequence, window: Optional[tuple] = None, t_bit: float = 100e-6):
    """
    Lift-off invariant point of a family of traces.

    Minimises ``spread[n] = max_LO hhat[n] - min_LO hhat[n]`` over a search
    window given in seconds; the default ``[2 t_bit, 0.8 period)`` skips the
    correlation peak and the offset tail. Ties resolve to the earliest index.

    Args:
        curves: ``(lift_off, hhat)`` pairs with equal lengths and sample rates.

    Returns:
        ``(index, spread)`` at the minimiser.
    """
    if len(curves) < 2:
        raise ValueError(f"need at least 2 curves, got {len(curves)}")
    waves = [c[1] for c in curves]
    n = len(waves[0])
    fs = waves[0].sample_rate
    if any(len(w) != n or w.sample_rate != fs for w in waves):
        raise ValueError("curves must share length and sample rate")
    stack = np.stack([w.samples for w in waves])
    if window is None:
        window = (2 * t_bit, 0.8 * n / fs)
    start = max(0, int(math.ceil(window[0] * fs - 1e-9)))
    stop = min(n, int(math.floor(window[1] * fs + 1e-9)))
    if stop <= start:
        raise ValueError(f"empty LOI search window {window}")
    spread = stack.max(axis=0) - stack.min(axis=0)
    idx = start + int(np.argmin(spread[start:stop]))
    return idx, float(spread[idx])


class Contrast(NamedTuple):
    value: float
    zero_variance: bool


def region_mask(shape, centers_xy, radius, pitch, origin, outside=False) -> np.ndarray:
    """Boolean (ny, nx) mask of grid points within `radius` mm of any center."""
    ny, nx = shape
    x = origin[0] + pitch * np.arange(nx)
    y = origin[1] + pitch * np.arange(ny)
    xx, yy = np.meshgrid(x, y)
    mask = np.zeros(shape, dtype=bool)
    for cx, cy in centers_xy:
        mask |= np.hypot(xx - cx, yy - cy) <= radius
    return ~mask if outside else mask


def defect_contrast(image, defect_region: np.ndarray, background_region: np.ndarray) -> Contrast:
    """
    ``max |v - mean(bg)|`` over the defect region divided by ``std(bg)``.

    A zero-variance background yields a contrast of 0 with the flag set.
    """
    values = np.asarray(getattr(image, "values", image), dtype=np.float64)
    d = np.asarray(defect_region, dtype=bool)
    b = np.asarray(background_region, dtype=bool)
    if not d.any() or not b.any():
        raise ValueError("defect and background regions must be nonempty")
    if np.any(d & b):
        raise ValueError("defect and background regions overlap")
    bg = values[b]
    mean = bg.mean()
    std = bg.std()
    peak = float(np.max(np.abs(values[d] - mean)))
    if std == 0:
        return Contrast(0.0, True)
    return Contrast(peak / std, False)


def best_time_slice(dataset, times: Sequence[float], defect_region, background_region):
    """
    Time-amplitude slice with the highest defect contrast.

    Returns:
        ``(time, CScanImage, Contrast)``.
    """
    best = None
    for t in times:
        img = cscan(dataset, Feature("time", t))
        c = defect_contrast(img, defect_region, background_region)
        if best is None or c.value > best[2].value:
            best = (float(t), img, c)
    return best


def noise_floor(noise_std: float, length: int, n0: int, sample_rate: float,
                lowpass_fc: Optional[float] = None, lsb: float = 0.0) -> float:
    """
    Standard deviation of white input noise after low-pass and pulse compression.

    Correlating with the delta train sums ``L - 1`` nonzero-weighted samples and
    the result is divided by L; the low-pass keeps the fraction of noise power
    passed by its mask.
    """
    var_in = noise_std ** 2 + lsb ** 2 / 12.0
    if lowpass_fc is None or lowpass_fc >= sample_rate / 2:
        gain = 1.0
    else:
        m = lowpass_mask(n0, sample_rate, lowpass_fc)
        full = np.concatenate([m, m[1:(n0 + 1) // 2][::-1]])
        gain = float(np.sum(full ** 2) / n0)
    return math.sqrt(var_in * gain * (length - 1)) / length


@dataclass(frozen=True)
class SnrGain:
    length: int
    gain: float
    analytic: float
    flagged: bool = False


def _reference_response(mapping: BitMapping, n0: int, tau: float = 150e-6) -> np.ndarray:
    t = np.arange(n0) / mapping.sample_rate
    return np.exp(-t / tau)


def snr_gain_study(lengths: Sequence[int], noise_std: float, trials: int, seed: int,
                   mapping: Optional[BitMapping] = None, amplitude: float = 1.0) -> list:
    """
    Monte Carlo power-SNR gain of pulse compression over a single-bit pulse.

    For each code length L the same exponential system is measured two ways:
    a single T_bit pulse, and the steady-state period of a Legendre waveform
    followed by pulse compression. Both see white noise of `noise_std`. The
    gain is the ratio of the two power SNRs; ``L**2 / (L - 1)`` is reported as
    the analytic value.
    """
    if trials < 30:
        raise ValueError(f"trials must be >= 30, got {trials}")
    mapping = mapping or BitMapping(100e-6, 20)
    out = []
    for length in lengths:
        seq = legendre_sequence(length)
        n0 = mapping.n0(length)
        h = _reference_response(mapping, n0)
        rect = np.zeros(n0)
        rect[: mapping.n_s_bit] = amplitude
        clean_single = np.fft.irfft(np.fft.rfft(rect) * np.fft.rfft(h), n=n0)
        sp = synth_pn_waveform(seq, mapping, amplitude).samples
        y0 = np.fft.irfft(np.fft.rfft(sp) * np.fft.rfft(h), n=n0)
        delta = synth_delta_train(seq, mapping).samples
        config = PucConfig(mapping, length, amplitude)
        clean_puc = compress_array(y0, delta, config)[0]
        signal_power = float(np.mean(clean_single ** 2))
        analytic = length ** 2 / (length - 1)
        if noise_std == 0:
            out.append(SnrGain(length, math.inf, analytic, True))
            continue
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(length)]))
        single_noise = rng.normal(0.0, noise_std, size=(trials, n0))
        puc_noise = rng.normal(0.0, noise_std, size=(trials, n0))
        single = clean_single + single_noise
        hhat = compress_array(y0 + puc_noise, delta, config)[0]
        snr_single = signal_power / float(np.mean((single - clean_single) ** 2))
        snr_puc = float(np.mean(clean_puc ** 2)) / float(np.mean((hhat - clean_puc) ** 2))
        out.append(SnrGain(length, snr_puc / snr_single, analytic))
    return out


def fit_through_origin(xs, ys):
    """Least-squares slope of ``y = a x`` and the per-point relative deviations."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    slope = float(np.dot(xs, ys) / np.dot(xs, xs))
    dev = np.abs(ys - slope * xs) / (slope * xs)
    return slope, dev
