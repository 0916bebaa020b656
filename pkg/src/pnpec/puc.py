"""
Pulse-compression engine.

The steady-state period ``y0`` of the response to a periodic PN waveform is
cyclically cross-correlated with the code's delta train. Because the
waveform/delta-train correlation is ``A * (L * rect - 1)``, the result is
``L`` times the response to a single bit-long pulse plus a constant; the
constant is estimated on the tail of the period and removed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .pnseq import PnSequence
from .waveform import BitMapping, SampledWaveform, synth_delta_train


def xcorr_array(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cyclic cross-correlation along the last axis, ``sum_m a[m] b[(m - n) mod N]``."""
    n = a.shape[-1]
    spec = np.fft.rfft(a, axis=-1) * np.conj(np.fft.rfft(b, axis=-1))
    return np.fft.irfft(spec, n=n, axis=-1)


def cyclic_xcorr(a: SampledWaveform, b: SampledWaveform) -> SampledWaveform:
    """Cyclic cross-correlation of two single-period signals via the DFT."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if a.sample_rate != b.sample_rate:
        raise ValueError(f"sample rate mismatch: {a.sample_rate} vs {b.sample_rate}")
    return SampledWaveform(xcorr_array(a.samples, b.samples), a.sample_rate, "xcorr")


def lowpass_mask(n: int, sample_rate: float, fc: float) -> np.ndarray:
    """
    Real rfft-domain mask: 1 up to 0.9*fc, raised-cosine rolloff to 0 at 1.1*fc.
    """
    f = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    lo, hi = 0.9 * fc, 1.1 * fc
    mask = np.zeros_like(f)
    mask[f <= lo] = 1.0
    band = (f > lo) & (f < hi)
    mask[band] = 0.5 * (1.0 + np.cos(np.pi * (f[band] - lo) / (hi - lo)))
    return mask


def lowpass_array(x: np.ndarray, sample_rate: float, fc: Optional[float]) -> np.ndarray:
    if fc is None or fc >= sample_rate / 2:
        return x
    if not fc > 0:
        raise ValueError(f"cut-off must be positive, got {fc}")
    n = x.shape[-1]
    mask = lowpass_mask(n, sample_rate, fc)
    return np.fft.irfft(np.fft.rfft(x, axis=-1) * mask, n=n, axis=-1)


def lowpass(w: SampledWaveform, fc: float) -> SampledWaveform:
    """
    Zero-phase cyclic low-pass filter; the input is treated as one period.
    A cut-off at or above Nyquist returns the input unchanged.
    """
    out = lowpass_array(w.samples, w.sample_rate, fc)
    if out is w.samples:
        return w
    return w.with_samples(out, f"{w.label}|lp{fc:g}")


def extract_period(y: SampledWaveform, period_index: int, n0: int) -> SampledWaveform:
    """Samples ``[period_index * n0, (period_index + 1) * n0)``; period 0 is transient."""
    if period_index < 1:
        raise ValueError(
            f"period_index must be >= 1 (period 0 holds the transient), got {period_index}"
        )
    need = (period_index + 1) * n0
    if len(y) < need:
        raise ValueError(
            f"record too short for period {period_index}: need {need} samples, have {len(y)}"
        )
    seg = y.samples[period_index * n0: need]
    return y.with_samples(seg, f"{y.label}[period {period_index}]")


@dataclass(frozen=True)
class PucConfig:
    """
    Pulse-compression settings.

    `response_duration` is the expected length of the single-pulse response;
    it must end before the tail window used to estimate the constant offset.
    """

    mapping: BitMapping
    length: int
    amplitude: float = 1.0
    lowpass_fc: Optional[float] = None
    offset_window_fraction: float = 0.1
    response_duration: Optional[float] = None
    scale: bool = True

    def __post_init__(self):
        if not 0 < self.offset_window_fraction < 1:
            raise ValueError("offset_window_fraction must be in (0, 1)")
        if self.lowpass_fc is not None and not self.lowpass_fc > 0:
            raise ValueError("lowpass_fc must be positive")
        if self.response_duration is not None:
            limit = (1 - self.offset_window_fraction) * self.length * self.mapping.t_bit
            if not self.response_duration < limit:
                raise ValueError(
                    f"response duration {self.response_duration:g} s overlaps the offset "
                    f"tail window: must be < {limit:g} s"
                )

    @property
    def n0(self) -> int:
        return self.mapping.n0(self.length)

    @property
    def tail_samples(self) -> int:
        return max(1, int(round(self.offset_window_fraction * self.n0)))


@dataclass(frozen=True)
class PucResult:
    hhat: SampledWaveform
    raw_correlation: SampledWaveform
    offset_estimate: float
    scale: int


def compress_array(y0: np.ndarray, delta: np.ndarray, config: PucConfig):
    """Array form of :func:`puc_estimate`; works on a leading batch axis."""
    raw = xcorr_array(y0, delta)
    tail = config.tail_samples
    offset = raw[..., -tail:].mean(axis=-1, keepdims=True)
    hhat = raw - offset
    if config.scale:
        hhat = hhat / config.length
    return hhat, raw, offset[..., 0]


def puc_estimate(y0: SampledWaveform, delta_train: SampledWaveform, config: PucConfig) -> PucResult:
    """
    Estimate the response to one bit-long pulse from the steady-state period.

    ``hhat = (xcorr(y0, delta) - offset) / L`` where the offset is the mean of
    the correlation over the final `offset_window_fraction` of the period.
    """
    n0 = config.n0
    if len(y0) != n0 or len(delta_train) != n0:
        raise ValueError(
            f"expected {n0}-sample period and delta train, got {len(y0)} and {len(delta_train)}"
        )
    if y0.sample_rate != delta_train.sample_rate:
        raise ValueError("sample rate mismatch between y0 and delta train")
    hhat, raw, offset = compress_array(y0.samples, delta_train.samples, config)
    fs = y0.sample_rate
    return PucResult(
        hhat=SampledWaveform(hhat, fs, "hhat"),
        raw_correlation=SampledWaveform(raw, fs, "raw correlation"),
        offset_estimate=float(offset),
        scale=config.length if config.scale else 1,
    )


def process_trace(y: SampledWaveform, seq: PnSequence, config: PucConfig,
                  period_index: int = 1) -> PucResult:
    """Extract the steady-state period, low-pass it, and pulse-compress."""
    y0 = extract_period(y, period_index, config.n0)
    if config.lowpass_fc is not None:
        y0 = lowpass(y0, config.lowpass_fc)
    return puc_estimate(y0, synth_delta_train(seq, config.mapping), config)
