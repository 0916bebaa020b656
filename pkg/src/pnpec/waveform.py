"""Sampled excitation waveforms: rectangular pulses, held-bit PN waveforms, delta trains."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .pnseq import PnSequence

_GRID_TOL = 1e-9


def _exact_int(x: float, what: str) -> int:
    n = round(x)
    if abs(x - n) > _GRID_TOL * max(1.0, abs(x)):
        raise ValueError(f"grid misalignment: {what} = {x!r} is not an integer")
    return int(n)


@dataclass(frozen=True)
class SampledWaveform:
    """
    Uniformly sampled real signal.

    Attributes:
        samples: Amplitudes (normalized volts). Stored as a read-only float64 array.
        sample_rate: Sampling rate in Sa/s.
        label: Free text.
    """

    samples: np.ndarray
    sample_rate: float
    label: str = ""

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("waveform needs at least one sample in a 1-D array")
        if not np.all(np.isfinite(arr)):
            raise ValueError("waveform samples must be finite")
        if not self.sample_rate > 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    def with_samples(self, samples, label: str | None = None) -> "SampledWaveform":
        return SampledWaveform(samples, self.sample_rate, self.label if label is None else label)


@dataclass(frozen=True)
class BitMapping:
    """
    Bit duration and samples per bit. The sample rate is derived so that the
    bit duration is always an exact multiple of the sampling interval.
    """

    t_bit: float
    n_s_bit: int
    sample_rate: float = field(init=False)

    def __post_init__(self):
        if not self.t_bit > 0:
            raise ValueError(f"t_bit must be positive, got {self.t_bit}")
        if int(self.n_s_bit) != self.n_s_bit or self.n_s_bit < 1:
            raise ValueError(f"n_s_bit must be a positive integer, got {self.n_s_bit}")
        object.__setattr__(self, "n_s_bit", int(self.n_s_bit))
        object.__setattr__(self, "sample_rate", self.n_s_bit / self.t_bit)

    @classmethod
    def from_rate(cls, t_bit: float, sample_rate: float) -> "BitMapping":
        """Build from a sample rate; rejects a bit that is not a whole number of samples."""
        n = _exact_int(t_bit * sample_rate, "t_bit * sample_rate")
        if n < 1:
            raise ValueError("grid misalignment: t_bit is shorter than one sample")
        return cls(t_bit, n)

    @property
    def f_bit(self) -> float:
        return 1.0 / self.t_bit

    def n0(self, length: int) -> int:
        """Samples in one period of an L-bit code."""
        return self.n_s_bit * int(length)

    def period(self, length: int) -> float:
        return self.t_bit * int(length)


def synth_rect_pulse(amplitude: float, duration: float, sample_rate: float,
                     total_samples: int) -> SampledWaveform:
    """
    Sampled rectangular pulse: `amplitude` for the first ``duration * sample_rate``
    samples, zero afterwards.
    """
    width = _exact_int(duration * sample_rate, "T * f_s")
    if width < 1:
        raise ValueError("pulse must span at least one sample")
    if width > total_samples:
        raise ValueError(f"pulse of {width} samples exceeds total of {total_samples}")
    samples = np.zeros(int(total_samples))
    samples[:width] = amplitude
    return SampledWaveform(samples, sample_rate, f"rect(T={duration:g})")


def synth_pn_waveform(seq: PnSequence, mapping: BitMapping, amplitude: float = 1.0) -> SampledWaveform:
    """One period (N0 samples) of the held-bit waveform ``A * seq[n // n_s_bit]``."""
    samples = amplitude * np.repeat(seq.array.astype(np.float64), mapping.n_s_bit)
    return SampledWaveform(samples, mapping.sample_rate, f"pn(L={len(seq)})")


def synth_delta_train(seq: PnSequence, mapping: BitMapping) -> SampledWaveform:
    """Unit pulses weighted by the code values, one at the start of every bit."""
    samples = np.zeros(mapping.n0(len(seq)))
    samples[:: mapping.n_s_bit] = seq.array
    return SampledWaveform(samples, mapping.sample_rate, f"delta(L={len(seq)})")


def amplitude_spectrum(w: SampledWaveform):
    """
    One-sided DFT magnitude of the waveform, no window.

    Returns:
        ``(frequencies, magnitudes)`` with frequencies ``k * f_s / len`` for
        ``k = 0 .. len // 2``. Magnitudes are unnormalized ``|X[k]|``.
    """
    n = len(w)
    if n < 2:
        raise ValueError("spectrum needs at least two samples")
    mags = np.abs(np.fft.rfft(w.samples))
    freqs = np.arange(mags.size) * w.sample_rate / n
    return freqs, mags


def sinc_envelope(freqs, t_bit: float) -> np.ndarray:
    """``|sinc(f * T_bit)|`` with the normalized sinc."""
    return np.abs(np.sinc(np.asarray(freqs) * t_bit))


def first_null(freqs, mags, rel_tol: float = 1e-9) -> float:
    """Lowest nonzero frequency whose magnitude is zero to `rel_tol` of the peak."""
    peak = float(np.max(mags))
    for f, m in zip(freqs[1:], mags[1:]):
        if m <= rel_tol * peak:
            return float(f)
    return math.nan
