"""Pseudo-noise pulsed eddy current testing: codes, pulse compression, virtual bench, imaging."""

from .pnseq import PnSequence, cyclic_autocorrelation, legendre_sequence, mls_sequence
from .puc import PucConfig, PucResult, cyclic_xcorr, extract_period, lowpass, puc_estimate
from .waveform import (
    BitMapping,
    SampledWaveform,
    amplitude_spectrum,
    synth_delta_train,
    synth_pn_waveform,
    synth_rect_pulse,
)

__version__ = "0.1.0"

__all__ = [
    "BitMapping",
    "PnSequence",
    "PucConfig",
    "PucResult",
    "SampledWaveform",
    "amplitude_spectrum",
    "cyclic_autocorrelation",
    "cyclic_xcorr",
    "extract_period",
    "legendre_sequence",
    "lowpass",
    "mls_sequence",
    "puc_estimate",
    "synth_delta_train",
    "synth_pn_waveform",
    "synth_rect_pulse",
]
