import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pnpec.pnseq import PnSequence, legendre_sequence, mls_sequence
from pnpec.waveform import (
    BitMapping,
    SampledWaveform,
    amplitude_spectrum,
    first_null,
    sinc_envelope,
    synth_delta_train,
    synth_pn_waveform,
    synth_rect_pulse,
)


def test_rect_pulse_examples():
    w = synth_rect_pulse(1.0, 1e-3, 10e3, 20)
    assert list(w.samples) == [1.0] * 10 + [0.0] * 10
    assert not np.any(synth_rect_pulse(0.0, 1e-3, 10e3, 20).samples)
    w = synth_rect_pulse(2.0, 100e-6, 200e3, 40)
    assert list(w.samples) == [2.0] * 20 + [0.0] * 20


def test_rect_pulse_grid_misalignment():
    with pytest.raises(ValueError, match="grid misalignment"):
        synth_rect_pulse(1.0, 1.025e-4, 200e3, 40)
    with pytest.raises(ValueError):
        synth_rect_pulse(1.0, 1e-3, 10e3, 5)


def test_bit_mapping_derived_quantities():
    m = BitMapping(100e-6, 20)
    assert m.sample_rate == pytest.approx(200e3)
    assert m.f_bit == pytest.approx(10e3)
    assert m.n0(67) == 1340
    assert m.period(67) == pytest.approx(6.7e-3)
    assert BitMapping.from_rate(100e-6, 200e3).n_s_bit == 20
    with pytest.raises(ValueError, match="grid misalignment"):
        BitMapping.from_rate(100e-6, 205e3)
    with pytest.raises(ValueError):
        BitMapping(100e-6, 0)


def test_pn_waveform_examples():
    seq = PnSequence.from_values([0, 1, -1])
    w = synth_pn_waveform(seq, BitMapping(1e-4, 2), 1.0)
    assert list(w.samples) == [0, 0, 1, 1, -1, -1]
    w67 = synth_pn_waveform(legendre_sequence(67), BitMapping(100e-6, 20))
    assert w67.duration == pytest.approx(6.7e-3)
    assert len(w67) == 1340
    seq = mls_sequence(4)
    assert list(synth_pn_waveform(seq, BitMapping(1e-4, 1)).samples) == list(seq.values)


def test_delta_train_examples():
    seq = PnSequence.from_values([0, 1, -1])
    assert list(synth_delta_train(seq, BitMapping(1e-4, 2)).samples) == [0, 0, 1, 0, -1, 0]
    seq7 = legendre_sequence(7)
    assert list(synth_delta_train(seq7, BitMapping(1e-4, 1)).samples) == list(seq7.values)
    d = synth_delta_train(seq7, BitMapping(1e-4, 3)).samples
    assert len(d) == 21
    assert set(np.flatnonzero(d)) <= set(range(0, 21, 3))
    assert list(d[::3]) == list(seq7.values)


def test_rect_spectrum_first_null():
    w = synth_rect_pulse(1.0, 100e-6, 200e3, 2000)
    f, m = amplitude_spectrum(w)
    assert first_null(f, m) == pytest.approx(10e3)


def test_legendre_waveform_has_zero_dc():
    for p in (3, 19, 67, 131):
        _, m = amplitude_spectrum(synth_pn_waveform(legendre_sequence(p), BitMapping(1e-4, 20)))
        assert m[0] == 0.0


def test_constant_waveform_spectrum():
    f, m = amplitude_spectrum(SampledWaveform(np.full(64, 3.0), 1e3))
    assert m[0] == pytest.approx(192.0)
    assert np.allclose(m[1:], 0.0, atol=1e-12)
    assert f[1] == pytest.approx(1e3 / 64)


def test_spectrum_needs_two_samples():
    with pytest.raises(ValueError):
        amplitude_spectrum(SampledWaveform([1.0], 1.0))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=200))
def test_parseval(xs):
    x = np.array(xs)
    spectrum = np.abs(np.fft.fft(x))
    energy = float(np.sum(x ** 2))
    assert abs(energy - np.sum(spectrum ** 2) / len(x)) <= 1e-10 * max(energy, 1e-300) + 1e-300
    # The one-sided spectrum from amplitude_spectrum gives the same energy.
    _, m = amplitude_spectrum(SampledWaveform(x, 1.0))
    n = len(x)
    weights = np.full(m.size, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    assert abs(energy - np.sum(weights * m ** 2) / n) <= 1e-10 * max(energy, 1e-300) + 1e-12


def test_pn_envelope_follows_sinc_within_two_percent_below_twice_fbit():
    t_bit = 100e-6
    mapping = BitMapping(t_bit, 20)
    for seq in (legendre_sequence(67), legendre_sequence(19), mls_sequence(6)):
        f, m = amplitude_spectrum(synth_pn_waveform(seq, mapping))
        sel = (f > 0) & (f < 2 / t_bit) & (sinc_envelope(f, t_bit) > 0.05)
        # Two-level codes have a flat code spectrum off DC, so bin magnitudes
        # trace the held-bit envelope scaled by |code DFT| * n_s_bit.
        code = np.abs(np.fft.fft(seq.array))[1]
        ratio = m[sel] / (code * mapping.n_s_bit * sinc_envelope(f[sel], t_bit))
        assert np.max(np.abs(ratio - 1)) < 0.02


def test_first_null_halves_with_t_bit():
    seq = legendre_sequence(19)
    nulls = []
    for t_bit, nsb in ((100e-6, 20), (50e-6, 10)):
        f, m = amplitude_spectrum(synth_pn_waveform(seq, BitMapping(t_bit, nsb)))
        nulls.append(first_null(f, m))
    assert nulls[0] == pytest.approx(10e3)
    assert nulls[1] == pytest.approx(2 * nulls[0])


def test_waveform_invariants():
    with pytest.raises(ValueError):
        SampledWaveform([], 1.0)
    with pytest.raises(ValueError):
        SampledWaveform([1.0, np.nan], 1.0)
    with pytest.raises(ValueError):
        SampledWaveform([1.0], 0.0)
    w = SampledWaveform([1, 2, 3], 2.0)
    assert w.duration == 1.5
    assert list(w.times) == [0.0, 0.5, 1.0]
    with pytest.raises(ValueError):
        w.samples[0] = 9
