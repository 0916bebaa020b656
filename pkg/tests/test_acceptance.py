"""
Acceptance criteria, one test each. Every test records a PASS/FAIL line that
is repeated in the pytest terminal summary.
"""

import time

import numpy as np

from pnpec import analysis, bench
from pnpec.analysis import Feature, best_time_slice, defect_contrast, find_loi, region_mask
from pnpec.bench import BenchSetup, ExcitationPlan, RandomLiftOff, ScanGrid, run_scan
from pnpec.experiment import ExperimentConfig, run_experiment
from pnpec.pnseq import PRIMITIVE_TAPS, cyclic_autocorrelation, is_prime, legendre_sequence, mls_sequence
from pnpec.puc import PucConfig, cyclic_xcorr, process_trace
from pnpec.waveform import (
    BitMapping,
    amplitude_spectrum,
    first_null,
    sinc_envelope,
    synth_delta_train,
    synth_pn_waveform,
    synth_rect_pulse,
)

MAPPING = BitMapping(100e-6, 20)
SEQ = legendre_sequence(67)
T_LOI_INDEX = 52  # 260 us at 200 kSa/s
LOI_WINDOW = (200e-6, 1e-3)
SLICE_TIMES = [k * 100e-6 for k in range(1, 11)]
DEFECT_RADIUS_MM = 4.0
BACKGROUND_RADIUS_MM = 10.0
VISIBLE = analysis.VISIBILITY_THRESHOLD


def _defect_scan(setup, defect_id, lift_off, seed):
    d = setup.sample.defect(defect_id)
    grid = ScanGrid.centered_on(d.x, d.y, 80, 60, 0.5, lift_off)
    period = setup.plan.steady_periods()[-1]
    ds = run_scan(grid, setup, seed, [period])[period]
    dm = region_mask((60, 80), [(d.x, d.y)], DEFECT_RADIUS_MM, grid.pitch, grid.origin)
    bm = region_mask((60, 80), [(d.x, d.y)], BACKGROUND_RADIUS_MM, grid.pitch, grid.origin,
                     outside=True)
    return ds, dm, bm


def test_criterion_01_exact_autocorrelation(acceptance):
    start = time.perf_counter()
    primes = [p for p in range(3, 500) if is_prime(p) and p % 4 == 3]
    bad = [p for p in primes
           if cyclic_autocorrelation(legendre_sequence(p)) != [p - 1] + [-1] * (p - 1)]
    bad += [f"mls{n}" for n in PRIMITIVE_TAPS if n <= 10
            and cyclic_autocorrelation(mls_sequence(n)) != [2 ** n - 1] + [-1] * (2 ** n - 2)]
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 5.0
    acceptance(1, ok, f"{len(primes)} Legendre primes + MLS N=2..10, failures={bad}, "
                      f"{elapsed:.2f} s")
    assert ok


def test_criterion_02_waveform_delta_correlation(acceptance):
    worst = 0.0
    for p, nsb in [(3, 2), (7, 3), (19, 20), (67, 20)]:
        seq = legendre_sequence(p)
        mapping = BitMapping(100e-6, nsb)
        amplitude = 1.7
        phi = cyclic_xcorr(synth_pn_waveform(seq, mapping, amplitude),
                           synth_delta_train(seq, mapping)).samples
        expected = np.full(p * nsb, -amplitude)
        expected[:nsb] = amplitude * (p - 1)
        worst = max(worst, np.max(np.abs(phi - expected)) / (amplitude * (p - 1)))
    ok = worst <= 1e-12
    acceptance(2, ok, f"max relative error {worst:.2e} (limit 1e-12)")
    assert ok


def _circular_convolution(x, h):
    n = len(x)
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return h[idx] @ x


def test_criterion_03_puc_oracle(acceptance):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    ideal = bench.get_profile("ideal")
    cases = [(19, 20), (67, 20), (31, 7), (7, 3), (131, 10)]
    worst = 0.0
    for trial in range(100):
        p, nsb = cases[trial % len(cases)]
        seq = legendre_sequence(p)
        mapping = BitMapping(100e-6, nsb)
        n0 = mapping.n0(p)
        support = int(0.6 * n0)
        h = np.zeros(n0)
        h[:support] = rng.normal(size=support) * np.exp(-np.arange(support) / (0.2 * n0))
        amplitude = rng.uniform(0.2, 3.0)
        exc = bench.build_excitation(ExcitationPlan.perpendicular(2), seq, mapping, amplitude)
        y = bench.acquire(exc, h, h, ideal)
        hhat = process_trace(y, seq, PucConfig(mapping, p, amplitude), 1).hhat.samples
        pulse = synth_rect_pulse(amplitude, mapping.t_bit, mapping.sample_rate, n0).samples
        oracle = _circular_convolution(pulse, h)
        worst = max(worst, np.max(np.abs(hhat - oracle)) / np.max(np.abs(oracle)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 30.0
    acceptance(3, ok, f"100 responses, max relative Linf {worst:.2e} (limit 1e-9), {elapsed:.1f} s")
    assert ok


def test_criterion_04_snr_linear_in_length(acceptance):
    start = time.perf_counter()
    rows = analysis.snr_gain_study([19, 67, 131], noise_std=0.1, trials=100, seed=4, mapping=MAPPING)
    slope, dev = analysis.fit_through_origin([r.length for r in rows], [r.gain for r in rows])
    elapsed = time.perf_counter() - start
    ok = float(np.max(dev)) <= 0.30 and elapsed < 60.0
    gains = ", ".join(f"L={r.length}: {r.gain:.1f}" for r in rows)
    acceptance(4, ok, f"gains {gains}; slope {slope:.3f}, max deviation {np.max(dev):.1%} "
                      f"(limit 30%), {elapsed:.1f} s")
    assert ok


def _detected_loi(setup, seed):
    curves = bench.sound_point_curves(setup, [0.0, 1.0, 2.0, 3.0], seed)
    return find_loi(curves, LOI_WINDOW, setup.mapping.t_bit)


def test_criterion_05_loi_detection(acceptance):
    setup = BenchSetup(SEQ, MAPPING)
    idx, spread = _detected_loi(setup, 11)
    ok = abs(idx - T_LOI_INDEX) <= 1
    acceptance(5, ok, f"detected {idx / MAPPING.sample_rate * 1e6:.0f} us (index {idx}), "
                      f"target 260 us +/- 1 sample, spread {spread:.2e}")
    assert ok


def test_criterion_06_random_lift_off_imaging(acceptance):
    setup = BenchSetup(SEQ, MAPPING)
    idx, _ = _detected_loi(setup, 7)
    t_loi = idx / MAPPING.sample_rate
    ds, dm, bm = _defect_scan(setup, "D4", RandomLiftOff(0.0, 3.0), 7)

    def contrast(t):
        return defect_contrast(analysis.cscan(ds, Feature("time", t)), dm, bm).value

    at_loi = contrast(t_loi)
    early, late = contrast(t_loi - 200e-6), contrast(t_loi + 200e-6)
    ratio = at_loi / max(early, late)
    ok = ratio >= 2.0
    acceptance(6, ok, f"contrast {at_loi:.1f} at {t_loi * 1e6:.0f} us vs {early:.2f} / {late:.2f} "
                      f"at -/+200 us, ratio {ratio:.1f} (limit 2)")
    assert ok


def test_criterion_07_visibility_trends(acceptance):
    setup = BenchSetup(SEQ, MAPPING)
    ids = [f"D{i}" for i in range(1, 9)]
    table = {}
    for lo in (0.0, 1.0, 2.0, 3.0):
        table[lo] = []
        for did in ids:
            ds, dm, bm = _defect_scan(setup, did, lo, 11)
            table[lo].append(best_time_slice(ds, SLICE_TIMES, dm, bm)[2].value)
    visible_near = all(c >= VISIBLE for lo in (0.0, 1.0) for c in table[lo])
    deep_hidden = sum(c < VISIBLE for c in table[3.0][:3]) == 3
    # D1 is deepest; contrast must not increase with depth, i.e. be non-decreasing D1 -> D8.
    breaks = [f"LO{lo:g} {ids[i]}>{ids[i + 1]}" for lo, row in table.items()
              for i in range(len(row) - 1) if row[i] > row[i + 1]]
    ok = visible_near and deep_hidden and not breaks
    rows = "; ".join(f"LO{lo:g}: " + " ".join(f"{c:.3f}" for c in table[lo]) for lo in table)
    acceptance(7, ok, f"visible at LO 0/1={visible_near}, D1-D3 hidden at LO 3={deep_hidden}, "
                      f"depth-order breaks={breaks} [{rows}]")
    assert ok


def test_criterion_08_spectrum_shape(acceptance):
    t_bit = 100e-6
    worst_band, worst_full, pulse_err = 0.0, 0.0, 0.0
    nulls_ok, dc_ok = True, True
    for seq in (legendre_sequence(19), legendre_sequence(67)):
        w = synth_pn_waveform(seq, BitMapping(t_bit, 20))
        f, m = amplitude_spectrum(w)
        dc_ok &= m[0] == 0.0
        nulls_ok &= abs(first_null(f, m) - 1 / t_bit) < 1e-6
        env = sinc_envelope(f, t_bit)
        nonzero = (f > 0) & (env > 0.05)
        # A Legendre code has |DFT| = sqrt(p) off DC, and a bit held for n_s_bit
        # samples has DC gain n_s_bit, which fixes the envelope scale.
        ratio = m[nonzero] / (np.sqrt(len(seq)) * 20 * env[nonzero])
        band = f[nonzero] < 2 / t_bit
        worst_band = max(worst_band, np.max(np.abs(ratio[band] - 1)))
        worst_full = max(worst_full, np.max(np.abs(ratio - 1)))
        # Against the sampled pulse the match is exact over the whole band.
        pulse = np.abs(np.fft.rfft(synth_rect_pulse(1.0, t_bit, w.sample_rate, len(w)).samples))
        keep = pulse > 1e-9 * pulse.max()
        pr = m[keep][1:] / pulse[keep][1:]
        pulse_err = max(pulse_err, np.max(np.abs(pr / pr[0] - 1)))
    ok = worst_band <= 0.02 and nulls_ok and dc_ok and pulse_err <= 1e-9
    acceptance(8, ok, f"|sinc| deviation {worst_band:.2%} below 2 f_bit (limit 2%; "
                      f"{worst_full:.1%} up to Nyquist), sampled-pulse deviation {pulse_err:.1e}, "
                      f"first null at 1/T_bit={nulls_ok}, DC zero={dc_ok}")
    assert ok


def test_criterion_09_device_profiles(acceptance):
    setup2 = bench.get_profile("setup2")
    try:
        setup2.check_acquisition(8192, 1e6)
        rejected = False
    except ValueError as exc:
        rejected = "4096" in str(exc)
    setup2.check_acquisition(4096, 1e6)
    y = np.random.default_rng(9).uniform(-0.999 * setup2.full_scale, 0.999 * setup2.full_scale, 100_000)
    lsb = 2 * setup2.full_scale / 2 ** 14
    err = float(np.max(np.abs(setup2.quantize(y) - y)))
    ok = rejected and setup2.adc_bits == 14 and err <= lsb / 2
    acceptance(9, ok, f"8192-sample request rejected={rejected}, 14-bit max error "
                      f"{err / lsb:.3f} LSB (limit 0.5)")
    assert ok


def test_criterion_10_determinism(acceptance, tmp_path, monkeypatch):
    cfg = ExperimentConfig()
    cfg.grid = {"nx": 24, "ny": 18, "pitch_mm": 0.5}
    cfg.lift_off = {"kind": "random", "low": 0.0, "high": 3.0}
    cfg.features = dict(cfg.features, loi_lift_offs=[])
    runs = {}
    for threads in ("1", "1", "4"):
        monkeypatch.setenv("PNPEC_THREADS", threads)
        out = tmp_path / f"run{len(runs)}"
        run_experiment(cfg, out)
        runs[out] = {p.name: p.read_bytes() for p in sorted(out.glob("dataset_*.pnpec"))}
    blobs = list(runs.values())
    ok = len(blobs[0]) == 2 and all(b == blobs[0] for b in blobs[1:])
    acceptance(10, ok, f"3 runs (threads 1, 1, 4), {len(blobs[0])} datasets each, "
                       f"byte-identical={ok}")
    assert ok
