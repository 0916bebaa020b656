"""
Virtual PN-PEC bench.

Emulates the dual H-bridge driver, the two-coil probe over the aluminium
benchmark plate, the acquisition device (ADC resolution, buffer, rate) and
raster scans over that plate.

The probe/sample response is a parametric surrogate, not a field solver. For
a standoff ``s`` (lift-off plus any covering layer) the impulse response is::

    h(t) = (C(s) + D(x, y, s)) * exp(-t / tau(s))
    tau(s) = tau0 * (1 + gamma * s)

``C(s)`` is normalised so that the response to one bit-long pulse passes
through ``K`` at ``t_loi`` for every standoff, which produces the lift-off
invariant crossing in the pulse-compressed output. ``D`` is a sum of
quadrupolar kernels, one per notch, attenuated with ``exp(-(depth + s) / depth_length)``.
"""

from __future__ import annotations

import math
import os
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .pnseq import PnSequence
from .puc import PucConfig, compress_array, lowpass_array
from .waveform import BitMapping, SampledWaveform, synth_delta_train

PERPENDICULAR = "perpendicular"
TANGENTIAL = "tangential"
MODES = (PERPENDICULAR, TANGENTIAL)


# --------------------------------------------------------------------------
# Driver logic
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BridgeInputs:
    enable: bool
    in_a: bool
    in_b: bool


def bridge_polarity(b: BridgeInputs) -> int:
    """Load current direction for one H-bridge: +1, -1, or 0 (disabled or brake)."""
    if not b.enable or bool(b.in_a) == bool(b.in_b):
        return 0
    return 1 if b.in_a else -1


def bridge_inputs_for(level: int) -> BridgeInputs:
    """Control lines that produce a current of sign `level` (0 disables the bridge)."""
    if level == 0:
        return BridgeInputs(False, False, False)
    return BridgeInputs(True, level > 0, level < 0)


@dataclass(frozen=True)
class ExcitationPlan:
    """
    Per-period current signs ``(coil1, coil2)`` applied to the base PN period.

    Equal signs drive the coils in phase (perpendicular field); opposite signs
    drive them out of phase (tangential field).
    """

    schedule: tuple

    def __post_init__(self):
        sched = tuple((int(a), int(b)) for a, b in self.schedule)
        if len(sched) == 0:
            raise ValueError("excitation schedule is empty")
        if len(sched) < 2:
            raise ValueError("schedule needs at least a transient and a steady-state period")
        for a, b in sched:
            if a not in (-1, 1) or b not in (-1, 1):
                raise ValueError(f"schedule signs must be +1 or -1, got {(a, b)}")
        object.__setattr__(self, "schedule", sched)

    @classmethod
    def perpendicular(cls, periods: int = 2) -> "ExcitationPlan":
        return cls(((1, 1),) * periods)

    @classmethod
    def tangential(cls, periods: int = 2) -> "ExcitationPlan":
        return cls(((1, -1),) * periods)

    @classmethod
    def combined(cls) -> "ExcitationPlan":
        """Two perpendicular periods followed by two tangential ones."""
        return cls(((1, 1), (1, 1), (1, -1), (1, -1)))

    @property
    def periods(self) -> int:
        return len(self.schedule)

    def mode_of(self, period_index: int) -> str:
        a, b = self.schedule[period_index]
        return PERPENDICULAR if a == b else TANGENTIAL

    def steady_periods(self) -> list:
        """Indices whose preceding period used the same coil configuration."""
        return [i for i in range(1, self.periods) if self.schedule[i] == self.schedule[i - 1]]


def build_excitation(plan: ExcitationPlan, seq: PnSequence, mapping: BitMapping,
                     amplitude: float = 1.0):
    """
    Coil currents for the whole plan, bit by bit through the bridge logic.

    Returns:
        ``(coil1, coil2)`` waveforms of ``plan.periods * N0`` samples.
    """
    coils = []
    for coil in (0, 1):
        levels = []
        for signs in plan.schedule:
            for v in seq.values:
                levels.append(bridge_polarity(bridge_inputs_for(signs[coil] * v)))
        samples = amplitude * np.repeat(np.array(levels, dtype=np.float64), mapping.n_s_bit)
        coils.append(SampledWaveform(samples, mapping.sample_rate, f"coil{coil + 1}"))
    return coils[0], coils[1]


# --------------------------------------------------------------------------
# Sample and probe model
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Defect:
    id: str
    x: float
    y: float
    depth: float  # mm below the inspected surface
    length: float = 3.0
    width: float = 0.1


BENCHMARK_DEPTHS = {f"D{i}": round(1.8 - 0.2 * i, 1) for i in range(1, 9)}
BENCHMARK_DEPTHS["D9"] = 0.0
DEFECT_SPACING_MM = 40.0


@dataclass(frozen=True)
class BenchmarkSample:
    """Aluminium 2024-T3 plate with nine notches (mm, S/m, H/m)."""

    defects: tuple
    plate_thickness: float = 2.0
    conductivity: float = 18.8e6
    permeability: float = 1.26e-6
    extra_layer_thickness: float = 0.0

    def defect(self, defect_id: str) -> Defect:
        for d in self.defects:
            if d.id == defect_id:
                return d
        raise KeyError(f"unknown defect {defect_id!r}")


def benchmark_sample(extra_layer_thickness: float = 0.0) -> BenchmarkSample:
    """The nine-notch plate; pass 2.0 for the covered (two-layer) configuration."""
    defects = tuple(
        Defect(did, x=DEFECT_SPACING_MM * (i + 0.5), y=30.0, depth=depth)
        for i, (did, depth) in enumerate(BENCHMARK_DEPTHS.items())
    )
    return BenchmarkSample(defects=defects, extra_layer_thickness=extra_layer_thickness)


@dataclass(frozen=True)
class ProbeModel:
    """
    Parameters of the response surrogate. Times in seconds, lengths in mm.

    Attributes:
        k: Pulse-response value at the lift-off invariant time.
        tau0: Decay time at zero standoff.
        gamma: Relative growth of the decay time per mm of standoff.
        t_loi: Lift-off invariant time.
        sigma: Quadrupole kernel width at zero standoff.
        defect_gain: Defect kernel gain (perpendicular mode).
        depth_length: Attenuation length of the defect signal with depth and standoff.
        mode_ratio: Tangential over perpendicular defect sensitivity.
        sigma_growth: Kernel widening per mm of standoff (added in quadrature).
    """

    k: float = 1.0
    tau0: float = 150e-6
    gamma: float = 0.1
    t_loi: float = 260e-6
    sigma: float = 1.5
    defect_gain: float = 0.04
    depth_length: float = 0.6
    mode_ratio: float = 3.0
    sigma_growth: float = 0.5

    def tau(self, standoff):
        return self.tau0 * (1.0 + self.gamma * np.asarray(standoff, dtype=np.float64))

    def kernel_width(self, standoff):
        return np.hypot(self.sigma, self.sigma_growth * np.asarray(standoff, dtype=np.float64))

    def mode_gain(self, mode: str) -> float:
        if mode == PERPENDICULAR:
            return 1.0
        if mode == TANGENTIAL:
            return self.mode_ratio
        raise ValueError(f"unknown mode {mode!r}")

    def response_duration(self, mapping: BitMapping, max_standoff: float, rel: float = 1e-6) -> float:
        """Time for the slowest sound response to fall to `rel` of its peak."""
        return mapping.t_bit + float(self.tau(max_standoff)) * math.log(1.0 / rel)


def quadrupole(u, v, width):
    """``(u v / w^2) exp(-(u^2 + v^2) / (2 w^2))``; zero on both axes."""
    w2 = np.asarray(width) ** 2
    return (u * v / w2) * np.exp(-(u * u + v * v) / (2.0 * w2))


def pulse_integration(tau, mapping: BitMapping):
    """``sum_{j < n_s_bit} exp(j / (f_s tau))``: gain of a bit-long pulse on an exponential."""
    j = np.arange(mapping.n_s_bit)
    tau = np.asarray(tau, dtype=np.float64)
    return np.exp(np.multiply.outer(1.0 / (mapping.sample_rate * tau), j)).sum(axis=-1)


def _response_factors(xs, ys, los, sample: BenchmarkSample, probe: ProbeModel,
                      mapping: BitMapping):
    """Per-point decay time and perpendicular/tangential amplitudes of ``exp(-t / tau)``."""
    xs, ys, los = np.broadcast_arrays(*(np.atleast_1d(np.asarray(a, dtype=np.float64))
                                        for a in (xs, ys, los)))
    if np.any(los < 0):
        raise ValueError("lift-off must be non-negative")
    s = los + sample.extra_layer_thickness
    tau = probe.tau(s)
    base = probe.k * np.exp(probe.t_loi / tau) / pulse_integration(tau, mapping)
    width = probe.kernel_width(s)
    defect = np.zeros_like(s)
    for d in sample.defects:
        amp = probe.defect_gain * np.exp(-(d.depth + s) / probe.depth_length)
        defect = defect + amp * quadrupole(xs - d.x, ys - d.y, width)
    c_perp = base + probe.mode_gain(PERPENDICULAR) * defect
    c_tan = base + probe.mode_gain(TANGENTIAL) * defect
    return tau, c_perp, c_tan


def _decay(tau, mapping: BitMapping, n_samples: int) -> np.ndarray:
    t = np.arange(n_samples) / mapping.sample_rate
    return np.exp(-np.outer(1.0 / np.atleast_1d(tau), t))


def _responses(xs, ys, los, sample: BenchmarkSample, probe: ProbeModel,
               mapping: BitMapping, n_samples: int):
    """Impulse responses for a batch of points, both modes, shape (B, n_samples)."""
    tau, c_perp, c_tan = _response_factors(xs, ys, los, sample, probe, mapping)
    decay = _decay(tau, mapping, n_samples)
    return c_perp[:, None] * decay, c_tan[:, None] * decay


def impulse_response(point, lift_off: float, sample: BenchmarkSample, probe: ProbeModel,
                     mode: str, mapping: BitMapping, n_samples: int) -> SampledWaveform:
    """Surrogate impulse response at `point` = (x, y) mm for one field configuration."""
    if lift_off < 0:
        raise ValueError(f"lift-off must be non-negative, got {lift_off}")
    probe.mode_gain(mode)
    h_perp, h_tan = _responses(point[0], point[1], lift_off, sample, probe, mapping, n_samples)
    h = h_perp if mode == PERPENDICULAR else h_tan
    return SampledWaveform(h[0], mapping.sample_rate, f"h[{mode}]")


# --------------------------------------------------------------------------
# Acquisition
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DeviceProfile:
    name: str
    adc_bits: Optional[int]
    max_sample_rate: Optional[float]
    max_buffer_samples: Optional[int]
    full_scale: float = 10.0

    @property
    def lsb(self) -> float:
        if self.adc_bits is None:
            return 0.0
        return 2.0 * self.full_scale / 2 ** self.adc_bits

    def check_acquisition(self, n_samples: int, sample_rate: float) -> None:
        if self.max_buffer_samples is not None and n_samples > self.max_buffer_samples:
            raise ValueError(
                f"{n_samples} samples exceed the {self.max_buffer_samples}-sample "
                f"single-shot buffer of profile {self.name!r}"
            )
        if self.max_sample_rate is not None and sample_rate > self.max_sample_rate:
            raise ValueError(
                f"sample rate {sample_rate:g} Sa/s exceeds {self.max_sample_rate:g} Sa/s "
                f"of profile {self.name!r}"
            )

    def quantize(self, y: np.ndarray) -> np.ndarray:
        """Mid-tread rounding to the ADC grid, clipped at full scale."""
        if self.adc_bits is None:
            return y
        lsb = self.lsb
        half = 2 ** (self.adc_bits - 1)
        codes = np.clip(np.round(y / lsb), -half, half - 1)
        return codes * lsb


PROFILES = {
    "setup1": DeviceProfile("setup1", adc_bits=16, max_sample_rate=2e6, max_buffer_samples=None),
    "setup2": DeviceProfile("setup2", adc_bits=14, max_sample_rate=100e6, max_buffer_samples=4096),
    "ideal": DeviceProfile("ideal", adc_bits=None, max_sample_rate=None, max_buffer_samples=None),
}


def get_profile(name: str) -> DeviceProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown device profile {name!r}; choose from {sorted(PROFILES)}") from None


def _linear_conv(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Linear convolution of x (M,) with each row of h (B, N), truncated to M samples."""
    m = x.shape[-1]
    nfft = 1 << (m + h.shape[-1] - 2).bit_length()
    spec = np.fft.rfft(x, nfft) * np.fft.rfft(h, nfft, axis=-1)
    return np.fft.irfft(spec, nfft, axis=-1)[..., :m]


def acquire_array(coil1: np.ndarray, coil2: np.ndarray, h_perp: np.ndarray,
                  h_tan: np.ndarray) -> np.ndarray:
    """Noiseless sensor output: in-phase current drives h_perp, differential drives h_tan."""
    common = 0.5 * (coil1 + coil2)
    diff = 0.5 * (coil1 - coil2)
    y = np.zeros(h_perp.shape[:-1] + coil1.shape, dtype=np.float64)
    if np.any(common):
        y = y + _linear_conv(common, h_perp)
    if np.any(diff):
        y = y + _linear_conv(diff, h_tan)
    return y


def factored_output(coil1: np.ndarray, coil2: np.ndarray, tau, c_perp, c_tan,
                    mapping: BitMapping, n_samples: int) -> np.ndarray:
    """
    Noiseless output for points whose responses are ``c * exp(-t / tau)``.

    Convolution is linear, so each distinct decay time is convolved once and
    scaled per point.
    """
    tau = np.atleast_1d(tau)
    uniq, inv = np.unique(tau, return_inverse=True)
    decay = _decay(uniq, mapping, n_samples)
    common = 0.5 * (coil1 + coil2)
    diff = 0.5 * (coil1 - coil2)
    y = np.zeros((tau.size, coil1.size))
    if np.any(common):
        y += np.asarray(c_perp)[:, None] * _linear_conv(common, decay)[inv]
    if np.any(diff):
        y += np.asarray(c_tan)[:, None] * _linear_conv(diff, decay)[inv]
    return y


def stream_seed(seed: int, stage: str, index: int = 0) -> np.random.SeedSequence:
    """Independent RNG stream for (master seed, stage tag, point index)."""
    return np.random.SeedSequence([int(seed), zlib.crc32(stage.encode()), int(index)])


def _add_noise(y: np.ndarray, noise_std: float, rng_seed) -> np.ndarray:
    if noise_std == 0:
        return y
    rng = np.random.default_rng(rng_seed)
    return y + rng.normal(0.0, noise_std, size=y.shape[-1])


def acquire(excitation, h_perp, h_tan, device: DeviceProfile, noise_std: float = 0.0,
            rng_seed=None) -> SampledWaveform:
    """Sensor output for explicit responses (arrays or waveforms)."""
    coil1, coil2 = excitation
    device.check_acquisition(len(coil1), coil1.sample_rate)
    hp = np.asarray(getattr(h_perp, "samples", h_perp), dtype=np.float64)[None, :]
    ht = np.asarray(getattr(h_tan, "samples", h_tan), dtype=np.float64)[None, :]
    y = acquire_array(coil1.samples, coil2.samples, hp, ht)[0]
    y = device.quantize(_add_noise(y, noise_std, rng_seed))
    return SampledWaveform(y, coil1.sample_rate, "tmr output")


def simulate_measurement(excitation, point, lift_off: float, sample: BenchmarkSample,
                         probe: ProbeModel, device: DeviceProfile, noise_std: float,
                         rng_seed, *, mapping: BitMapping, response_samples: int) -> SampledWaveform:
    """
    TMR output for the given coil currents at one scan point.

    The output is the linear convolution of the currents with the point's
    responses, plus seeded white Gaussian noise, quantized by `device`.
    """
    device.check_acquisition(len(excitation[0]), excitation[0].sample_rate)
    coil1, coil2 = excitation
    tau, c_perp, c_tan = _response_factors(point[0], point[1], lift_off, sample, probe, mapping)
    y = factored_output(coil1.samples, coil2.samples, tau, c_perp, c_tan, mapping,
                        response_samples)[0]
    y = device.quantize(_add_noise(y, noise_std, rng_seed))
    return SampledWaveform(y, coil1.sample_rate, "tmr output")


# --------------------------------------------------------------------------
# Scans
# --------------------------------------------------------------------------

LO_CONSTANT, LO_LIST, LO_RANDOM = 0, 1, 2


@dataclass(frozen=True)
class RandomLiftOff:
    low: float = 0.0
    high: float = 3.0


@dataclass(frozen=True)
class ScanGrid:
    """
    Raster of ``nx * ny`` points at `pitch` mm from `origin` (x, y).

    `lift_off` is a constant (mm), a (ny, nx) array, or a :class:`RandomLiftOff`.
    """

    nx: int
    ny: int
    pitch: float
    origin: tuple = (0.0, 0.0)
    lift_off: object = 0.0

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs at least one point in each direction")
        if not self.pitch > 0:
            raise ValueError("grid pitch must be positive")
        if isinstance(self.lift_off, RandomLiftOff):
            if not 0 <= self.lift_off.low <= self.lift_off.high:
                raise ValueError("random lift-off bounds must satisfy 0 <= low <= high")
        elif np.ndim(self.lift_off) == 0:
            if float(self.lift_off) < 0:
                raise ValueError("lift-off must be non-negative")
        else:
            lo = np.asarray(self.lift_off, dtype=np.float64)
            if lo.shape != (self.ny, self.nx):
                raise ValueError(f"lift-off map shape {lo.shape} != {(self.ny, self.nx)}")
            if np.any(lo < 0):
                raise ValueError("lift-off must be non-negative")

    @classmethod
    def centered_on(cls, x: float, y: float, nx: int = 80, ny: int = 60,
                    pitch: float = 0.5, lift_off=0.0) -> "ScanGrid":
        origin = (x - 0.5 * (nx - 1) * pitch, y - 0.5 * (ny - 1) * pitch)
        return cls(nx, ny, pitch, origin, lift_off)

    @property
    def lo_mode(self) -> int:
        if isinstance(self.lift_off, RandomLiftOff):
            return LO_RANDOM
        return LO_CONSTANT if np.ndim(self.lift_off) == 0 else LO_LIST

    def xs(self) -> np.ndarray:
        return self.origin[0] + self.pitch * np.arange(self.nx)

    def ys(self) -> np.ndarray:
        return self.origin[1] + self.pitch * np.arange(self.ny)

    def lift_off_map(self, seed: int = 0) -> np.ndarray:
        if isinstance(self.lift_off, RandomLiftOff):
            out = np.empty((self.ny, self.nx))
            for idx in range(self.nx * self.ny):
                rng = np.random.default_rng(stream_seed(seed, "liftoff", idx))
                out.flat[idx] = rng.uniform(self.lift_off.low, self.lift_off.high)
            return out
        return np.broadcast_to(np.asarray(self.lift_off, dtype=np.float64),
                               (self.ny, self.nx)).copy()


@dataclass(frozen=True)
class BenchSetup:
    """Everything a scan needs besides the grid and the seed."""

    seq: PnSequence
    mapping: BitMapping
    sample: BenchmarkSample = field(default_factory=benchmark_sample)
    probe: ProbeModel = field(default_factory=ProbeModel)
    plan: ExcitationPlan = field(default_factory=ExcitationPlan.combined)
    device: DeviceProfile = PROFILES["setup1"]
    amplitude: float = 1.0
    noise_std: float = 0.01
    lowpass_fc: Optional[float] = 50e3
    offset_window_fraction: float = 0.1

    @property
    def n0(self) -> int:
        return self.mapping.n0(len(self.seq))

    def puc_config(self, max_lift_off: float = 0.0) -> PucConfig:
        s = max_lift_off + self.sample.extra_layer_thickness
        return PucConfig(
            mapping=self.mapping,
            length=len(self.seq),
            amplitude=self.amplitude,
            lowpass_fc=self.lowpass_fc,
            offset_window_fraction=self.offset_window_fraction,
            response_duration=self.probe.response_duration(self.mapping, s),
        )

    def excitation(self):
        return build_excitation(self.plan, self.seq, self.mapping, self.amplitude)

    def with_(self, **changes) -> "BenchSetup":
        return replace(self, **changes)


@dataclass
class ScanDataset:
    """
    Pulse-compressed traces over a grid, ``traces[iy, ix, n]``.

    Grid geometry, lift-off map and period index are in-memory metadata; the
    binary file keeps only what its header defines.
    """

    traces: np.ndarray
    sample_rate: float
    lo_mode: int = LO_CONSTANT
    grid: Optional[ScanGrid] = None
    lift_off: Optional[np.ndarray] = None
    period_index: Optional[int] = None
    mode: Optional[str] = None

    @property
    def nx(self) -> int:
        return self.traces.shape[1]

    @property
    def ny(self) -> int:
        return self.traces.shape[0]

    @property
    def n0(self) -> int:
        return self.traces.shape[2]

    def trace(self, ix: int, iy: int) -> SampledWaveform:
        return SampledWaveform(self.traces[iy, ix], self.sample_rate, f"hhat[{ix},{iy}]")


def default_workers() -> int:
    env = os.environ.get("PNPEC_THREADS")
    if env:
        return max(1, int(env))
    return 1


def run_scan(grid: ScanGrid, setup: BenchSetup, seed: int,
             periods: Optional[Sequence[int]] = None, workers: Optional[int] = None) -> dict:
    """
    Simulate, filter and pulse-compress every grid point.

    Each point draws noise from its own stream keyed by (seed, point index), and
    rows are processed independently, so the output does not depend on the
    number of workers or their scheduling.

    Returns:
        ``{period_index: ScanDataset}``; `periods` defaults to the plan's
        steady-state periods.
    """
    if periods is None:
        periods = setup.plan.steady_periods()
    periods = list(periods)
    for p in periods:
        if not 1 <= p < setup.plan.periods:
            raise ValueError(f"period {p} is not a steady-state period of the plan")
    n0 = setup.n0
    coil1, coil2 = setup.excitation()
    setup.device.check_acquisition(len(coil1), coil1.sample_rate)
    lo_map = grid.lift_off_map(seed)
    config = setup.puc_config(float(lo_map.max()))
    delta = synth_delta_train(setup.seq, setup.mapping).samples
    xs, ys = grid.xs(), grid.ys()
    out = {p: np.empty((grid.ny, grid.nx, n0)) for p in periods}

    def do_row(iy: int):
        try:
            tau, c_perp, c_tan = _response_factors(xs, ys[iy], lo_map[iy], setup.sample,
                                                   setup.probe, setup.mapping)
            y = factored_output(coil1.samples, coil2.samples, tau, c_perp, c_tan,
                                setup.mapping, n0)
            for ix in range(grid.nx):
                y[ix] = _add_noise(y[ix], setup.noise_std,
                                   stream_seed(seed, "noise", iy * grid.nx + ix))
            y = setup.device.quantize(y)
            for p in periods:
                y0 = lowpass_array(y[:, p * n0:(p + 1) * n0], setup.mapping.sample_rate,
                                   setup.lowpass_fc)
                out[p][iy] = compress_array(y0, delta, config)[0]
        except Exception as exc:
            raise RuntimeError(f"scan failed in row y={ys[iy]:g} mm (iy={iy}): {exc}") from exc

    workers = workers or default_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(do_row, range(grid.ny)))
    else:
        for iy in range(grid.ny):
            do_row(iy)
    return {
        p: ScanDataset(out[p], setup.mapping.sample_rate, grid.lo_mode, grid, lo_map, p,
                       setup.plan.mode_of(p))
        for p in periods
    }


def sound_point_curves(setup: BenchSetup, lift_offs: Sequence[float], seed: int,
                       point=(0.0, 0.0), period_index: Optional[int] = None) -> list:
    """Pulse-compressed traces at a defect-free point for several lift-offs."""
    if period_index is None:
        period_index = setup.plan.steady_periods()[-1]
    curves = []
    for i, lo in enumerate(lift_offs):
        grid = ScanGrid(1, 1, 1.0, point, float(lo))
        ds = run_scan(grid, setup, seed + i, [period_index], workers=1)[period_index]
        curves.append((float(lo), ds.trace(0, 0)))
    return curves


MAGIC = b"PNPEC1"
VERSION = 1


def write_dataset(path, ds: ScanDataset) -> None:
    """Little-endian: magic, u16 version, u32 Nx, Ny, N0, f64 f_s, u8 LO flag, f64 traces."""
    header = MAGIC + struct.pack("<HIIIdB", VERSION, ds.nx, ds.ny, ds.n0, ds.sample_rate,
                                 ds.lo_mode)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(ds.traces, dtype="<f8").tobytes())


def read_dataset(path) -> ScanDataset:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(MAGIC):
        raise ValueError(f"{path}: not a PNPEC1 dataset")
    fmt = "<HIIIdB"
    size = struct.calcsize(fmt)
    version, nx, ny, n0, fs, lo_mode = struct.unpack_from(fmt, data, len(MAGIC))
    if version != VERSION:
        raise ValueError(f"{path}: unsupported dataset version {version}")
    body = data[len(MAGIC) + size:]
    expected = nx * ny * n0 * 8
    if len(body) != expected:
        raise ValueError(f"{path}: expected {expected} bytes of traces, found {len(body)}")
    traces = np.frombuffer(body, dtype="<f8").reshape(ny, nx, n0).astype(np.float64)
    return ScanDataset(traces, fs, lo_mode)
