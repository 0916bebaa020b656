"""
Experiment configuration and the end-to-end runner.

A config is a JSON document. Parsing fills every default, so serialising the
parsed config gives a canonical form that is stable under re-parsing.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis, bench, fileio, pnseq
from .waveform import BitMapping

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Config failed static validation; `violations` lists every problem."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException):
        self.stage = stage
        super().__init__(f"stage {stage!r} failed: {exc}")


def _default_probe() -> dict:
    return asdict(bench.ProbeModel())


@dataclass
class ExperimentConfig:
    sequence: dict = field(default_factory=lambda: {"kind": "legendre", "p": 67})
    mapping: dict = field(default_factory=lambda: {"t_bit": 100e-6, "n_s_bit": 20})
    amplitude: float = 1.0
    plan: dict = field(default_factory=lambda: {"schedule": [[1, 1], [1, 1], [1, -1], [1, -1]]})
    periods: Optional[list] = None
    sample: dict = field(default_factory=lambda: {"name": "benchmark", "extra_layer_mm": 0.0})
    scan_center: object = "D5"
    probe: dict = field(default_factory=_default_probe)
    device: str = "setup1"
    grid: dict = field(default_factory=lambda: {"nx": 80, "ny": 60, "pitch_mm": 0.5})
    lift_off: dict = field(default_factory=lambda: {"kind": "constant", "value": 0.0})
    noise_std: float = 0.01
    lowpass_hz: Optional[float] = 50e3
    seed: int = 1234
    features: dict = field(default_factory=lambda: {
        "cscan_times": [5e-4],
        "loi_lift_offs": [0.0, 1.0, 2.0, 3.0],
        "loi_window": [2e-4, 1e-3],
    })
    output_dir: str = "out"
    version: int = SCHEMA_VERSION

    # -- serialisation ----------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError(["config root must be a JSON object"])
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError([f"unknown config key(s): {', '.join(unknown)}"])
        cfg = cls(**copy.deepcopy(data))
        if cfg.probe is not None:
            probe = _default_probe()
            probe.update(cfg.probe)
            cfg.probe = probe
        defaults = cls().features
        defaults.update(cfg.features or {})
        cfg.features = defaults
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        """Canonical JSON text."""
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()

    # -- building ---------------------------------------------------------

    def build_sequence(self) -> pnseq.PnSequence:
        s = self.sequence
        kind = s.get("kind")
        if kind == "legendre":
            return pnseq.legendre_sequence(s.get("p"))
        if kind == "mls":
            taps = s.get("taps")
            if isinstance(taps, str):
                taps = int(taps, 0)
            return pnseq.mls_sequence(s.get("n"), taps, s.get("state", 1))
        raise ValueError(f"unknown sequence kind {kind!r}")

    def build_mapping(self) -> BitMapping:
        m = self.mapping
        t_bit = float(m["t_bit"])
        if "sample_rate" in m and m["sample_rate"] is not None:
            mapping = BitMapping.from_rate(t_bit, float(m["sample_rate"]))
            if "n_s_bit" in m and m["n_s_bit"] is not None and m["n_s_bit"] != mapping.n_s_bit:
                raise ValueError(
                    f"grid misalignment: n_s_bit={m['n_s_bit']} disagrees with "
                    f"t_bit * sample_rate = {mapping.n_s_bit}"
                )
            return mapping
        return BitMapping(t_bit, m["n_s_bit"])

    def build_plan(self) -> bench.ExcitationPlan:
        p = self.plan
        if "schedule" in p:
            return bench.ExcitationPlan(tuple(tuple(x) for x in p["schedule"]))
        mode = p.get("mode")
        periods = int(p.get("periods", 2))
        if mode == bench.PERPENDICULAR:
            return bench.ExcitationPlan.perpendicular(periods)
        if mode == bench.TANGENTIAL:
            return bench.ExcitationPlan.tangential(periods)
        raise ValueError(f"plan needs a 'schedule' or a mode in {bench.MODES}, got {mode!r}")

    def build_sample(self) -> bench.BenchmarkSample:
        name = self.sample.get("name", "benchmark")
        if name != "benchmark":
            raise ValueError(f"unknown sample {name!r}")
        extra = float(self.sample.get("extra_layer_mm", 0.0))
        if extra < 0:
            raise ValueError("extra_layer_mm must be non-negative")
        return bench.benchmark_sample(extra)

    def build_lift_off(self):
        lo = self.lift_off
        kind = lo.get("kind")
        if kind == "constant":
            return float(lo["value"])
        if kind == "list":
            return np.asarray(lo["values"], dtype=np.float64)
        if kind == "random":
            return bench.RandomLiftOff(float(lo.get("low", 0.0)), float(lo.get("high", 3.0)))
        raise ValueError(f"unknown lift-off kind {kind!r}")

    def build_grid(self, sample: bench.BenchmarkSample) -> bench.ScanGrid:
        g = self.grid
        if isinstance(self.scan_center, str):
            d = sample.defect(self.scan_center)
            cx, cy = d.x, d.y
        else:
            cx, cy = (float(v) for v in self.scan_center)
        return bench.ScanGrid.centered_on(cx, cy, int(g["nx"]), int(g["ny"]),
                                          float(g["pitch_mm"]), self.build_lift_off())

    def build_setup(self, profile: Optional[str] = None) -> bench.BenchSetup:
        return bench.BenchSetup(
            seq=self.build_sequence(),
            mapping=self.build_mapping(),
            sample=self.build_sample(),
            probe=bench.ProbeModel(**self.probe),
            plan=self.build_plan(),
            device=bench.get_profile(profile or self.device),
            amplitude=float(self.amplitude),
            noise_std=float(self.noise_std),
            lowpass_fc=None if self.lowpass_hz is None else float(self.lowpass_hz),
        )


def _check(violations: list, label: str, fn):
    try:
        return fn()
    except (ValueError, TypeError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        violations.append(f"{label}: {msg}")
        return None


def check_config(cfg: ExperimentConfig, profile: Optional[str] = None) -> list:
    """Every violated invariant of an already-parsed config (empty when valid)."""
    v = []
    seq = _check(v, "sequence", cfg.build_sequence)
    mapping = _check(v, "mapping", cfg.build_mapping)
    plan = _check(v, "plan", cfg.build_plan)
    sample = _check(v, "sample", cfg.build_sample)
    device = _check(v, "device", lambda: bench.get_profile(profile or cfg.device))
    probe = _check(v, "probe", lambda: bench.ProbeModel(**cfg.probe))
    grid = None
    if sample is not None:
        grid = _check(v, "grid", lambda: cfg.build_grid(sample))
    if not (isinstance(cfg.noise_std, (int, float)) and cfg.noise_std >= 0):
        v.append(f"noise_std: must be a non-negative number, got {cfg.noise_std!r}")
    if not isinstance(cfg.seed, int) or cfg.seed < 0:
        v.append(f"seed: must be a non-negative integer, got {cfg.seed!r}")
    if not isinstance(cfg.amplitude, (int, float)) or not math.isfinite(cfg.amplitude):
        v.append(f"amplitude: must be a finite number, got {cfg.amplitude!r}")
    if cfg.version != SCHEMA_VERSION:
        v.append(f"version: unsupported config version {cfg.version}")

    if mapping is not None and cfg.lowpass_hz is not None:
        if not cfg.lowpass_hz > 0:
            v.append("lowpass_hz: must be positive or null")
        elif cfg.lowpass_hz >= mapping.sample_rate / 2:
            v.append(f"lowpass_hz: {cfg.lowpass_hz:g} Hz is not below Nyquist "
                     f"({mapping.sample_rate / 2:g} Hz)")
    if plan is not None:
        periods = cfg.periods if cfg.periods is not None else plan.steady_periods()
        if not periods:
            v.append("periods: plan has no steady-state period (repeat a configuration)")
        for p in periods:
            if not (isinstance(p, int) and 1 <= p < plan.periods):
                v.append(f"periods: {p!r} is not a steady-state period index in 1..{plan.periods - 1}")
    if None not in (seq, mapping, plan, device):
        total = plan.periods * mapping.n0(len(seq))
        _check(v, "device", lambda: device.check_acquisition(total, mapping.sample_rate))
    if None not in (seq, mapping, probe, sample, grid):
        max_lo = (grid.lift_off.high if isinstance(grid.lift_off, bench.RandomLiftOff)
                  else float(np.max(grid.lift_off)))
        _check(v, "timing", lambda: bench.BenchSetup(seq, mapping, sample, probe).puc_config(max_lo))
    if mapping is not None and seq is not None:
        period = mapping.period(len(seq))
        for t in cfg.features.get("cscan_times", []):
            if not 0 <= t < period:
                v.append(f"features.cscan_times: {t:g} s outside [0, {period:g}) s")
        win = cfg.features.get("loi_window")
        if win is not None and not (len(win) == 2 and 0 <= win[0] < win[1] <= period):
            v.append(f"features.loi_window: {win!r} must be [start, stop] within the period")
        los = cfg.features.get("loi_lift_offs", [])
        if los and len(los) < 2:
            v.append("features.loi_lift_offs: need at least two lift-offs")
        if any(lo < 0 for lo in los):
            v.append("features.loi_lift_offs: lift-off must be non-negative")
    return v


@dataclass
class ValidationReport:
    path: str
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return f"{self.path}: OK"
        return "\n".join([f"{self.path}: {len(self.violations)} violation(s)"]
                         + [f"  - {x}" for x in self.violations])


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from exc
    return ExperimentConfig.from_dict(data)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read: {exc.strerror}"]) from exc
    return parse_config_text(text, str(path))


def validate_config(path, profile: Optional[str] = None) -> ValidationReport:
    """Static validation of a config file without running anything."""
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        return ValidationReport(str(path), exc.violations)
    except TypeError as exc:
        return ValidationReport(str(path), [f"malformed config: {exc}"])
    return ValidationReport(str(path), check_config(cfg, profile))


def _tag(x: float) -> str:
    return f"{x:.6g}".replace("+", "")


def run_experiment(cfg: ExperimentConfig, out_dir=None, *, seed: Optional[int] = None,
                   profile: Optional[str] = None, dry_run: bool = False,
                   workers: Optional[int] = None, csv_points: bool = False) -> dict:
    """
    Sequence, scan, pulse compression and analysis for one config.

    Writes datasets, C-scans (PGM + sidecar JSON + CSV), figure CSVs and a
    ``manifest.json`` last. On failure, every file written so far is renamed
    with a ``.quarantine`` suffix and :class:`StageError` names the stage.

    Returns:
        The manifest (empty ``files`` for a dry run).
    """
    if seed is not None:
        cfg = copy.deepcopy(cfg)
        cfg.seed = int(seed)
    violations = check_config(cfg, profile)
    if violations:
        raise ConfigError(violations)
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    manifest = {
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "profile": profile or cfg.device,
        "files": {},
    }
    if dry_run:
        return manifest

    out.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name: str, writer, *args):
        path = out / name
        writer(path, *args)
        written.append(path)
        return path

    stage = "config"
    try:
        emit("config.json", lambda p: p.write_text(cfg.dumps()))

        stage = "sequence"
        setup = cfg.build_setup(profile)
        emit("sequence.csv", fileio.write_sequence, setup.seq)
        coil1, coil2 = setup.excitation()
        emit("excitation.csv", lambda p: np.savetxt(
            p, np.column_stack([coil1.times, coil1.samples, coil2.samples]), delimiter=",",
            header="t_seconds,coil1,coil2", comments="", fmt="%.17g"))

        stage = "simulate"
        grid = cfg.build_grid(setup.sample)
        periods = cfg.periods if cfg.periods is not None else setup.plan.steady_periods()
        datasets = bench.run_scan(grid, setup, cfg.seed, periods, workers)

        stage = "analysis"
        for p, ds in datasets.items():
            stem = f"p{p}_{ds.mode}"
            emit(f"dataset_{stem}.pnpec", bench.write_dataset, ds)
            emit(f"dataset_{stem}.json", fileio.write_json, {
                "period_index": p, "mode": ds.mode, "nx": ds.nx, "ny": ds.ny, "n0": ds.n0,
                "sample_rate": ds.sample_rate, "pitch_mm": grid.pitch,
                "origin_mm": list(grid.origin), "lo_mode": ds.lo_mode,
            })
            emit(f"liftoff_{stem}.csv", fileio.write_matrix_csv, ds.lift_off)
            if csv_points:
                pdir = out / f"points_{stem}"
                pdir.mkdir(exist_ok=True)
                for iy in range(ds.ny):
                    for ix in range(ds.nx):
                        emit(f"points_{stem}/x{ix:03d}_y{iy:03d}.csv",
                             fileio.write_waveform_csv, ds.trace(ix, iy), "hhat")
            for t in cfg.features.get("cscan_times", []):
                img = analysis.cscan(ds, analysis.Feature("time", t))
                name = f"cscan_{stem}_t{_tag(t)}"
                scaling = {}
                emit(name + ".pgm", lambda path: scaling.update(fileio.write_pgm16(path, img.values)))
                emit(name + ".csv", fileio.write_matrix_csv, img.values)
                emit(name + ".json", fileio.write_json, {
                    **scaling, "feature": {"kind": "time", "value": t},
                    "pitch_mm": grid.pitch, "origin_mm": list(grid.origin), "rows": "iy",
                })

        los = cfg.features.get("loi_lift_offs", [])
        if len(los) >= 2:
            stage = "loi"
            curves = bench.sound_point_curves(setup, los, cfg.seed)
            win = cfg.features.get("loi_window")
            idx, spread = analysis.find_loi(curves, None if win is None else tuple(win),
                                            setup.mapping.t_bit)
            fs = setup.mapping.sample_rate
            table = np.column_stack([curves[0][1].times] + [c[1].samples for c in curves])
            header = "t_seconds," + ",".join(f"lo_{_tag(lo)}mm" for lo, _ in curves)
            emit("loi_curves.csv", lambda path: np.savetxt(
                path, table, delimiter=",", header=header, comments="", fmt="%.17g"))
            emit("loi.json", fileio.write_json,
                 {"index": idx, "time_s": idx / fs, "spread": spread, "lift_offs_mm": los})

        stage = "manifest"
        manifest["files"] = {p.relative_to(out).as_posix(): fileio.sha256_file(p)
                             for p in written}
        fileio.write_json(out / "manifest.json", manifest)
    except Exception as exc:
        for p in written:
            if p.exists():
                p.rename(p.with_name(p.name + ".quarantine"))
        raise StageError(stage, exc) from exc
    return manifest


def verify_manifest(out_dir) -> list:
    """Files whose checksum no longer matches the manifest."""
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text())
    return [name for name, digest in manifest["files"].items()
            if fileio.sha256_file(out / name) != digest]
