"""
Command-line front end.

Exit codes: 0 success, 2 validation failure, 3 runtime failure. The scan
thread count can be set with the ``PNPEC_THREADS`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, bench, experiment, fileio, pnseq, puc, waveform

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("pnpec")


class InvalidInput(ValueError):
    pass


def _global_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed")
    g.add_argument("--out-dir", default=argparse.SUPPRESS, help="output directory")
    g.add_argument("--profile", choices=sorted(bench.PROFILES), default=argparse.SUPPRESS,
                   help="device profile")
    g.add_argument("--dry-run", action="store_true", default=argparse.SUPPRESS,
                   help="validate only, write nothing")
    g.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return p


def _out_path(args, name: str) -> Path:
    """Resolve `name` against --out-dir when it is relative."""
    path = Path(name)
    out_dir = getattr(args, "out_dir", None)
    if out_dir and not path.is_absolute():
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        path = Path(out_dir) / path
    return path


def _mapping(args) -> waveform.BitMapping:
    if args.nsbit is not None:
        return waveform.BitMapping(args.tbit, args.nsbit)
    if args.rate is not None:
        return waveform.BitMapping.from_rate(args.tbit, args.rate)
    raise InvalidInput("give --nsbit or --rate")


# -- subcommands -------------------------------------------------------------

def cmd_gen_seq(args) -> int:
    if args.kind == "legendre":
        if args.p is None:
            raise InvalidInput("--p is required for --kind legendre")
        seq = pnseq.legendre_sequence(args.p)
    else:
        if args.n is None:
            raise InvalidInput("--n is required for --kind mls")
        taps = None if args.taps is None else int(args.taps, 0)
        seq = pnseq.mls_sequence(args.n, taps, int(args.state, 0))
    if getattr(args, "dry_run", False):
        return EXIT_OK
    if args.out:
        fileio.write_sequence(_out_path(args, args.out), seq)
    else:
        sys.stdout.write("".join(f"{v}\n" for v in seq.values))
    return EXIT_OK


def cmd_synth(args) -> int:
    seq = fileio.read_sequence(args.seq)
    mapping = _mapping(args)
    w = waveform.synth_pn_waveform(seq, mapping, args.amp)
    if args.periods > 1:
        w = w.with_samples(np.tile(w.samples, args.periods))
    if getattr(args, "dry_run", False):
        return EXIT_OK
    fileio.write_waveform_csv(_out_path(args, args.out), w)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = experiment.load_config(args.config)
    out = getattr(args, "out_dir", None) or cfg.output_dir
    manifest = experiment.run_experiment(
        _without_features(cfg), out, seed=getattr(args, "seed", None),
        profile=getattr(args, "profile", None), dry_run=getattr(args, "dry_run", False),
        csv_points=args.csv,
    )
    print(json.dumps(manifest, indent=2, sort_keys=True))
    return EXIT_OK


def _without_features(cfg):
    cfg = experiment.ExperimentConfig.from_dict(cfg.to_dict())
    cfg.features = dict(cfg.features, cscan_times=[], loi_lift_offs=[])
    return cfg


def cmd_run(args) -> int:
    cfg = experiment.load_config(args.config)
    out = getattr(args, "out_dir", None) or cfg.output_dir
    manifest = experiment.run_experiment(
        cfg, out, seed=getattr(args, "seed", None), profile=getattr(args, "profile", None),
        dry_run=getattr(args, "dry_run", False),
    )
    print(json.dumps(manifest, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_validate(args) -> int:
    report = experiment.validate_config(args.config, getattr(args, "profile", None))
    print(report)
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_puc(args) -> int:
    seq = fileio.read_sequence(args.seq)
    mapping = _mapping(args)
    y = fileio.read_waveform_csv(args.input, mapping.sample_rate)
    config = puc.PucConfig(mapping, len(seq), args.amp, args.lowpass)
    result = puc.process_trace(y, seq, config, args.period)
    if getattr(args, "dry_run", False):
        return EXIT_OK
    fileio.write_waveform_csv(_out_path(args, args.out), result.hhat, "hhat")
    log.info("offset estimate %.6g", result.offset_estimate)
    return EXIT_OK


def cmd_cscan(args) -> int:
    ds = bench.read_dataset(args.dataset)
    if (args.time is None) == (args.freq is None):
        raise InvalidInput("give exactly one of --time or --freq")
    feature = (analysis.Feature("time", args.time) if args.time is not None
               else analysis.Feature("frequency", args.freq))
    img = analysis.cscan(ds, feature)
    if getattr(args, "dry_run", False):
        return EXIT_OK
    prefix = _out_path(args, args.out)
    scaling = fileio.write_pgm16(prefix.with_suffix(".pgm"), img.values)
    fileio.write_matrix_csv(prefix.with_suffix(".csv"), img.values)
    fileio.write_json(prefix.with_suffix(".json"),
                      {**scaling, "feature": {"kind": feature.kind, "value": feature.value},
                       "rows": "iy"})
    return EXIT_OK


def cmd_loi(args) -> int:
    curves = []
    for spec in args.curve:
        lo, sep, path = spec.partition("=")
        if not sep:
            raise InvalidInput(f"--curve expects LO=path.csv, got {spec!r}")
        curves.append((float(lo), fileio.read_waveform_csv(path)))
    window = tuple(args.window) if args.window else None
    idx, spread = analysis.find_loi(curves, window, args.tbit)
    fs = curves[0][1].sample_rate
    print(json.dumps({"index": idx, "time_s": idx / fs, "spread": spread}))
    return EXIT_OK


def cmd_snr_sweep(args) -> int:
    mapping = waveform.BitMapping(args.tbit, args.nsbit)
    seed = getattr(args, "seed", 0)
    if getattr(args, "dry_run", False):
        if args.trials < 30:
            raise InvalidInput(f"trials must be >= 30, got {args.trials}")
        return EXIT_OK
    rows = analysis.snr_gain_study(args.lengths, args.noise, args.trials, seed, mapping)
    slope, dev = analysis.fit_through_origin([r.length for r in rows], [r.gain for r in rows]) \
        if all(np.isfinite(r.gain) for r in rows) else (float("nan"), [float("nan")] * len(rows))
    lines = ["L,gain,analytic,deviation"]
    lines += [f"{r.length},{r.gain:.6g},{r.analytic:.6g},{d:.4g}" for r, d in zip(rows, dev)]
    text = "\n".join(lines) + "\n"
    if args.out:
        _out_path(args, args.out).write_text(text)
    sys.stdout.write(text)
    log.info("slope through origin %.4g", slope)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _global_options()
    parser = argparse.ArgumentParser(prog="pnpec", description=__doc__.strip().splitlines()[0],
                                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, parents=[common])
        p.set_defaults(func=func)
        return p

    def bit_args(p):
        p.add_argument("--tbit", type=float, default=100e-6, help="bit duration [s]")
        p.add_argument("--nsbit", type=int, default=None, help="samples per bit")
        p.add_argument("--rate", type=float, default=None, help="sample rate [Sa/s]")

    p = add("gen-seq", cmd_gen_seq, "generate a pseudo-noise sequence")
    p.add_argument("--kind", choices=["legendre", "mls"], required=True)
    p.add_argument("--p", type=int, help="prime length (legendre)")
    p.add_argument("--n", type=int, help="register length (mls)")
    p.add_argument("--taps", help="feedback polynomial mask, e.g. 0b1100001 (mls)")
    p.add_argument("--state", default="1", help="initial LFSR state (mls)")
    p.add_argument("--out", help="CSV output; stdout when omitted")

    p = add("synth", cmd_synth, "synthesize a PN excitation waveform")
    p.add_argument("--seq", required=True)
    bit_args(p)
    p.add_argument("--amp", type=float, default=1.0)
    p.add_argument("--periods", type=int, default=1)
    p.add_argument("--out", required=True)

    p = add("simulate", cmd_simulate, "run a bench scan and write datasets")
    p.add_argument("--config", required=True)
    p.add_argument("--csv", action="store_true", help="also write one CSV per point")

    p = add("puc", cmd_puc, "pulse-compress a measured trace")
    p.add_argument("--input", required=True)
    p.add_argument("--seq", required=True)
    bit_args(p)
    p.add_argument("--amp", type=float, default=1.0)
    p.add_argument("--period", type=int, default=1)
    p.add_argument("--lowpass", type=float, default=None)
    p.add_argument("--out", required=True)

    p = add("cscan", cmd_cscan, "image a dataset feature")
    p.add_argument("--dataset", required=True)
    p.add_argument("--time", type=float)
    p.add_argument("--freq", type=float)
    p.add_argument("--out", required=True, help="output prefix")

    p = add("loi", cmd_loi, "find the lift-off invariant point")
    p.add_argument("--curve", action="append", required=True, metavar="LO=CSV")
    p.add_argument("--window", type=float, nargs=2, metavar=("START", "STOP"))
    p.add_argument("--tbit", type=float, default=100e-6)

    p = add("snr-sweep", cmd_snr_sweep, "Monte Carlo SNR gain versus code length")
    p.add_argument("--lengths", type=int, nargs="+", default=[19, 67, 131])
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--tbit", type=float, default=100e-6)
    p.add_argument("--nsbit", type=int, default=20)
    p.add_argument("--out")

    p = add("run", cmd_run, "full experiment from a config")
    p.add_argument("--config", required=True)

    p = add("validate", cmd_validate, "statically validate a config")
    p.add_argument("config")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except experiment.ConfigError as exc:
        for v in exc.violations:
            print(f"error: {v}", file=sys.stderr)
        return EXIT_INVALID
    except experiment.StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
