"""Command line entry point.

Subcommands::

    gen            write a synthetic corpus (tensors + manifest.csv)
    run            run an experiment and write records, summaries and plots
    summarize      regroup an existing records.csv
    plot           draw SVG plots from an existing records.csv
    ecg-tensorize  turn ECG text files into feature tensors

Experiment settings come from a JSON config file (keys are the fields of
``ExperimentSpec``, hyperparameters under ``"grid"``); command line flags
override the file.  Output goes below ``$TENSORDENOISE_OUT`` (default
``./runs``) unless ``--out`` is given.

ECG input files start with the line ``sample_rate=<Hz>, leads=12, length=<n>``
followed by ``n`` rows of 12 comma-separated samples.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .data import SyntheticSpec, build_corpus
from .ecg import EPSILONS, add_signal_noise, form_tensor_full, form_tensor_windowed, read_ecg
from .harness import METHODS, ExperimentSpec, emit, plot_records, read_records_csv, run_experiment, summarize
from .tensor_core import save_tensor

log = logging.getLogger("tensordenoise")

OUT_ENV = "TENSORDENOISE_OUT"


def _out_root(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUT_ENV, "runs"))


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.split(",") if v.strip())


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.split(",") if v.strip())


def _strs(s: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in s.split(",") if v.strip())


def _add_spec_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON experiment config")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./runs)")
    p.add_argument("--methods", type=_strs, help=f"comma list from {','.join(METHODS)}")
    p.add_argument("--orders", type=_ints)
    p.add_argument("--sizes", type=_ints)
    p.add_argument("--ranks", type=_ints)
    p.add_argument("--snrs", type=_floats, help="target SNRs in dB, comma separated")
    p.add_argument("--variant", choices=("uniform", "nonuniform"))
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, dest="base_seed")
    p.add_argument("--workers", type=int)
    p.add_argument("--ecg-manifest", dest="ecg_manifest", help="CSV with columns path,id,label")
    p.add_argument("--ecg-mode", dest="ecg_mode", choices=("full", "windowed"))
    p.add_argument("--lams", type=_floats)
    p.add_argument("--accs", type=_floats)
    p.add_argument("--m", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--selection", choices=("oracle", "literal"))


def _spec_from_args(args) -> ExperimentSpec:
    cfg: dict = {}
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
    for key in ("methods", "orders", "sizes", "ranks", "snrs", "variant", "trials", "base_seed", "workers", "ecg_manifest", "ecg_mode"):
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    if getattr(args, "ecg_manifest", None):
        cfg["corpus"] = "ecg"
    grid = dict(cfg.get("grid", {}))
    for key in ("lams", "accs", "m", "tau", "selection"):
        v = getattr(args, key, None)
        if v is not None:
            grid[key] = v
    cfg["grid"] = grid
    return ExperimentSpec.from_dict(cfg)


def cmd_gen(args) -> int:
    spec = _spec_from_args(args)
    if spec.corpus != "synthetic":
        raise ValueError("gen builds synthetic corpora only")
    out = _out_root(args) / "corpus"
    specs = [
        SyntheticSpec(c.order, c.rank, c.size, c.snr_db, c.variant, c.seed_for(spec.base_seed, 0))
        for c in spec.cells()
    ]
    manifest = build_corpus(specs, spec.trials, out)
    print(manifest)
    return 0


def _summaries(records) -> dict:
    out = {"by_snr": summarize(records)}
    try:
        out["low_rank_noisy"] = summarize(records, low_rank_noisy=True)
    except ValueError:
        pass
    return out


def cmd_run(args) -> int:
    spec = _spec_from_args(args)
    out = _out_root(args)
    spec = replace(spec, out_dir=str(out))
    records = []
    for rec in run_experiment(spec):
        if rec.error:
            log.warning("%s %s trial %d failed: %s", rec.cell, rec.method, rec.trial, rec.error)
        records.append(rec)
    summaries = _summaries(records) if records else {}
    paths = emit(records, summaries, out, fmt=args.format, plots=args.plots)
    (out / "config.json").write_text(json.dumps(spec.to_dict(), indent=1, sort_keys=True) + "\n")
    for p in paths:
        print(p)
    return 0


def cmd_summarize(args) -> int:
    records = read_records_csv(args.records)
    rows = summarize(records, by=_strs(args.by), low_rank_noisy=args.low_rank_noisy)
    out = Path(args.output) if args.output else None
    fh = out.open("w", newline="") if out else sys.stdout
    try:
        cols = list(rows[0])
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row.values()])
    finally:
        if out:
            fh.close()
    return 0


def cmd_plot(args) -> int:
    records = read_records_csv(args.records)
    out = _out_root(args)
    out.mkdir(parents=True, exist_ok=True)
    if not records:
        log.warning("no records, nothing to plot")
        return 0
    for p in plot_records(records, out):
        print(p)
    return 0


def cmd_ecg_tensorize(args) -> int:
    out = _out_root(args)
    out.mkdir(parents=True, exist_ok=True)
    form = form_tensor_full if args.mode == "full" else form_tensor_windowed
    for k, path in enumerate(args.files):
        rec = read_ecg(path)
        if args.snr is not None:
            rec = add_signal_noise(rec, args.snr, np.random.default_rng([args.seed, k]))
        T = form(rec, args.epsilons)
        dest = out / f"{Path(path).stem}_{args.mode}.tensor"
        save_tensor(dest, T)
        print(dest)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tensordenoise", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic corpus")
    _add_spec_flags(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="run an experiment")
    _add_spec_flags(p)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--plots", action="store_true", help="also write SVG plots")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("summarize", help="summarize a records.csv")
    p.add_argument("records", type=Path)
    p.add_argument("--by", default="target_snr_db,method", help="grouping columns")
    p.add_argument("--low-rank-noisy", action="store_true", help="keep rank <= 2 and SNR <= 1 dB only")
    p.add_argument("-o", "--output", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("plot", help="plot a records.csv")
    p.add_argument("records", type=Path)
    p.add_argument("--out")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("ecg-tensorize", help="ECG text files to feature tensors")
    p.add_argument("files", nargs="+", type=Path)
    p.add_argument("--mode", choices=("full", "windowed"), default="full")
    p.add_argument("--epsilons", type=_floats, default=EPSILONS)
    p.add_argument("--snr", type=float, help="add per-lead noise at this SNR first")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ecg_tensorize)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"tensordenoise {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
