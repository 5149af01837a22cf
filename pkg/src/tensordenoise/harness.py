"""Benchmark harness: run denoisers over a parameter grid, summarize, write tables and plots.

Every trial draws its data from a seed split off the experiment's base seed
along the cell identity and trial index, so a record depends only on
``(cell, trial, base_seed)`` and not on execution order.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Sequence

import numpy as np

from .baselines import multiway_wiener, rank_sweep
from .data import SyntheticSpec, add_noise_to_snr, generate, measure_snr_db, trial_seed
from .ecg import EPSILONS, add_signal_noise, form_tensor_full, form_tensor_windowed, read_ecg
from .stable_rank import denoise_amplification, slicerank_grid, xrank_grid

__all__ = [
    "METHODS",
    "HyperGrid",
    "ExperimentSpec",
    "Cell",
    "TrialRecord",
    "run_experiment",
    "run_cell",
    "summarize",
    "emit",
    "plot_records",
    "write_records_csv",
    "read_records_csv",
]

METHODS = ("hooi", "als", "wiener", "amp", "slicerank", "xrank")
SELECTIONS = ("oracle", "literal")


@dataclass(frozen=True)
class HyperGrid:
    lams: tuple[float, ...] = (0.01, 0.1, 1.0, 10.0)
    accs: tuple[float, ...] = (0.90, 0.95)
    m: int = 5
    tau: float = 1.0
    selection: str = "oracle"
    max_sweeps: int = 200

    def __post_init__(self):
        if not self.lams or not self.accs:
            raise ValueError("hyperparameter grids must be non-empty")
        if self.selection not in SELECTIONS:
            raise ValueError(f"selection must be one of {SELECTIONS}")


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: a corpus grid, the methods to run and how.

    ``corpus="synthetic"`` crosses ``orders x sizes x ranks x snrs`` for the
    given ``variant``.  ``corpus="ecg"`` crosses the records listed in
    ``ecg_manifest`` with ``snrs``; noise is added to the signals before the
    feature tensor is formed.
    """

    methods: tuple[str, ...] = METHODS
    corpus: str = "synthetic"
    orders: tuple[int, ...] = (3,)
    sizes: tuple[int, ...] = (10,)
    ranks: tuple[int, ...] = (1,)
    snrs: tuple[float, ...] = (1.0,)
    variant: str = "uniform"
    ecg_manifest: str | None = None
    ecg_mode: str = "full"
    epsilons: tuple[float, ...] = EPSILONS
    grid: HyperGrid = field(default_factory=HyperGrid)
    trials: int = 20
    base_seed: int = 0
    out_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ValueError(f"methods must be a non-empty subset of {METHODS}, got {list(self.methods)}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.corpus not in ("synthetic", "ecg"):
            raise ValueError("corpus must be 'synthetic' or 'ecg'")
        if self.corpus == "ecg" and not self.ecg_manifest:
            raise ValueError("an ecg corpus needs ecg_manifest")
        if self.ecg_mode not in ("full", "windowed"):
            raise ValueError("ecg_mode must be 'full' or 'windowed'")
        if not self.snrs:
            raise ValueError("empty SNR grid")
        if self.corpus == "synthetic" and not (self.orders and self.sizes and self.ranks):
            raise ValueError("empty synthetic grid")

    @classmethod
    def from_dict(cls, cfg: dict[str, Any]) -> "ExperimentSpec":
        cfg = dict(cfg)
        grid = cfg.pop("grid", {}) or {}
        unknown = set(cfg) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key in ("methods", "orders", "sizes", "ranks", "snrs", "epsilons"):
            if key in cfg:
                cfg[key] = tuple(cfg[key])
        grid = {k: tuple(v) if isinstance(v, list) else v for k, v in grid.items()}
        return cls(grid=HyperGrid(**grid), **cfg)

    def to_dict(self) -> dict[str, Any]:
        return json.loads(json.dumps(asdict(self)))

    def cells(self) -> list["Cell"]:
        if self.corpus == "ecg":
            rows = _read_ecg_manifest(self.ecg_manifest)
            return [Cell(ecg_record=row["path"], snr_db=float(snr), ecg_mode=self.ecg_mode, record_id=row["id"]) for row in rows for snr in self.snrs]
        return [
            Cell(variant=self.variant, order=d, size=s, rank=r, snr_db=float(snr))
            for d, s, r, snr in itertools.product(self.orders, self.sizes, self.ranks, self.snrs)
        ]


@dataclass(frozen=True)
class Cell:
    """One grid point; ``key`` identifies it for seeding and output."""

    snr_db: float
    variant: str = ""
    order: int = 0
    size: int = 0
    rank: int = 0
    ecg_record: str = ""
    ecg_mode: str = ""
    record_id: str = ""

    @property
    def key(self) -> str:
        if self.ecg_record:
            return f"ecg/{self.record_id}/{self.ecg_mode}/snr={self.snr_db:g}"
        return f"{self.variant}/d={self.order}/s={self.size}/r={self.rank}/snr={self.snr_db:g}"

    def seed_for(self, base_seed: int, trial: int) -> int:
        return trial_seed(base_seed, zlib.crc32(self.key.encode()), trial)


@dataclass
class TrialRecord:
    cell: str
    method: str
    trial: int
    seed: int
    order: int
    size: int
    rank: int
    target_snr_db: float
    input_snr_db: float
    denoised_snr_db: float | None
    rank_statistic: float | None = None
    hyperparameters: str = ""
    error: str = ""
    wall_time_ms: float = 0.0


# Columns written to the records CSV.  Wall time varies between runs, so it is
# written to a separate timings file to keep the records byte-reproducible.
RECORD_COLUMNS = [f.name for f in fields(TrialRecord) if f.name != "wall_time_ms"]
TIMING_COLUMNS = ["cell", "method", "trial", "wall_time_ms"]


def _read_ecg_manifest(path: str | Path) -> list[dict]:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        p = Path(row["path"])
        row["path"] = str(p if p.is_absolute() else path.parent / p)
        row.setdefault("id", p.stem)
        row["id"] = row["id"] or p.stem
    return rows


# -- a single cell ---------------------------------------------------------------


@dataclass
class _Trial:
    index: int
    seed: int
    clean: np.ndarray
    noisy: np.ndarray
    input_snr_db: float


def _cell_trials(spec: ExperimentSpec, cell: Cell) -> list[_Trial]:
    trials = []
    if cell.ecg_record:
        rec = read_ecg(cell.ecg_record)
        form = form_tensor_full if cell.ecg_mode == "full" else form_tensor_windowed
        clean = form(rec, spec.epsilons)
        for t in range(spec.trials):
            seed = cell.seed_for(spec.base_seed, t)
            noisy = form(add_signal_noise(rec, cell.snr_db, np.random.default_rng(seed)), spec.epsilons)
            trials.append(_Trial(t, seed, clean, noisy, measure_snr_db(clean, noisy)))
        return trials
    for t in range(spec.trials):
        seed = cell.seed_for(spec.base_seed, t)
        rng = np.random.default_rng(seed)
        syn = SyntheticSpec(cell.order, cell.rank, cell.size, cell.snr_db, cell.variant, seed)
        pair = add_noise_to_snr(generate(syn, rng), cell.snr_db, rng)
        trials.append(_Trial(t, seed, pair.clean, pair.noisy, pair.realized_snr_db))
    return trials


def _score(clean: np.ndarray, denoised: np.ndarray) -> float:
    return measure_snr_db(clean, denoised)


def _timed(fn: Callable[[], Any]) -> tuple[Any, float]:
    t0 = time.perf_counter()
    out = fn()
    return out, 1000.0 * (time.perf_counter() - t0)


def _record(cell: Cell, method: str, trial: _Trial, **kw) -> TrialRecord:
    return TrialRecord(
        cell=cell.key,
        method=method,
        trial=trial.index,
        seed=trial.seed,
        order=trial.clean.ndim,
        size=cell.size,
        rank=cell.rank,
        target_snr_db=cell.snr_db,
        input_snr_db=trial.input_snr_db,
        **kw,
    )


def _hyper(**kw) -> str:
    return json.dumps(kw, sort_keys=True)


def _simple_method(cell: Cell, method: str, trials: list[_Trial], run: Callable[[_Trial], Any], hyper: str) -> list[TrialRecord]:
    out = []
    for tr in trials:
        try:
            res, ms = _timed(lambda: run(tr))
            info = res.info or {}
            h = json.loads(hyper)
            if "rank" in info:
                h["rank"] = info["rank"]
            out.append(
                _record(
                    cell, method, tr,
                    denoised_snr_db=_score(tr.clean, res.denoised),
                    rank_statistic=res.rank_statistic,
                    hyperparameters=json.dumps(h, sort_keys=True),
                    wall_time_ms=ms,
                )
            )
        except Exception as exc:  # a failed trial is recorded, never fatal
            out.append(_record(cell, method, tr, denoised_snr_db=None, hyperparameters=hyper, error=f"{type(exc).__name__}: {exc}"))
    return out


def _grid_method(cell: Cell, method: str, trials: list[_Trial], grid: HyperGrid) -> list[TrialRecord]:
    """Run every (lam, acc) pair, keep the pair with the best mean SNR over the cell."""
    runner = slicerank_grid if method == "slicerank" else xrank_grid
    # results[(lam, acc)][trial] = (snr, rank_statistic, ms) or an error string
    results: dict[tuple[float, float], list] = {(lam, acc): [] for lam in grid.lams for acc in grid.accs}
    for tr in trials:
        for lam in grid.lams:
            try:
                outs, ms = _timed(lambda: runner(tr.noisy, lam, grid.accs, grid.max_sweeps))
                for acc in grid.accs:
                    o = outs[float(acc)]
                    results[(lam, acc)].append((_score(tr.clean, o.denoised), o.rank_statistic, ms))
            except Exception as exc:
                for acc in grid.accs:
                    results[(lam, acc)].append(f"{type(exc).__name__}: {exc}")

    def mean_score(rows):
        vals = [r[0] if not isinstance(r, str) else -math.inf for r in rows]
        vals = [min(v, 1e300) for v in vals]  # exact recoveries count as very large
        return float(np.mean(vals))

    best = max(results, key=lambda k: (mean_score(results[k]), -k[0], -k[1]))
    hyper = _hyper(lam=best[0], acc=best[1])
    out = []
    for tr, row in zip(trials, results[best]):
        if isinstance(row, str):
            out.append(_record(cell, method, tr, denoised_snr_db=None, hyperparameters=hyper, error=row))
        else:
            out.append(_record(cell, method, tr, denoised_snr_db=row[0], rank_statistic=row[1], hyperparameters=hyper, wall_time_ms=row[2]))
    return out


def run_cell(spec: ExperimentSpec, cell: Cell) -> list[TrialRecord]:
    """All records of one cell, methods in ``spec.methods`` order, trials ascending."""
    trials = _cell_trials(spec, cell)
    g = spec.grid
    oracle = g.selection == "oracle"
    out: list[TrialRecord] = []
    for method in spec.methods:
        if method in ("hooi", "als"):
            name = "hooi" if method == "hooi" else "cp"
            out += _simple_method(
                cell, method, trials,
                lambda tr, name=name: rank_sweep(tr.noisy, name, tr.clean if oracle else None),
                _hyper(selection=g.selection),
            )
        elif method == "wiener":
            out += _simple_method(cell, method, trials, lambda tr: multiway_wiener(tr.noisy), _hyper())
        elif method == "amp":
            out += _simple_method(
                cell, method, trials,
                lambda tr: denoise_amplification(tr.noisy, m=g.m, tau=g.tau),
                _hyper(m=g.m, tau=g.tau),
            )
        else:
            out += _grid_method(cell, method, trials, g)
    return out


def run_experiment(spec: ExperimentSpec) -> Iterator[TrialRecord]:
    """Stream records cell by cell in grid order.

    With ``spec.workers > 1`` cells run in a process pool; results still come
    back in grid order and are identical to a serial run.
    """
    cells = spec.cells()
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            for recs in pool.map(run_cell, itertools.repeat(spec), cells):
                yield from recs
    else:
        for cell in cells:
            yield from run_cell(spec, cell)


# -- summaries -------------------------------------------------------------------

SUMMARY_COLUMNS = ["n", "n_inf", "n_failed", "mean_snr_db", "sd_snr_db"]


def summarize(
    records: Sequence[TrialRecord],
    by: Sequence[str] = ("target_snr_db", "method"),
    low_rank_noisy: bool = False,
) -> list[dict[str, Any]]:
    """Mean and sample SD of denoised SNR per group.

    ``low_rank_noisy`` keeps only rank <= 2 and target SNR <= 1 dB.  Exact
    recoveries (``inf``) and failed trials are left out of the statistics and
    counted in ``n_inf`` / ``n_failed``.  Groups are sorted by their key.
    """
    if not records:
        raise ValueError("no records to summarize")
    rows = list(records)
    if low_rank_noisy:
        rows = [r for r in rows if r.rank <= 2 and r.target_snr_db <= 1.0]
        if not rows:
            raise ValueError("no records left after the low-rank / noisy filter")
    groups: dict[tuple, list[TrialRecord]] = {}
    for r in rows:
        groups.setdefault(tuple(getattr(r, k) for k in by), []).append(r)
    out = []
    for key in sorted(groups, key=lambda k: tuple((isinstance(v, str), v) for v in k)):
        grp = groups[key]
        failed = [r for r in grp if r.denoised_snr_db is None]
        vals = np.array([r.denoised_snr_db for r in grp if r.denoised_snr_db is not None], dtype=np.float64)
        finite = vals[np.isfinite(vals)]
        row = dict(zip(by, key))
        row.update(
            n=int(finite.size),
            n_inf=int(np.sum(np.isinf(vals))),
            n_failed=len(failed),
            mean_snr_db=float(np.mean(finite)) if finite.size else math.nan,
            sd_snr_db=float(np.std(finite, ddof=1)) if finite.size > 1 else (0.0 if finite.size == 1 else math.nan),
        )
        out.append(row)
    return out


# -- output ------------------------------------------------------------------------


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_records_csv(path: str | Path, records: Iterable[TrialRecord]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in RECORD_COLUMNS])


def _parse_float(s: str) -> float | None:
    return None if s == "" else float(s)


def read_records_csv(path: str | Path) -> list[TrialRecord]:
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                TrialRecord(
                    cell=row["cell"],
                    method=row["method"],
                    trial=int(row["trial"]),
                    seed=int(row["seed"]),
                    order=int(row["order"]),
                    size=int(row["size"]),
                    rank=int(row["rank"]),
                    target_snr_db=float(row["target_snr_db"]),
                    input_snr_db=float(row["input_snr_db"]),
                    denoised_snr_db=_parse_float(row["denoised_snr_db"]),
                    rank_statistic=_parse_float(row["rank_statistic"]),
                    hyperparameters=row["hyperparameters"],
                    error=row["error"],
                )
            )
    return out


def _write_table(path: Path, rows: list[dict[str, Any]], columns: list[str]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])


def _json_value(v: Any) -> Any:
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def emit(
    records: Sequence[TrialRecord],
    summaries: dict[str, list[dict[str, Any]]],
    out_dir: str | Path,
    fmt: str = "csv",
    plots: bool = False,
) -> list[Path]:
    """Write records, one table per summary and optionally SVG plots; return the paths."""
    if fmt not in ("csv", "json"):
        raise ValueError("fmt must be 'csv' or 'json'")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    written = []
    try:
        if fmt == "csv":
            p = out_dir / "records.csv"
            write_records_csv(p, records)
            written.append(p)
            for name, rows in summaries.items():
                p = out_dir / f"summary_{name}.csv"
                cols = [c for c in rows[0] if c not in SUMMARY_COLUMNS] + SUMMARY_COLUMNS if rows else SUMMARY_COLUMNS
                _write_table(p, rows, cols)
                written.append(p)
        else:
            p = out_dir / "records.json"
            payload = [{c: _json_value(getattr(r, c)) for c in RECORD_COLUMNS} for r in records]
            p.write_text(json.dumps(payload, indent=1) + "\n")
            written.append(p)
            for name, rows in summaries.items():
                p = out_dir / f"summary_{name}.json"
                p.write_text(json.dumps([{k: _json_value(v) for k, v in row.items()} for row in rows], indent=1) + "\n")
                written.append(p)
        p = out_dir / "timings.csv"
        _write_table(p, [{c: getattr(r, c) for c in TIMING_COLUMNS} for r in records], TIMING_COLUMNS)
        written.append(p)
        if plots and records:
            written += plot_records(records, out_dir)
    except OSError as exc:
        raise OSError(f"writing results under {out_dir} failed: {exc}") from exc
    return written


def _series(records: Sequence[TrialRecord], x: str) -> dict[str, tuple[list[float], list[float]]]:
    rows = summarize(records, by=("method", x))
    series: dict[str, tuple[list[float], list[float]]] = {}
    for row in rows:
        xs, ys = series.setdefault(row["method"], ([], []))
        xs.append(row[x])
        ys.append(row["mean_snr_db"])
    return series


def plot_records(records: Sequence[TrialRecord], out_dir: str | Path) -> list[Path]:
    """Mean denoised SNR against tensor size and against rank, one line per method."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "tensordenoise"
    out_dir = Path(out_dir)
    out = []
    for x, label in (("size", "tensor size"), ("rank", "rank")):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for method, (xs, ys) in _series(records, x).items():
            ax.plot(xs, ys, marker="o", label=method)
        ax.set_xlabel(label)
        ax.set_ylabel("mean denoised SNR (dB)")
        ax.legend()
        fig.tight_layout()
        p = out_dir / f"snr_vs_{x}.svg"
        fig.savefig(p, format="svg", metadata={"Date": None})
        plt.close(fig)
        out.append(p)
    return out
