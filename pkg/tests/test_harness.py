import json
import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tensordenoise.cli import main
from tensordenoise.ecg import synthetic_ecg, write_ecg
from tensordenoise.harness import (
    METHODS,
    ExperimentSpec,
    HyperGrid,
    TrialRecord,
    emit,
    read_records_csv,
    run_cell,
    run_experiment,
    summarize,
)

SMALL = dict(sizes=(4,), ranks=(1,), snrs=(20.0,), trials=3)


def rec(value, method="amp", snr=1.0, rank=1):
    return TrialRecord("c", method, 0, 0, 3, 5, rank, snr, snr, value)


def test_single_cell_is_reproducible():
    spec = ExperimentSpec(methods=("amp",), **SMALL)
    first = list(run_experiment(spec))
    second = list(run_experiment(spec))
    assert len(first) == 3
    strip = lambda rs: [{**r.__dict__, "wall_time_ms": 0} for r in rs]
    assert strip(first) == strip(second)


def test_all_methods_cardinality():
    records = list(run_experiment(ExperimentSpec(**SMALL)))
    assert len(records) == 6 * 3
    assert [r.method for r in records[::3]] == list(METHODS)
    assert not any(r.error for r in records)
    chosen = {json.loads(r.hyperparameters)["lam"] for r in records if r.method in ("slicerank", "xrank")}
    assert chosen <= {0.01, 0.1, 1.0, 10.0}


def test_oracle_selection_dominates_literal():
    base = dict(sizes=(5,), ranks=(2,), snrs=(-1.0,), trials=4, methods=("hooi", "als"))
    oracle = list(run_experiment(ExperimentSpec(**base)))
    literal = list(run_experiment(ExperimentSpec(grid=HyperGrid(selection="literal"), **base)))
    for o, l in zip(oracle, literal):
        assert (o.cell, o.method, o.trial, o.seed) == (l.cell, l.method, l.trial, l.seed)
        assert o.denoised_snr_db >= l.denoised_snr_db


def test_cell_order_does_not_change_records():
    spec = ExperimentSpec(methods=("wiener", "amp"), sizes=(3, 4), ranks=(1, 2), snrs=(5.0,), trials=2)
    cells = spec.cells()
    forward = {(r.cell, r.method, r.trial): r for c in cells for r in run_cell(spec, c)}
    shuffled = cells[:]
    random.Random(0).shuffle(shuffled)
    for c in shuffled:
        for r in run_cell(spec, c):
            assert r.denoised_snr_db == forward[(r.cell, r.method, r.trial)].denoised_snr_db
            assert r.seed == forward[(r.cell, r.method, r.trial)].seed


def test_failed_trials_are_recorded():
    records = list(run_experiment(ExperimentSpec(methods=("amp", "hooi"), orders=(2,), sizes=(4,), ranks=(1,), snrs=(5.0,), trials=2)))
    amp = [r for r in records if r.method == "amp"]
    assert all(r.error and r.denoised_snr_db is None for r in amp)
    assert all(not r.error for r in records if r.method == "hooi")
    row = summarize(records)[0]
    assert row["method"] == "amp" and row["n_failed"] == 2 and math.isnan(row["mean_snr_db"])


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(methods=("magic",))
    with pytest.raises(ValueError):
        ExperimentSpec(trials=0)
    with pytest.raises(ValueError):
        ExperimentSpec(sizes=())
    with pytest.raises(ValueError):
        ExperimentSpec.from_dict({"sizez": [3]})
    with pytest.raises(ValueError):
        HyperGrid(selection="best")


# -- summaries -------------------------------------------------------------------


def test_summary_examples():
    assert summarize([rec(5.0)] * 4)[0] | {} == {
        "target_snr_db": 1.0, "method": "amp", "n": 4, "n_inf": 0, "n_failed": 0, "mean_snr_db": 5.0, "sd_snr_db": 0.0,
    }
    row = summarize([rec(4.0), rec(6.0)])[0]
    assert row["mean_snr_db"] == 5.0
    assert row["sd_snr_db"] == pytest.approx(math.sqrt(2), rel=1e-15)


def test_summary_excludes_infinite_values():
    row = summarize([rec(4.0), rec(math.inf), rec(6.0)])[0]
    assert (row["n"], row["n_inf"], row["mean_snr_db"]) == (2, 1, 5.0)


def test_low_rank_noisy_filter():
    records = [rec(1.0, snr=1.0, rank=1), rec(2.0, snr=5.0, rank=1), rec(3.0, snr=-1.0, rank=3), rec(4.0, snr=-1.0, rank=2)]
    rows = summarize(records, low_rank_noisy=True)
    assert [(r["target_snr_db"], r["mean_snr_db"]) for r in rows] == [(-1.0, 4.0), (1.0, 1.0)]
    with pytest.raises(ValueError):
        summarize([rec(1.0, snr=20.0)], low_rank_noisy=True)
    with pytest.raises(ValueError):
        summarize([])


def welford(values):
    n, mean, m2 = 0, 0.0, 0.0
    for v in values:
        n += 1
        delta = v - mean
        mean += delta / n
        m2 += delta * (v - mean)
    return mean, math.sqrt(m2 / (n - 1))


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=40))
def test_summary_matches_streaming_oracle(values):
    row = summarize([rec(v) for v in values])[0]
    mean, sd = welford(values)
    assert row["mean_snr_db"] == pytest.approx(mean, abs=1e-12 * max(1.0, max(map(abs, values))))
    assert row["sd_snr_db"] == pytest.approx(sd, rel=1e-9, abs=1e-12)


def test_table_layout_matches_grid():
    records = [rec(1.0, method=m, snr=s) for m in METHODS for s in (20.0, 10.0, -1.0)]
    rows = summarize(records)
    assert [(r["target_snr_db"], r["method"]) for r in rows] == [(s, m) for s in (-1.0, 10.0, 20.0) for m in sorted(METHODS)]


# -- output --------------------------------------------------------------------


def test_emit_empty_is_header_only(tmp_path):
    paths = emit([], {}, tmp_path, plots=True)
    assert (tmp_path / "records.csv").read_text().startswith("cell,method,trial,seed")
    assert len((tmp_path / "records.csv").read_text().splitlines()) == 1
    assert not any(p.suffix == ".svg" for p in paths)


def test_emit_is_byte_identical_and_round_trips(tmp_path):
    spec = ExperimentSpec(methods=("amp", "wiener"), sizes=(3, 4), ranks=(1,), snrs=(5.0,), trials=2)
    for name in ("a", "b"):
        records = list(run_experiment(spec))
        emit(records, {"by_snr": summarize(records)}, tmp_path / name, plots=True)
    for f in ("records.csv", "summary_by_snr.csv", "snr_vs_size.svg"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    back = read_records_csv(tmp_path / "a" / "records.csv")
    assert [r.denoised_snr_db for r in back] == [r.denoised_snr_db for r in records]
    svg = (tmp_path / "a" / "snr_vs_rank.svg").read_text()
    assert svg.count("<g id=\"line2d_") >= 2 and "amp" in svg and "wiener" in svg


def test_emit_json(tmp_path):
    records = list(run_experiment(ExperimentSpec(methods=("amp",), **SMALL)))
    emit(records, {"s": summarize(records)}, tmp_path, fmt="json")
    data = json.loads((tmp_path / "records.json").read_text())
    assert len(data) == 3 and data[0]["method"] == "amp"


def test_plot_series_per_method(tmp_path):
    from tensordenoise.harness import _series

    records = [rec(1.0, method=m) for m in ("amp", "hooi", "xrank")]
    assert set(_series(records, "size")) == {"amp", "hooi", "xrank"}


# -- command line ------------------------------------------------------------------


def test_cli_end_to_end(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("TENSORDENOISE_OUT", str(tmp_path / "root"))
    assert main(["gen", "--sizes", "3", "--ranks", "1", "--snrs", "10", "--trials", "2"]) == 0
    assert (tmp_path / "root" / "corpus" / "manifest.csv").exists()

    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"methods": ["amp", "hooi"], "sizes": [3], "ranks": [1, 2], "snrs": [1.0], "trials": 2, "grid": {"selection": "literal"}}))
    assert main(["run", "--config", str(cfg), "--plots"]) == 0
    out = tmp_path / "root"
    assert (out / "summary_low_rank_noisy.csv").exists() and (out / "snr_vs_rank.svg").exists()
    saved = json.loads((out / "config.json").read_text())
    assert saved["grid"]["selection"] == "literal"

    assert main(["summarize", str(out / "records.csv"), "-o", str(tmp_path / "s.csv")]) == 0
    assert (tmp_path / "s.csv").read_text().startswith("target_snr_db,method,n,")
    assert main(["plot", str(out / "records.csv"), "--out", str(tmp_path / "plots")]) == 0
    assert (tmp_path / "plots" / "snr_vs_size.svg").exists()


def test_cli_ecg(tmp_path, capsys):
    write_ecg(tmp_path / "r1.txt", synthetic_ecg(seconds=90, sample_rate=20, seed=1))
    assert main(["ecg-tensorize", str(tmp_path / "r1.txt"), "--mode", "windowed", "--snr", "10", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "r1_windowed.tensor").read_text().splitlines()[0] == "4,5,6,12,3"

    (tmp_path / "ecg.csv").write_text("path,id,label\nr1.txt,r1,unknown\n")
    code = main(["run", "--ecg-manifest", str(tmp_path / "ecg.csv"), "--methods", "amp,wiener", "--snrs", "10", "--trials", "2", "--out", str(tmp_path / "run")])
    assert code == 0
    records = read_records_csv(tmp_path / "run" / "records.csv")
    assert len(records) == 4 and records[0].cell == "ecg/r1/full/snr=10"


def test_cli_reports_errors(tmp_path, capsys):
    assert main(["run", "--methods", "nope", "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["summarize", str(tmp_path / "missing.csv")]) == 2
