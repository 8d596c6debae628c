import csv
import io
import time

import numpy as np
import pytest

import lrdmiss.harness as harness
from lrdmiss.arfima import ArfimaModel
from lrdmiss.harness import (ConfigError, ExperimentConfig, flagged_cells,
                             replication_mask, replication_series, report_csv, report_read, report_write, run_mc,
                             run_sigma_tuning, run_timing)
from lrdmiss.results import EstimationError
from lrdmiss.spectral import elw
from lrdmiss.streams import stream


def small_config(**kw):
    base = dict(models=[{"d": 0.1}, {"d": 0.4}], n=300, burn=100, missing_props=[0, 0.3],
                estimators=["gph", "dfa", "copula-gaussian"], reps=3, master_seed=5)
    base.update(kw)
    return ExperimentConfig.from_dict(base)


def test_cells_follow_block_order_and_pairing():
    cfg = small_config()
    cells = cfg.cells()
    assert len(cells) == len(set(cells))
    per_model = 1 + 3 * 3  # one native row (copula), three imputations x three estimators
    assert len(cells) == 2 * per_model
    assert [c for c in cells if c[1] == "native"] == [(0, "native", "copula-gaussian"),
                                                      (1, "native", "copula-gaussian")]
    blocks = [b for _, b, _ in cells[:per_model]]
    assert blocks == sorted(blocks, key=["native", "mean", "linear", "random"].index)


def test_full_grid_size():
    cfg = ExperimentConfig(models=[ArfimaModel(0.1)])
    assert len(cfg.cells()) == 2 + 3 * 7


@pytest.mark.parametrize("bad", [
    {"models": []},
    {"estimators": ["whittle"]},
    {"imputations": ["kalman"]},
    {"missing_props": [0.9]},
    {"missing_props": [0.1, 0.1]},
    {"estimators": ["gph", "gph"]},
    {"models": [{"d": 0.1}, {"d": 0.1}]},
    {"models": [{"d": 0.7}]},
    {"reps": -1},
    {"varsigma": 0},
    {"colour": "blue"},
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        small_config(**bad)


def test_zero_reps_gives_empty_report():
    report = run_mc(small_config(reps=0))
    assert report.cells == []
    assert report.config["reps"] == 0
    lines = report_csv(report).splitlines()
    assert lines[-1].startswith("model,type,estimator,statistic")


def test_report_accounting_and_layout():
    cfg = small_config()
    report = run_mc(cfg)
    for c in report.cells:
        assert c.completed + c.failures == cfg.reps
        assert len(c.values) == cfg.reps
    # proportion 0 is the same complete series in every block
    for est in ("gph", "dfa"):
        means = {report.cell(est, b, 0.0, 1).mean for b in ("mean", "linear", "random")}
        assert len(means) == 1
    rows = list(csv.reader(io.StringIO(report_csv(report))))
    body = [r for r in rows if not r[0].startswith("#")]
    assert body[0] == ["model", "type", "estimator", "statistic", "0", "0.3"]
    types = [r[1] for r in body[1:]]
    assert types[0] == "Native" and types.index("Mean") < types.index("Linear") < types.index("Random")


def test_report_does_not_depend_on_worker_count():
    cfg = small_config()
    serial = run_mc(cfg, workers=1)
    parallel = run_mc(cfg, workers=2)
    assert report_csv(serial) == report_csv(parallel)
    assert [c.values for c in serial.cells] == [c.values for c in parallel.cells]


def test_masks_are_shared_across_models():
    cfg = small_config(n=1000)
    low, high = cfg.models
    for r in range(5):
        a = replication_series(cfg, low, 0.3, r)
        b = replication_series(cfg, high, 0.3, r)
        np.testing.assert_array_equal(a.observed, b.observed)
        assert not np.array_equal(a.observed_values, b.observed_values)
    assert not np.array_equal(replication_mask(1000, 0.3, 5, 0), replication_mask(1000, 0.3, 5, 1))


def test_forced_failures_are_counted_not_averaged(monkeypatch):
    cfg = small_config(models=[{"d": 0.3}], estimators=["gph"], imputations=["mean"],
                       missing_props=[0], reps=6)
    clean = run_mc(cfg).cell("gph", "mean", 0.0)
    calls = {"n": 0}
    real = harness.run_estimator

    def flaky(name, data, bandwidth=None):
        calls["n"] += 1
        if calls["n"] in (2, 5):
            raise EstimationError("forced")
        return real(name, data, bandwidth)

    monkeypatch.setattr(harness, "run_estimator", flaky)
    broken = run_mc(cfg, workers=1).cell("gph", "mean", 0.0)
    assert broken.completed == clean.completed - 2 and broken.failures == 2
    kept = [v for i, v in enumerate(clean.values) if i not in (1, 4)]
    assert broken.mean == pytest.approx(np.mean(kept))
    assert broken.values[1] is None and broken.values[4] is None


def test_all_failing_cell_is_flagged(monkeypatch):
    cfg = small_config(models=[{"d": 0.3}], estimators=["gph"], imputations=["mean"],
                       missing_props=[0], reps=2)

    def always_fail(name, data, bandwidth=None):
        raise EstimationError("forced")

    monkeypatch.setattr(harness, "run_estimator", always_fail)
    report = run_mc(cfg, workers=1)
    (cell,) = report.cells
    assert cell.mean is None and cell.failures == 2
    assert flagged_cells(report) == [cell]


def test_boundary_estimates_kept_or_dropped(monkeypatch):
    from lrdmiss.results import EstimateResult

    cfg_keep = small_config(models=[{"d": 0.3}], estimators=["lw"], imputations=["mean"],
                            missing_props=[0], reps=3)
    cfg_drop = small_config(models=[{"d": 0.3}], estimators=["lw"], imputations=["mean"],
                            missing_props=[0], reps=3, drop_boundary=True)
    monkeypatch.setattr(harness, "run_estimator",
                        lambda *a, **k: EstimateResult(0.499, "lw", 10, converged=False,
                                                       reason="boundary"))
    kept = run_mc(cfg_keep, workers=1).cells[0]
    dropped = run_mc(cfg_drop, workers=1).cells[0]
    assert kept.boundary == 3 and kept.completed == 3 and kept.mean == pytest.approx(0.499)
    assert dropped.boundary == 3 and dropped.completed == 0 and dropped.failures == 3


def test_json_round_trip(tmp_path):
    report = run_mc(small_config(reps=2))
    path = tmp_path / "r.json"
    report_write(report, path, "json", full=True)
    assert report_read(path) == report
    report_write(report, path, "json")
    assert all(c.values is None for c in report_read(path).cells)


def test_csv_is_byte_identical_across_runs(tmp_path):
    cfg = small_config(reps=2)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    report_write(run_mc(cfg), a)
    report_write(run_mc(cfg), b)
    assert a.read_bytes() == b.read_bytes()
    assert cfg.digest() in a.read_text()


def test_report_write_surfaces_io_errors(tmp_path):
    with pytest.raises(OSError):
        report_write(run_mc(small_config(reps=0)), tmp_path / "missing" / "r.csv")


def test_sigma_tuning_structure():
    report = run_sigma_tuning([0.1, 0.4], [0.3], [4, 10], reps=3, n=300, burn=100)
    assert len(report.rows) == 2
    row = report.row(0.4, 0.3)
    assert set(row.imputed) == {4.0, 10.0}
    header = report.to_csv().splitlines()[0]
    assert header.startswith("d,missing,S_mean")
    with pytest.raises(ConfigError):
        run_sigma_tuning([], [0.3], [4], reps=1)


def test_sigma_tuning_large_varsigma_does_not_inflate():
    report = run_sigma_tuning([0.3], [0.5], [4, 1e6], reps=5, n=500, burn=100)
    row = report.row(0.3, 0.5)
    assert row.imputed[1e6][0] <= row.observed[0] + 0.01
    assert row.imputed[4.0][0] > row.imputed[1e6][0]


def test_time_calls_on_a_stub():
    total, lo, hi = harness._time_calls(lambda x: None, list(range(100)), warmup=5)
    assert 0 <= lo <= hi <= total < 0.01


def test_timing_report_shape():
    cfg = small_config(models=[{"d": 0.2}], estimators=["gph", "copula-gaussian"], reps=2)
    report = run_timing(cfg, warmup=1)
    for e in report.entries:
        assert e.total >= e.max_call >= e.min_call >= 0
    tasks = {(e.task, e.input) for e in report.entries}
    assert ("gph", "original") in tasks and ("copula-gaussian", "native") in tasks
    assert ("gph", "native") not in tasks
    assert ("impute:random", "random") in tasks
    assert report.to_csv().startswith("task,model,n,missing,input,total_s")
    assert set(report.summary()) >= {"gph", "copula-gaussian"}


@pytest.mark.slow
def test_elw_time_grows_superlinearly():
    # FFT differencing makes each objective call O(n log n), so the expected
    # ratio is only about 2.15; the median per call keeps scheduler noise out.
    def per_call(n):
        series = [stream(3, n, r).normal(size=n) for r in range(10)]
        times = []
        for y in series:
            start = time.perf_counter()
            elw(y)
            times.append(time.perf_counter() - start)
        return np.median(times)

    per_call(1000)
    assert per_call(2000) > 2 * per_call(1000)
