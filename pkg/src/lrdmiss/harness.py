"""Monte Carlo experiments: estimator comparison tables, the varsigma tuning
table and the timing benchmark.

Every replication draws from keyed streams (see :mod:`lrdmiss.streams`):

* the complete series from ``(seed, SIMULATE, model, r)``;
* the missing mask from ``(seed, MASK, n, proportion, r)``, so that scenarios
  with equal ``n`` and proportion share their masks whatever the model;
* random-imputation uniforms from ``(seed, IMPUTE, model, proportion, r)``.

Results therefore do not depend on execution order or the number of worker
processes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .arfima import ArfimaModel, simulate_gaussian
from .copula import CopulaConfig, estimate_d_copula
from .gaps import GappySeries, MissingSpec, impute, missing_mask
from .results import EstimateResult
from .scaling import dfa_estimate, rs_estimate
from .spectral import elw, gph, local_whittle
from .streams import IMPUTE, MASK, SIMULATE, proportion_key, stream, text_key

ESTIMATORS = ("copula-gaussian", "copula-frank", "dfa", "gph", "lw", "elw", "rs")
NATIVE_ESTIMATORS = ("copula-gaussian", "copula-frank")
IMPUTATIONS = ("native", "mean", "linear", "random")
BLOCK_LABELS = {"native": "Native", "mean": "Mean", "linear": "Linear", "random": "Random"}
DEFAULT_PROPS = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)
WORKERS_ENV = "LRDMISS_WORKERS"

REPORT_NOTE = ("wavelet-based native estimators and LoMPE are not "
               "implemented; the grid covers the copula natives and five classical estimators")


class ConfigError(ValueError):
    """An experiment configuration is invalid."""


def run_estimator(name: str, data, bandwidth: int | None = None) -> EstimateResult:
    """Run estimator ``name`` on a complete array or (copula only) a GappySeries."""
    if name == "gph":
        return gph(data, bandwidth)
    if name == "lw":
        return local_whittle(data, bandwidth)
    if name == "elw":
        return elw(data, bandwidth)
    if name == "rs":
        return rs_estimate(data)
    if name == "dfa":
        return dfa_estimate(data)
    if name in NATIVE_ESTIMATORS:
        return estimate_d_copula(data, CopulaConfig(family=name.split("-", 1)[1]))
    raise ConfigError(f"unknown estimator {name!r}")


@dataclass
class ExperimentConfig:
    models: list[ArfimaModel]
    n: int = 1000
    burn: int = 1000
    missing_props: tuple[float, ...] = DEFAULT_PROPS
    imputations: tuple[str, ...] = IMPUTATIONS
    estimators: tuple[str, ...] = ESTIMATORS
    reps: int = 200
    master_seed: int = 1
    varsigma: float = 10.0
    bandwidth: int | None = None
    drop_boundary: bool = False

    def __post_init__(self) -> None:
        self.models = [m if isinstance(m, ArfimaModel) else ArfimaModel.from_dict(m)
                       for m in self.models]
        self.missing_props = tuple(float(p) for p in self.missing_props)
        self.imputations = tuple(self.imputations)
        self.estimators = tuple(self.estimators)
        self.validate()

    def validate(self) -> None:
        if not self.models:
            raise ConfigError("at least one model is required")
        if len({m.to_json() for m in self.models}) != len(self.models):
            raise ConfigError("duplicate models in the grid")
        if self.n < 3 or self.burn < 0 or self.reps < 0 or self.master_seed < 0:
            raise ConfigError("need n >= 3 and nonnegative burn, reps, master_seed")
        for group, allowed in ((self.imputations, IMPUTATIONS), (self.estimators, ESTIMATORS)):
            unknown = set(group) - set(allowed)
            if unknown:
                raise ConfigError(f"unknown entries {sorted(unknown)}; allowed: {allowed}")
            if len(set(group)) != len(group):
                raise ConfigError("duplicate entries in the estimator or imputation list")
        if len(set(self.missing_props)) != len(self.missing_props):
            raise ConfigError("duplicate missing proportions")
        for p in self.missing_props:
            try:
                MissingSpec(p)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if not self.varsigma > 0:
            raise ConfigError("varsigma must be positive")

    def cells(self) -> list[tuple[int, str, str]]:
        """(model index, imputation block, estimator) rows in report order."""
        out = []
        for i, _ in enumerate(self.models):
            for block in IMPUTATIONS:
                if block not in self.imputations:
                    continue
                for est in self.estimators:
                    if block == "native" and est not in NATIVE_ESTIMATORS:
                        continue
                    out.append((i, block, est))
        return out

    def to_dict(self) -> dict:
        return {"models": [m.to_dict() for m in self.models], "n": self.n, "burn": self.burn,
                "missing_props": list(self.missing_props), "imputations": list(self.imputations),
                "estimators": list(self.estimators), "reps": self.reps,
                "master_seed": self.master_seed, "varsigma": self.varsigma,
                "bandwidth": self.bandwidth, "drop_boundary": self.drop_boundary}

    @classmethod
    def from_dict(cls, spec: dict) -> "ExperimentConfig":
        known = {"models", "n", "burn", "missing_props", "imputations", "estimators", "reps",
                 "master_seed", "varsigma", "bandwidth", "drop_boundary"}
        unknown = set(spec) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            return cls(**spec)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                spec = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(spec)

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


@dataclass
class CellSummary:
    model: dict
    imputation: str
    estimator: str
    proportion: float
    mean: float | None
    sd: float | None
    completed: int
    failures: int
    boundary: int
    seconds: float
    values: list | None = None


@dataclass
class McReport:
    config: dict
    config_hash: str
    version: str
    cells: list[CellSummary] = field(default_factory=list)

    def cell(self, estimator: str, imputation: str, proportion: float,
             model_index: int = 0) -> CellSummary:
        model = self.config["models"][model_index]
        for c in self.cells:
            if (c.estimator == estimator and c.imputation == imputation and c.model == model
                    and math.isclose(c.proportion, proportion)):
                return c
        raise KeyError((estimator, imputation, proportion, model_index))

    def to_dict(self, full: bool = False) -> dict:
        cells = []
        for c in self.cells:
            d = asdict(c)
            if not full:
                d.pop("values")
            cells.append(d)
        return {"config": self.config, "config_hash": self.config_hash,
                "version": self.version, "cells": cells}

    @classmethod
    def from_dict(cls, data: dict) -> "McReport":
        return cls(data["config"], data["config_hash"], data["version"],
                   [CellSummary(**{"values": None, **c}) for c in data["cells"]])


# --------------------------------------------------------------------------
# one replication


def _simulate(config: ExperimentConfig, model: ArfimaModel, r: int) -> np.ndarray:
    rng = stream(config.master_seed, SIMULATE, text_key(model.to_json()), r)
    return simulate_gaussian(model, config.n, config.burn, rng).values


def replication_mask(n: int, proportion: float, master_seed: int, r: int) -> np.ndarray:
    """The observed-mask of replication ``r``; the model plays no part."""
    rng = stream(master_seed, MASK, n, proportion_key(proportion), r)
    return missing_mask(n, MissingSpec(proportion), rng)


def replication_series(config: ExperimentConfig, model: ArfimaModel, proportion: float,
                       r: int) -> GappySeries:
    """The gappy series of replication ``r`` for one model and proportion."""
    y = _simulate(config, model, r)
    return GappySeries(y, replication_mask(config.n, proportion, config.master_seed, r))


def _impute_stream(master_seed: int, model: ArfimaModel, proportion: float, r: int):
    return stream(master_seed, IMPUTE, text_key(model.to_json()), proportion_key(proportion), r)


def _estimate(name: str, data, bandwidth) -> tuple[float, str, float]:
    t0 = time.perf_counter()
    try:
        res = run_estimator(name, data, bandwidth)
    except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError):
        return math.nan, "failed", time.perf_counter() - t0
    elapsed = time.perf_counter() - t0
    if not np.isfinite(res.d_hat):
        return math.nan, "failed", elapsed
    return res.d_hat, ("ok" if res.converged else "boundary"), elapsed


def _replicate(config_dict: dict, r: int) -> list[tuple]:
    """All cell outcomes of replication ``r`` as (cell index, prop index, d, status, sec)."""
    config = ExperimentConfig.from_dict(config_dict)
    cells = config.cells()
    out = []
    for mi, model in enumerate(config.models):
        y = _simulate(config, model, r)
        original = {}
        for pi, prop in enumerate(config.missing_props):
            data_for = {}
            if prop > 0:
                obs = replication_mask(config.n, prop, config.master_seed, r)
                gappy = GappySeries(y, obs)
            for ci, (cmi, block, est) in enumerate(cells):
                if cmi != mi:
                    continue
                if prop == 0:
                    if est not in original:
                        original[est] = _estimate(est, y, config.bandwidth)
                    out.append((ci, pi) + original[est])
                    continue
                if block == "native":
                    out.append((ci, pi) + _estimate(est, gappy, config.bandwidth))
                    continue
                if block not in data_for:
                    data_for[block] = impute(gappy, block, config.varsigma,
                                             _impute_stream(config.master_seed, model, prop, r))
                out.append((ci, pi) + _estimate(est, data_for[block], config.bandwidth))
    return out


def _workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, int(workers))


def _map_reps(fn: Callable, payload, reps: int, workers: int) -> list:
    if workers == 1 or reps <= 1:
        return [fn(payload, r) for r in range(reps)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, [payload] * reps, range(reps), chunksize=max(1, reps // (4 * workers))))


def run_mc(config: ExperimentConfig, workers: int | None = None, keep_values: bool = True) -> McReport:
    """Run the Monte Carlo comparison and aggregate per cell.

    Cell means and SDs use the successful replications only. Boundary-pinned
    estimates count as successes (and in ``boundary``) unless
    ``config.drop_boundary`` is set, in which case they count as failures.
    """
    report = McReport(config.to_dict(), config.digest(), __version__)
    if config.reps == 0:
        return report
    cells = config.cells()
    n_props = len(config.missing_props)
    vals = np.full((len(cells), n_props, config.reps), np.nan)
    status = np.full((len(cells), n_props, config.reps), "", dtype=object)
    secs = np.zeros((len(cells), n_props))

    per_rep = _map_reps(_replicate, config.to_dict(), config.reps, _workers(workers))
    for r, records in enumerate(per_rep):
        for ci, pi, d, st, sec in records:
            vals[ci, pi, r] = d
            status[ci, pi, r] = st
            secs[ci, pi] += sec

    for ci, (mi, block, est) in enumerate(cells):
        for pi, prop in enumerate(config.missing_props):
            st = status[ci, pi]
            ok = (st == "ok") | ((st == "boundary") & (not config.drop_boundary))
            good = vals[ci, pi][ok]
            mean = float(good.mean()) if len(good) else None
            sd = float(good.std(ddof=1)) if len(good) > 1 else None
            values = [None if not k else float(v) for k, v in zip(ok, vals[ci, pi])] if keep_values else None
            report.cells.append(CellSummary(
                model=config.models[mi].to_dict(), imputation=block, estimator=est,
                proportion=prop, mean=mean, sd=sd, completed=int(ok.sum()),
                failures=int(config.reps - ok.sum()), boundary=int(np.sum(st == "boundary")),
                seconds=float(secs[ci, pi]), values=values))
    return report


def flagged_cells(report: McReport) -> list[CellSummary]:
    """Cells in which every replication failed."""
    return [c for c in report.cells if c.completed == 0 and c.failures > 0]


# --------------------------------------------------------------------------
# report files


def _fmt(x) -> str:
    return "" if x is None else f"{x:.6f}"


def report_csv(report: McReport) -> str:
    """Table layout: blocks by imputation, one row per (estimator, statistic),
    one column per missing proportion. Wall times are left out so identical
    configurations give identical bytes."""
    props = report.config["missing_props"]
    buf = io.StringIO()
    buf.write(f"# lrdmiss {report.version}\n# config_sha256 {report.config_hash}\n")
    buf.write(f"# master_seed {report.config['master_seed']} reps {report.config['reps']}\n")
    buf.write(f"# note: {REPORT_NOTE}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "type", "estimator", "statistic"] + [f"{p:g}" for p in props])
    rows: dict[tuple, dict] = {}
    for c in report.cells:
        key = (json.dumps(c.model, sort_keys=True), c.imputation, c.estimator)
        rows.setdefault(key, {})[c.proportion] = c
    for (model_json, block, est), by_prop in rows.items():
        model = ArfimaModel.from_dict(json.loads(model_json))
        for stat in ("mean", "sd", "failures", "boundary"):
            line = [model.label, BLOCK_LABELS[block], est, stat]
            for p in props:
                c = by_prop.get(p)
                v = None if c is None else getattr(c, stat)
                line.append(_fmt(v) if stat in ("mean", "sd") else ("" if v is None else str(v)))
            writer.writerow(line)
    return buf.getvalue()


def report_write(report: McReport, path, fmt: str = "csv", full: bool = False) -> None:
    if fmt == "csv":
        text = report_csv(report)
    elif fmt == "json":
        text = json.dumps(report.to_dict(full=full), indent=1, sort_keys=True) + "\n"
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    with open(path, "w", newline="") as fh:
        fh.write(text)


def report_read(path) -> McReport:
    with open(path) as fh:
        return McReport.from_dict(json.load(fh))


# --------------------------------------------------------------------------
# varsigma tuning


@dataclass
class SigmaTuningRow:
    d: float
    proportion: float
    complete: tuple[float, float]
    observed: tuple[float, float]
    imputed: dict[float, tuple[float, float]]


@dataclass
class SigmaTuningReport:
    varsigmas: tuple[float, ...]
    reps: int
    master_seed: int
    rows: list[SigmaTuningRow] = field(default_factory=list)

    def row(self, d: float, proportion: float) -> SigmaTuningRow:
        for row in self.rows:
            if math.isclose(row.d, d) and math.isclose(row.proportion, proportion):
                return row
        raise KeyError((d, proportion))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        head = ["d", "missing", "S_mean", "S_sd"]
        for v in self.varsigmas:
            head += [f"varsigma_{v:g}_mean", f"varsigma_{v:g}_sd"]
        writer.writerow(head + ["complete_mean", "complete_sd"])
        for row in self.rows:
            line = [f"{row.d:g}", f"{row.proportion:g}", _fmt(row.observed[0]), _fmt(row.observed[1])]
            for v in self.varsigmas:
                line += [_fmt(row.imputed[v][0]), _fmt(row.imputed[v][1])]
            writer.writerow(line + [_fmt(row.complete[0]), _fmt(row.complete[1])])
        return buf.getvalue()


def _sigma_rep(payload: dict, r: int) -> list[tuple]:
    out = []
    n, burn, seed = payload["n"], payload["burn"], payload["seed"]
    for d in payload["ds"]:
        model = ArfimaModel(d)
        y = simulate_gaussian(model, n, burn, stream(seed, SIMULATE, text_key(model.to_json()), r)).values
        for prop in payload["props"]:
            gappy = GappySeries(y, replication_mask(n, prop, seed, r))
            sds = []
            for vs in payload["varsigmas"]:
                # same uniforms for every varsigma: common random numbers
                z = impute(gappy, "random", vs, _impute_stream(seed, model, prop, r))
                sds.append(float(z.std(ddof=1)))
            out.append((d, prop, float(y.std(ddof=1)), float(gappy.observed_values.std(ddof=1)), sds))
    return out


def run_sigma_tuning(d_grid: Sequence[float], missing_grid: Sequence[float],
                     varsigma_grid: Sequence[float], reps: int, n: int = 1000, burn: int = 1000,
                     master_seed: int = 1, workers: int | None = None) -> SigmaTuningReport:
    """Average SD of the complete series, of the observed values (S) and of the
    series after random imputation with sigma = S / varsigma."""
    if not (d_grid and missing_grid and varsigma_grid):
        raise ConfigError("grids must be nonempty")
    varsigmas = tuple(float(v) for v in varsigma_grid)
    payload = {"n": n, "burn": burn, "seed": master_seed, "ds": [float(d) for d in d_grid],
               "props": [float(p) for p in missing_grid], "varsigmas": list(varsigmas)}
    for p in payload["props"]:
        MissingSpec(p)
    report = SigmaTuningReport(varsigmas, reps, master_seed)
    if reps == 0:
        return report
    per_rep = _map_reps(_sigma_rep, payload, reps, _workers(workers))
    ms = lambda a: (float(np.mean(a)), float(np.std(a, ddof=1)) if len(a) > 1 else math.nan)
    for k, (d, prop, *_rest) in enumerate(per_rep[0]):
        comp = [rep[k][2] for rep in per_rep]
        obs = [rep[k][3] for rep in per_rep]
        imp = np.array([rep[k][4] for rep in per_rep])
        report.rows.append(SigmaTuningRow(d, prop, ms(comp), ms(obs),
                                          {v: ms(imp[:, j]) for j, v in enumerate(varsigmas)}))
    return report


# --------------------------------------------------------------------------
# timing


@dataclass
class TimingEntry:
    task: str  # estimator name, or "impute:<method>"
    model: str
    n: int
    proportion: float
    input: str  # original, native, mean, linear, random
    total: float
    min_call: float
    max_call: float
    reps: int


@dataclass
class TimingReport:
    entries: list[TimingEntry] = field(default_factory=list)

    def per_call(self, task: str, input: str = "original") -> float:
        sel = [e for e in self.entries if e.task == task and e.input == input]
        return sum(e.total for e in sel) / sum(e.reps for e in sel)

    def summary(self) -> dict[str, dict[str, float]]:
        """Per task: total over scenarios and the largest/smallest scenario total."""
        out: dict[str, dict[str, float]] = {}
        for e in self.entries:
            s = out.setdefault(e.task, {"total": 0.0, "max": -math.inf, "min": math.inf})
            s["total"] += e.total
            s["max"] = max(s["max"], e.total)
            s["min"] = min(s["min"], e.total)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["task", "model", "n", "missing", "input", "total_s", "min_call_s",
                         "max_call_s", "reps"])
        for e in self.entries:
            writer.writerow([e.task, e.model, e.n, f"{e.proportion:g}", e.input, f"{e.total:.6f}",
                             f"{e.min_call:.6f}", f"{e.max_call:.6f}", e.reps])
        return buf.getvalue()


def _time_calls(fn: Callable, inputs: list, warmup: int) -> tuple[float, float, float]:
    for x in inputs[:1] * warmup:
        fn(x)
    times = []
    for x in inputs:
        t0 = time.perf_counter()
        fn(x)
        times.append(time.perf_counter() - t0)
    return float(sum(times)), float(min(times)), float(max(times))


def _safe(fn: Callable) -> Callable:
    def call(x):
        try:
            return fn(x)
        except (ValueError, ArithmeticError, RuntimeError):
            return None
    return call


def run_timing(config: ExperimentConfig, warmup: int = 5) -> TimingReport:
    """Time estimation (and, separately, imputation) on inputs prepared in advance.

    Runs serially. Each scenario is (model, proportion, input) where input is
    ``original`` for proportion 0, else ``native`` (copula estimators on the
    gappy series) or the imputation method.
    """
    report = TimingReport()
    reps = config.reps
    if reps == 0:
        return report
    for model in config.models:
        series = [_simulate(config, model, r) for r in range(reps)]
        for prop in config.missing_props:
            if prop == 0:
                inputs = {"original": series}
            else:
                gappy = [GappySeries(y, replication_mask(config.n, prop, config.master_seed, r))
                         for r, y in enumerate(series)]
                inputs = {"native": gappy}
                for block in config.imputations:
                    if block == "native":
                        continue
                    streams = [_impute_stream(config.master_seed, model, prop, r) for r in range(reps)]
                    # imputation timed on its own; its outputs feed the estimator timings
                    done = [impute(g, block, config.varsigma, s) for g, s in zip(gappy, streams)]
                    total, lo, hi = _time_calls(
                        lambda gs: impute(gs[0], block, config.varsigma, gs[1]),
                        [(g, _impute_stream(config.master_seed, model, prop, r))
                         for r, g in enumerate(gappy)], warmup)
                    report.entries.append(TimingEntry(f"impute:{block}", model.label, config.n,
                                                      prop, block, total, lo, hi, reps))
                    inputs[block] = done
            for est in config.estimators:
                for kind, data in inputs.items():
                    if kind == "native" and (est not in NATIVE_ESTIMATORS or "native" not in config.imputations):
                        continue
                    fn = _safe(lambda x, est=est: run_estimator(est, x, config.bandwidth))
                    total, lo, hi = _time_calls(fn, data, warmup)
                    report.entries.append(TimingEntry(est, model.label, config.n, prop, kind,
                                                      total, lo, hi, reps))
    return report
