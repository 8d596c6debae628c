"""Command-line front end.

Exit codes: 0 success, 2 configuration or usage error, 3 I/O error.
The worker count for ``mc`` and ``tune-sigma`` comes from ``--workers`` or
the ``LRDMISS_WORKERS`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import sys

from .arfima import ModelError, simulate_gaussian
from .copula import CopulaConfig, estimate_d_copula
from .gaps import GappySeries, MissingSpec, impute, inject_missing
from .harness import (ConfigError, ExperimentConfig, flagged_cells, report_write, run_mc,
                      run_sigma_tuning, run_timing)
from .io import load_model, read_series, write_series
from .results import EstimationError
from .scaling import DfaConfig, RsConfig, dfa_estimate, rs_estimate
from .spectral import elw, gph, local_whittle

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def cmd_simulate(args) -> int:
    model = load_model(args.model)
    sim = simulate_gaussian(model, args.n, args.burn, args.seed)
    write_series(args.out, sim.values)
    return EXIT_OK


def cmd_inject(args) -> int:
    series = read_series(args.input)
    if series.n_missing:
        raise ConfigError("input already has missing values")
    gappy = inject_missing(series.values, MissingSpec(args.prop), args.seed)
    write_series(args.output, gappy)
    return EXIT_OK


def cmd_impute(args) -> int:
    series = read_series(args.input)
    write_series(args.output, impute(series, args.method, args.varsigma, args.seed))
    return EXIT_OK


def cmd_estimate(args) -> int:
    series = read_series(args.input)
    if args.method == "copula":
        cfg = CopulaConfig(family=args.family, s=args.s, m=args.m or 24)
        res = estimate_d_copula(series, cfg)
    else:
        if series.n_missing:
            raise ConfigError(f"{args.method} needs a complete series; run impute first")
        y = series.values
        if args.method == "gph":
            res = gph(y, args.m)
        elif args.method == "lw":
            res = local_whittle(y, args.m)
        elif args.method == "elw":
            res = elw(y, args.m)
        elif args.method == "rs":
            res = rs_estimate(y, RsConfig(_ints(args.rs_windows)) if args.rs_windows else None)
        else:
            cfg = None
            if args.dfa_range:
                lo, hi = (int(x) for x in args.dfa_range.split(":"))
                cfg = DfaConfig.from_range(lo, hi)
            res = dfa_estimate(y, cfg)
    out = res.to_dict()
    if args.method == "copula":
        out["pairs_used"] = res.diagnostics["pairs_used"]
        out["lags"] = res.diagnostics["lags"]
    print(json.dumps(out))
    return EXIT_OK


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "master_seed": args.seed})
    return cfg


def cmd_mc(args) -> int:
    cfg = _config(args)
    report = run_mc(cfg, workers=args.workers)
    fmt = args.format or ("json" if args.out.endswith(".json") else "csv")
    report_write(report, args.out, fmt, full=args.full)
    for c in flagged_cells(report):
        print(f"warning: every replication failed for {c.estimator}/{c.imputation} "
              f"at proportion {c.proportion:g}", file=sys.stderr)
    return EXIT_OK


def cmd_tune_sigma(args) -> int:
    report = run_sigma_tuning(_floats(args.d), _floats(args.missing), _floats(args.varsigma),
                              args.reps, n=args.n, burn=args.burn, master_seed=args.seed,
                              workers=args.workers)
    text = report.to_csv()
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    report = run_timing(_config(args), warmup=args.warmup)
    text = report.to_csv()
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lrdmiss", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate a Gaussian ARFIMA series")
    s.add_argument("--model", required=True, help="model JSON (inline or file path)")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--burn", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("out")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("inject", help="remove interior values at random")
    s.add_argument("--prop", type=float, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("input")
    s.add_argument("output")
    s.set_defaults(func=cmd_inject)

    s = sub.add_parser("impute", help="fill missing values")
    s.add_argument("--method", choices=("mean", "linear", "random"), required=True)
    s.add_argument("--varsigma", type=float, default=10.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("input")
    s.add_argument("output")
    s.set_defaults(func=cmd_impute)

    s = sub.add_parser("estimate", help="estimate d and print a JSON result")
    s.add_argument("--method", choices=("gph", "lw", "elw", "rs", "dfa", "copula"), required=True)
    s.add_argument("--m", type=int, default=None, help="bandwidth, or maximum lag for copula")
    s.add_argument("--family", choices=("gaussian", "frank"), default="gaussian")
    s.add_argument("--s", type=int, default=1, help="first lag for copula")
    s.add_argument("--dfa-range", default=None, help="box sizes as lo:hi, e.g. 50:100")
    s.add_argument("--rs-windows", default=None, help="comma-separated window sizes")
    s.add_argument("--seed", type=int, default=0, help="accepted for uniformity; unused")
    s.add_argument("input")
    s.set_defaults(func=cmd_estimate)

    for name, func, helptext in (("mc", cmd_mc, "run a Monte Carlo comparison"),
                                 ("bench", cmd_bench, "time estimators and imputations")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True)
        s.add_argument("--out", required=name == "mc", default=None)
        s.add_argument("--seed", type=int, default=None, help="override master_seed")
        if name == "mc":
            s.add_argument("--format", choices=("csv", "json"), default=None)
            s.add_argument("--full", action="store_true", help="per-replication vectors in JSON")
            s.add_argument("--workers", type=int, default=None)
        else:
            s.add_argument("--warmup", type=int, default=5)
        s.set_defaults(func=func)

    s = sub.add_parser("tune-sigma", help="SD table for choosing varsigma")
    s.add_argument("--d", default="0.1,0.2,0.3,0.4")
    s.add_argument("--missing", default="0.1,0.3,0.5,0.7")
    s.add_argument("--varsigma", default="4,10")
    s.add_argument("--reps", type=int, default=200)
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--burn", type=int, default=1000)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_tune_sigma)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"lrdmiss: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ModelError, EstimationError, ValueError, json.JSONDecodeError) as exc:
        print(f"lrdmiss: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
