"""Command-line harness.

Subcommands: ``simulate``, ``run``, ``validate``, ``lemma1``, ``choose-l``
and ``compare``. Outputs are CSV and JSON only. Exit codes: 0 on success,
1 when a validation or diagnostic check fails, 2 on any runtime error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .diagnostics import acf_table, choose_L, compare_traces, ess_table, lag1_check, lemma1_check, trace_column
from .distributions import make_rng
from .errors import MHPCGError
from .experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    blocked_identity_check,
    build_model,
    default_config,
    load_config,
    read_dataset,
    report_columns,
    run_experiment,
    write_dataset,
)
from .kernels import normal_walk
from .models import BivariateNormalModel, get_sampler, parent_of
from .models.registry import BIVARIATE_JUMP_SD, CALIBRATION_BETA_SD
from .runner import Trace
from .spec import load_spec
from .validator import UNVERIFIABLE, validate

__all__ = ["main", "build_parser"]

OK, CHECK_FAILED, RUNTIME_ERROR = 0, 1, 2

_ACF_PLOT = """\
# ACF curves from {acf}
set datafile separator ','
set key autotitle columnhead
set xlabel 'lag'
set ylabel 'autocorrelation'
plot for [c in "{columns}"] '{acf}' using 3:(strcol(2) eq c ? $4 : NaN) with lines title c
"""

_QQ_PLOT = """\
# QQ points from {qq}
set datafile separator ','
set xlabel '{a}'
set ylabel '{b}'
plot '{qq}' using 3:4 every ::1 with points title 'quantiles', x with lines title 'y = x'
"""


def _emit(doc) -> None:
    print(json.dumps(doc, indent=2, default=_plain))


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _seeds(text: str) -> tuple:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be integers, got {text!r}") from None


def _config(args, experiment: str) -> ExperimentConfig:
    """Defaults, then the config file, then explicit flags."""
    cfg = load_config(args.config) if getattr(args, "config", None) else default_config(experiment)
    if cfg.experiment != experiment:
        raise MHPCGError(f"config is for {cfg.experiment!r}, command asked for {experiment!r}")
    d = cfg.to_dict()
    for key in ("T", "burnin", "out", "data"):
        val = getattr(args, key, None)
        if val is not None:
            d[key] = val
    seed = getattr(args, "seed", None)
    if seed is not None:
        d["seeds"] = [seed] if isinstance(seed, int) else list(seed)
    if getattr(args, "samplers", None):
        d["samplers"] = [s for s in args.samplers.split(",") if s]
    for key in ("n", "p", "q", "rho"):
        val = getattr(args, key, None)
        if val is not None:
            d["params"][key] = val
    return ExperimentConfig.from_dict(d)


# -- simulate -------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _config(args, args.experiment)
    seed = cfg.seeds[0]
    paths = write_dataset(cfg.experiment, cfg.params, seed, cfg.out)
    _emit({"experiment": cfg.experiment, "seed": seed, "files": [str(p) for p in paths]})
    return OK


# -- run ----------------------------------------------------------------------------


def _write_rows(path: Path, rows: list) -> None:
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def _run_checks(cfg: ExperimentConfig) -> int:
    if cfg.experiment == "lemma1":
        p = cfg.params
        res = lemma1_check(BivariateNormalModel(p["rho"]), normal_walk(p["jump_sd"]), cfg.T, make_rng(cfg.seeds[0]))
        doc = res.to_dict()
        passed = res.identity_error <= 1e-12
    else:
        results = [blocked_identity_check(w, cfg.T, cfg.seeds[0], cfg.params) for w in ("gaussian", "spectral")]
        doc = {"checks": [r.to_dict() for r in results]}
        passed = all(r.max_abs_diff <= 1e-12 for r in results)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{cfg.experiment}.json").write_text(json.dumps(doc, indent=2, default=_plain) + "\n")
    _emit(doc)
    return OK if passed else CHECK_FAILED


def cmd_run(args) -> int:
    cfg = _config(args, args.experiment)
    if cfg.experiment in ("lemma1", "blocked-identity"):
        return _run_checks(cfg)
    data = read_dataset(cfg.experiment, cfg.data) if cfg.data else None
    traces = run_experiment(cfg, data=data, workers=args.workers)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    columns = report_columns(cfg.experiment, cfg.params)
    report = {"config": cfg.to_dict(), "runs": [], "comparisons": []}
    acf_rows, ess_rows = [], []
    for (name, seed), tr in traces.items():
        stem = out / f"{name}_seed{seed}"
        tr.save(stem)
        label = f"{name}_seed{seed}"
        acf_rows += acf_table({label: tr}, columns)
        ess_rows += ess_table({label: tr}, columns)
        report["runs"].append(
            {
                "sampler": name,
                "seed": seed,
                "trace": str(stem.with_suffix(".csv")),
                "acceptance": {f"step {log.step + 1}": log.rate for log in tr.acceptance},
                "lag1": {c: float(lag1_check(trace_column(tr, c))[0]) for c in columns},
                "wall_time": tr.meta.get("wall_time"),
            }
        )
    for seed in cfg.seeds:
        names = list(cfg.samplers)
        for other in names[1:]:
            rep = compare_traces(traces[(names[0], seed)], traces[(other, seed)], columns, labels=(names[0], other))
            qq = out / f"qq_{names[0]}_vs_{other}_seed{seed}.csv"
            rep.write_qq_csv(qq)
            report["comparisons"].append({"seed": seed, "qq": str(qq), **rep.to_dict()})
            if args.gnuplot:
                (out / f"{qq.stem}.gp").write_text(_QQ_PLOT.format(qq=qq.name, a=names[0], b=other))
    _write_rows(out / "acf.csv", acf_rows)
    _write_rows(out / "ess.csv", ess_rows)
    if args.gnuplot:
        (out / "acf.gp").write_text(_ACF_PLOT.format(acf="acf.csv", columns=" ".join(columns)))
    (out / "report.json").write_text(json.dumps(report, indent=1, default=_plain) + "\n")
    summary = []
    for r in report["runs"]:
        label = f"{r['sampler']}_seed{r['seed']}"
        row = {k: r[k] for k in ("sampler", "seed", "acceptance", "lag1")}
        row["ess_per_iteration"] = {e["column"]: e["ess_per_iteration"] for e in ess_rows if e["sampler"] == label}
        summary.append(row)
    _emit({"out": str(out), "runs": summary})
    return OK


# -- validate ---------------------------------------------------------------------


def _dims(pairs) -> dict:
    dims = {}
    for item in pairs or ():
        key, _, val = item.partition("=")
        if not val:
            raise MHPCGError(f"--dim expects key=value, got {item!r}")
        dims[key] = int(val)
    return dims


def _spec_arg(text: str, dims: dict):
    path = Path(text)
    if path.suffix == ".json" or path.exists():
        return load_spec(path), None
    return get_sampler(text, **dims), text


def cmd_validate(args) -> int:
    dims = _dims(args.dim)
    spec, name = _spec_arg(args.spec, dims)
    if args.parent:
        parent = _spec_arg(args.parent, dims)[0]
    elif name is not None:
        parent = parent_of(name, **dims)
    else:
        parent = None
    verdict = validate(spec, parent)
    _emit(verdict.to_dict())
    print(verdict.describe())
    return CHECK_FAILED if verdict.status == UNVERIFIABLE else OK


# -- lemma1 ------------------------------------------------------------------------


def cmd_lemma1(args) -> int:
    res = lemma1_check(BivariateNormalModel(args.rho), normal_walk(args.jump_scale), args.N, make_rng(args.seed))
    _emit(res.to_dict())
    return OK if res.identity_error <= 1e-12 else CHECK_FAILED


# -- choose-l ------------------------------------------------------------------------


def cmd_choose_l(args) -> int:
    if args.check_trace:
        tr = Trace.load(args.check_trace)
        r1, ok = lag1_check(trace_column(tr, args.column), args.threshold)
        _emit({"trace": args.check_trace, "column": args.column, "lag1": r1, "threshold": args.threshold, "passed": ok})
        return OK if ok else CHECK_FAILED
    rng = make_rng(args.seed)
    if args.experiment == "bivariate":
        model = BivariateNormalModel(args.rho)
        given = args.given
        target = lambda v: float(model.cond_logpdf(v, given))
        jump, start = normal_walk(args.jump_scale or BIVARIATE_JUMP_SD), model.rho * given
    elif args.experiment == "calibration":
        cfg = _config(args, "calibration")
        data = read_dataset("calibration", cfg.data) if cfg.data else None
        model = build_model("calibration", cfg.params, data)
        state = model.initial_state()
        target = lambda b: math.fsum(model.log_beta_marginal({**state, "beta": b}))
        jump, start = normal_walk(args.jump_scale or CALIBRATION_BETA_SD), state["beta"]
    else:
        raise MHPCGError(f"choose-l supports bivariate and calibration, not {args.experiment!r}")
    L = choose_L(target, jump, args.pilot, rng, start=start, threshold=args.threshold, max_lag=args.max_lag)
    _emit({"experiment": args.experiment, "L": L, "threshold": args.threshold, "pilot": args.pilot})
    return OK


# -- compare -------------------------------------------------------------------------


def cmd_compare(args) -> int:
    a, b = Trace.load(args.a), Trace.load(args.b)
    columns = [c for c in args.columns.split(",") if c]
    rep = compare_traces(a, b, columns, labels=(Path(args.a).name, Path(args.b).name))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        rep.write_qq_csv(out / "qq.csv")
        (out / "comparison.json").write_text(json.dumps(rep.to_dict(), indent=1) + "\n")
        if args.gnuplot:
            (out / "qq.gp").write_text(_QQ_PLOT.format(qq="qq.csv", a=rep.labels[0], b=rep.labels[1]))
    doc = rep.to_dict()
    for c in doc["columns"].values():
        del c["qq"]
    _emit(doc)
    return OK


# -- parser ---------------------------------------------------------------------------


def _common(p, *, run_lengths=True):
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--seed", type=_seeds, help="seed, or comma-separated seeds")
    p.add_argument("--out", help="output directory")
    if run_lengths:
        p.add_argument("--T", type=int, help="post-burnin sweeps (replications for lemma1)")
        p.add_argument("--burnin", type=int, help="burn-in sweeps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mhpcg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a dataset and its provenance")
    p.add_argument("experiment", choices=("spectral", "calibration", "factor"))
    _common(p, run_lengths=False)
    p.add_argument("--n", type=int, help="number of bins or observations")
    p.add_argument("--p", type=int, help="factor model: observed dimension")
    p.add_argument("--q", type=int, help="factor model: number of factors")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="run samplers and write traces and diagnostics")
    p.add_argument("experiment", choices=EXPERIMENTS)
    _common(p)
    p.add_argument("--samplers", help="comma-separated registry names")
    p.add_argument("--data", help="dataset file (default: simulate from the data seed)")
    p.add_argument("--workers", type=int, default=1, help="parallel processes; output does not depend on it")
    p.add_argument("--rho", type=float, help="bivariate and lemma1: correlation")
    p.add_argument("--gnuplot", action="store_true", help="also write gnuplot scripts")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check a sampler for propriety")
    p.add_argument("spec", help="registry name or spec JSON file")
    p.add_argument("--parent", help="parent sampler (registry name or JSON)")
    p.add_argument("--dim", action="append", help="registry dimension, e.g. n_bins=550")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("lemma1", help="iterated versus joint acceptance ratios")
    p.add_argument("--rho", type=float, default=0.9, help="correlation (default 0.9)")
    p.add_argument("--N", type=int, default=100_000, help="stationary replications")
    p.add_argument("--jump-scale", type=float, default=BIVARIATE_JUMP_SD, help="walk sd on psi2 (default sqrt 3)")
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_lemma1)

    p = sub.add_parser("choose-l", help="pick L for the iterated strategy, or check a trace")
    p.add_argument("experiment", nargs="?", default="bivariate", choices=("bivariate", "calibration"))
    p.add_argument("--pilot", type=int, default=5_000, help="pilot chain length (at least 1000)")
    p.add_argument("--threshold", type=float, default=0.05, help="autocorrelation cut-off")
    p.add_argument("--max-lag", type=int, default=200)
    p.add_argument("--jump-scale", type=float, help="walk sd (default: the registry value)")
    p.add_argument("--rho", type=float, default=0.9)
    p.add_argument("--given", type=float, default=1.0, help="fixed psi1 for the bivariate conditional")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--config", help="calibration: experiment config JSON")
    p.add_argument("--data", help="calibration: dataset file")
    p.add_argument("--check-trace", help="trace stem; report its lag-1 autocorrelation instead")
    p.add_argument("--column", default="psi2", help="column checked by --check-trace")
    p.set_defaults(func=cmd_choose_l)

    p = sub.add_parser("compare", help="compare two saved traces")
    p.add_argument("a", help="trace stem (path without .csv/.json)")
    p.add_argument("b", help="second trace stem")
    p.add_argument("--columns", required=True, help="comma-separated columns, e.g. alpha,Z[2]")
    p.add_argument("--out", help="directory for qq.csv")
    p.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (MHPCGError, OSError, ValueError, KeyError) as exc:
        print(f"mhpcg {args.command}: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
