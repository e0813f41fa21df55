"""Command-line front end: ``ironq {fit,diagnose,sample,simulate,compare,describe,rerun}``.

Each command writes its outputs plus ``manifest.json`` into ``--out-dir``.
``ironq rerun MANIFEST`` repeats a run from the recorded options.  Exit
codes: 0 success, 2 non-convergence, 1 errors (including usage errors).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from datetime import datetime, timezone

from . import __version__
from .diagnostics import diagnose
from .distribution import IronParams, iron_sample
from .errors import IronError, StateError
from .io import RunManifest, atomic_write, describe, file_digest, format_describe, ingest_csv
from .kernels import parse_kernel
from .links import parse_link
from .montecarlo import ScenarioConfig, run_study
from .regression import FitOptions, FitResult, RegressionSpec, fit

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2

DEFAULT_COMPARE_KERNELS = "normal,t,logistic,ep"
DEFAULT_COMPARE_TAUS = "0.4,0.5"

# options that never affect outputs and are left out of the manifest snapshot
_NOT_CONFIG = {"out_dir", "config", "func", "command"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _tau(text):
    try:
        t = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid tau {text!r}") from None
    if not 0.0 < t < 1.0:
        raise argparse.ArgumentTypeError(f"tau must lie in (0, 1), got {text}")
    return t


def _kernel(text):
    try:
        return parse_kernel(text).name
    except (ValueError, IronError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _link(text):
    try:
        return parse_link(text).name
    except (ValueError, IronError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _csv_list(text):
    return [s.strip() for s in str(text).split(",") if s.strip()]


def _add_data(p, response_required=True):
    p.add_argument("--data", required=True, help="input CSV with a header row")
    p.add_argument("--response", required=response_required, help="response column (values > 0)")
    p.add_argument("--covariates", type=_csv_list, default=[], help="comma-separated covariate columns")
    p.add_argument("--no-intercept", action="store_true", help="omit the constant column")


def _add_model(p, single=True):
    if single:
        p.add_argument("--tau", type=_tau, default=0.5)
        p.add_argument("--kernel", type=_kernel, default="normal",
                       help="normal, t[:xi], logistic, ep[:kappa], cauchy")
    p.add_argument("--link", type=_link, default="identity")
    p.add_argument("--model", choices=["iron", "rbsq"], default="iron")
    p.add_argument("--fix-shape", action="store_true", help="hold the t/EP shape at its given value")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--grad-tol", type=float, default=1e-6)
    p.add_argument("--step-tol", type=float, default=1e-8)


def _add_common(p):
    p.add_argument("--out-dir", default=".", help="directory for outputs and manifest.json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON file of option defaults (scenario file for simulate)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ironq", description="Quantile regression with IRON distributions.")
    parser.add_argument("--version", action="version", version=f"ironq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit one quantile regression")
    _add_data(p)
    _add_model(p)
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("diagnose", help="residuals, influence and envelope for a fit")
    _add_data(p)
    _add_model(p)
    p.add_argument("--fit-json", help="reuse a fit.json instead of refitting")
    p.add_argument("--no-exact", action="store_true", help="skip leave-one-out refits")
    p.add_argument("--envelope", type=int, default=100, help="envelope replicates (0 to skip)")
    p.add_argument("--envelope-level", type=float, default=0.95)
    p.add_argument("--no-envelope-refit", action="store_true")
    p.add_argument("--threshold", type=float, default=None, help="GCD cutoff (default 2q/n)")
    _add_common(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("sample", help="draw from an IRON distribution")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--beta", type=float, required=True, help="tau-quantile of the draws")
    p.add_argument("--lam", type=float, required=True)
    p.add_argument("--tau", type=_tau, default=0.5)
    p.add_argument("--kernel", type=_kernel, default="normal")
    _add_common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("simulate", help="run a Monte Carlo study from a scenario JSON")
    p.add_argument("--replicates", type=int, default=None, help="override the scenario's count")
    _add_common(p)
    p.set_defaults(seed=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="AIC/BIC over a kernel x tau grid")
    _add_data(p)
    _add_model(p, single=False)
    p.add_argument("--kernels", type=_csv_list, default=_csv_list(DEFAULT_COMPARE_KERNELS))
    p.add_argument("--taus", type=_csv_list, default=_csv_list(DEFAULT_COMPARE_TAUS))
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("describe", help="descriptive statistics of the data columns")
    _add_data(p)
    _add_common(p)
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("rerun", help="repeat a run recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out-dir", default=None, help="defaults to the manifest's directory")
    p.set_defaults(func=cmd_rerun)
    return parser


# -- helpers -------------------------------------------------------------


class _Run:
    """Collects outputs and the manifest for one command invocation."""

    def __init__(self, args):
        self.out_dir = args.out_dir
        snapshot = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
        for key in ("data", "fit_json"):
            if snapshot.get(key):
                snapshot[key] = os.path.abspath(snapshot[key])
        self.manifest = RunManifest(args.command, snapshot, getattr(args, "seed", None), __version__)
        data = getattr(args, "data", None)
        if data:
            self.manifest.inputs[os.path.abspath(data)] = file_digest(data)

    def write(self, name, text):
        atomic_write(os.path.join(self.out_dir, name), text)
        self.manifest.outputs.append(name)

    def finish(self, code):
        self.manifest.finished = datetime.now(timezone.utc).isoformat(timespec="seconds")
        self.manifest.exit_code = code
        atomic_write(os.path.join(self.out_dir, "manifest.json"), self.manifest.to_json() + "\n")
        return code


def _dataset(args, run):
    ds = ingest_csv(args.data, args.response, args.covariates, intercept=not args.no_intercept)
    run.manifest.rows_dropped = ds.n_dropped
    if ds.n_dropped:
        print(f"dropped {ds.n_dropped} row(s) with missing values", file=sys.stderr)
    return ds


def _options(args):
    return FitOptions(max_iter=args.max_iter, grad_tol=args.grad_tol, step_tol=args.step_tol,
                      fix_shape=args.fix_shape)


def _spec(args, ds, tau, kernel):
    est = None if not args.fix_shape else False
    return RegressionSpec(ds.X, tau, args.link, kernel, estimate_shape=est, model=args.model,
                          names=ds.names)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- commands ------------------------------------------------------------


def cmd_fit(args):
    run = _Run(args)
    ds = _dataset(args, run)
    res = fit(ds.y, _spec(args, ds, args.tau, args.kernel), _options(args))
    d = res.to_dict()
    d["design_names"] = ds.names
    run.write("fit.json", _json(d))
    run.write("fit.txt", res.table() + "\n")
    print(res.table())
    return run.finish(EXIT_OK if res.converged else EXIT_NOT_CONVERGED)


def cmd_diagnose(args):
    run = _Run(args)
    ds = _dataset(args, run)
    if args.fit_json:
        with open(args.fit_json) as fh:
            res = FitResult.from_dict(json.load(fh))
        run.manifest.inputs[os.path.abspath(args.fit_json)] = file_digest(args.fit_json)
        if res.n != ds.n or res.p != ds.X.shape[1]:
            raise StateError("fit.json does not match the data dimensions")
    else:
        res = fit(ds.y, _spec(args, ds, args.tau, args.kernel), _options(args))
    if not res.converged:
        print("fit did not converge; diagnostics skipped", file=sys.stderr)
        return run.finish(EXIT_NOT_CONVERGED)
    rep = diagnose(res, ds.y, ds.X, exact=not args.no_exact, envelope_replicates=args.envelope,
                   envelope_level=args.envelope_level, envelope_refit=not args.no_envelope_refit,
                   seed=args.seed, threshold=args.threshold, options=_options(args))
    run.write("diagnostics.json", rep.to_json() + "\n")
    run.write("diagnostics.csv", rep.to_csv())
    if rep.envelope is not None:
        e = rep.envelope
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "lower", "median", "upper", "observed"])
        for i in range(e.observed.size):
            w.writerow([i + 1] + [repr(float(v[i])) for v in (e.lower, e.median, e.upper, e.observed)])
        run.write("envelope.csv", buf.getvalue())
    tests = ", ".join(f"{k} p={v[1]:.4f}" for k, v in rep.tests.items())
    print(f"influential cases: {rep.influential}  threshold={rep.threshold:.4g}")
    print(f"rQR normality: {tests}")
    return run.finish(EXIT_OK)


def cmd_sample(args):
    run = _Run(args)
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    params = IronParams.at_quantile(args.beta, args.lam, args.tau, parse_kernel(args.kernel))
    y = iron_sample(args.n, params, args.seed)
    run.write("sample.csv", "y\n" + "".join(f"{float(v)!r}\n" for v in y))
    return run.finish(EXIT_OK)


def cmd_simulate(args):
    scenario = getattr(args, "scenario", None)
    if scenario is None:
        if not args.config:
            raise UsageError("simulate requires --config SCENARIO.json")
        with open(args.config) as fh:
            scenario = json.load(fh)
        if args.replicates is not None:
            scenario["replicates"] = args.replicates
        if args.seed is not None:
            scenario["seed"] = args.seed
        args.scenario = ScenarioConfig.from_dict(scenario).to_dict()
        scenario = args.scenario
    cfg = ScenarioConfig.from_dict(scenario)
    args.seed = cfg.seed
    run = _Run(args)
    res = run_study(cfg)
    run.write("study.json", res.to_json() + "\n")
    run.write("study.csv", res.to_csv())
    print(f"{cfg.mode}: {len(res.rows)} rows, {res.dropped} dropped replicate fits")
    return run.finish(EXIT_OK)


def cmd_compare(args):
    run = _Run(args)
    ds = _dataset(args, run)
    taus = [_tau(t) for t in args.taus]
    kernels = [_kernel(k) for k in args.kernels]
    rows = []
    all_ok = True
    for tau in taus:
        block = []
        for k in kernels:
            res = fit(ds.y, _spec(args, ds, tau, k), _options(args))
            all_ok &= res.converged
            block.append({"tau": tau, "kernel": k, "loglik": res.loglik, "aic": res.aic,
                          "bic": res.bic, "q": res.q, "converged": res.converged,
                          "min_aic": False, "min_bic": False})
        for crit in ("aic", "bic"):
            ok = [r for r in block if r["converged"] and math.isfinite(r[crit])]
            if ok:
                min(ok, key=lambda r: r[crit])[f"min_{crit}"] = True  # first wins on ties
        rows.extend(block)
    cols = ["tau", "kernel", "loglik", "aic", "bic", "q", "converged", "min_aic", "min_bic"]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    run.write("compare.csv", buf.getvalue())
    run.write("compare.json", _json({"schema_version": 1, "link": args.link, "rows": rows}))
    lines = [f"{'tau':>5} {'kernel':<10}{'AIC':>12}{'BIC':>12}"]
    for r in rows:
        a = f"{r['aic']:.2f}" + ("*" if r["min_aic"] else " ")
        b = f"{r['bic']:.2f}" + ("*" if r["min_bic"] else " ")
        lines.append(f"{r['tau']:>5g} {r['kernel']:<10}{a:>12}{b:>12}")
    run.write("compare.txt", "\n".join(lines) + "\n")
    print("\n".join(lines))
    return run.finish(EXIT_OK if all_ok else EXIT_NOT_CONVERGED)


def cmd_describe(args):
    run = _Run(args)
    ds = _dataset(args, run)
    cols = {ds.response: ds.y}
    cols.update({c: ds.column(c) for c in ds.covariates})
    summary = describe(cols)
    run.write("describe.json", _json({"schema_version": 1, "columns": summary}))
    stats = ["mean", "median", "sd", "cv", "cs", "ck", "min", "max", "n"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variable"] + stats)
    for name, row in summary.items():
        w.writerow([name] + ["" if row[s] is None else repr(row[s]) for s in stats])
    run.write("describe.csv", buf.getvalue())
    print(format_describe(summary))
    return run.finish(EXIT_OK)


def cmd_rerun(args):
    m = RunManifest.load(args.manifest)
    for path, digest in m.inputs.items():
        if not os.path.exists(path) or file_digest(path) != digest:
            raise StateError(f"input {path} is missing or changed since the recorded run")
    ns = argparse.Namespace(**m.config)
    ns.command = m.command
    ns.config = None
    ns.out_dir = args.out_dir or os.path.dirname(os.path.abspath(args.manifest))
    return COMMANDS[m.command](ns)


COMMANDS = {
    "fit": cmd_fit,
    "diagnose": cmd_diagnose,
    "sample": cmd_sample,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "describe": cmd_describe,
}


def _apply_config_defaults(parser, argv):
    """Load ``--config`` JSON as defaults for the chosen subcommand, then parse."""
    argv = sys.argv[1:] if argv is None else list(argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    subparsers = parser._subparsers._group_actions[0].choices
    if known.command not in subparsers or known.command in ("simulate", "rerun") or not known.config:
        return parser.parse_args(argv)
    with open(known.config) as fh:
        defaults = json.load(fh)
    sub = subparsers[known.command]
    known_dests = {a.dest for a in sub._actions}
    unknown = sorted(set(defaults) - known_dests)
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
    for a in sub._actions:
        if a.dest in defaults:
            a.required = False
    sub.set_defaults(**defaults)
    args = parser.parse_args(argv)
    # values from the file bypass the argparse type checks
    try:
        for key, conv in (("tau", _tau), ("kernel", _kernel), ("link", _link)):
            if key in defaults and getattr(args, key, None) is not None:
                setattr(args, key, conv(str(getattr(args, key))))
    except argparse.ArgumentTypeError as exc:
        raise UsageError(str(exc)) from None
    for key in ("covariates", "kernels", "taus"):
        if isinstance(getattr(args, key, None), str):
            setattr(args, key, _csv_list(getattr(args, key)))
    return args


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config_defaults(parser, argv)
        return args.func(args)
    except (UsageError, argparse.ArgumentTypeError) as exc:
        print(f"ironq: usage error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (IronError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"ironq: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
