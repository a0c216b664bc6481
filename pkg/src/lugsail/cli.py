"""Command-line interface.

Exit codes: 0 converged (or success), 3 not converged, 1 error.  Reports go
to stdout as JSON with sorted keys, so identical arguments give identical
bytes.
"""

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from .chains import ChainError, assemble, load_chain_csv, write_chain_csv
from .ess import delta_threshold, ess_estimate
from .experiments import EXPERIMENTS, StudyConfig, reproduce
from .mcvar import BatchConfig, EstimatorError
from .monitor import MonitorPlan, Schedule, diagnose_static, run_monitor
from .psrf import DegenerateChainError, implied_ess, psrf_multivariate_lugsail
from .samplers import AR1, Bimodal, SamplerError, SamplerSpec, StudentT, open_sampler
from .samplers.titanic import DatasetError, logistic_setup, titanic_target

SCHEMA_VERSION = 1
EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 3


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Usage errors exit 1 like every other error, not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _finite(x):
    """JSON has no inf/nan; map them to null."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _emit(obj, fmt="json", out=None):
    out = out or sys.stdout
    if fmt == "json":
        out.write(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")
        return
    flat = {k: v for k, v in sorted(obj.items()) if not isinstance(v, (dict, list))}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(flat))
    w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in flat.values()])
    out.write(buf.getvalue())


def _threshold_fields(th):
    return {"alpha": th.alpha, "eps": th.epsilon, "M": th.M, "M_int": th.M_int, "delta": th.delta}


def _load_chains(args):
    chains = [load_chain_csv(p, header=args.header) for p in args.chains]
    if args.discard_half:
        args.burnin = len(chains[0]) // 2
    return assemble(chains, burnin=args.burnin)


def _batch_fields(rep):
    b = rep.batch or {}
    return {k: b.get(k) for k in ("policy", "b", "a", "b3", "a3", "unused_tail")}


def cmd_diagnose(args):
    cs = _load_chains(args)
    bc = BatchConfig.parse(args.batch)
    th = delta_threshold(args.alpha, args.eps, cs.p, cs.m)
    min_effort = args.min_effort if args.min_effort is not None else th.M_int
    plan = MonitorPlan(
        delta=th.delta, min_effort=min_effort, statistic=args.stat, mv=args.mv, batch=bc,
        max_iterations=max(min_effort, 1),
    )
    # burn-in was dropped on load, so the effort gate adds it back
    rep, _, _ = diagnose_static(cs, plan)
    if rep is None:
        raise CliError("within-chain variance is zero; PSRF is undefined")
    converged = rep.value <= th.delta and cs.n + args.burnin >= min_effort
    ess = ess_estimate(cs, bc)
    # batch metadata comes from the lugsail estimate behind the ESS, whatever --stat is
    lug = rep if rep.kind == "lugsail" else psrf_multivariate_lugsail(cs, bc, components=False)
    comps = rep.univariate if cs.p > 1 else (rep,)
    report = {
        "schema_version": SCHEMA_VERSION,
        "statistic": rep.kind,
        "scope": rep.scope,
        "m": cs.m,
        "n": cs.n,
        "p": cs.p,
        "burnin": args.burnin,
        "psrf": rep.value,
        "psrf_components": [_finite(c.value) if c is not None else None for c in comps],
        "ess": _finite(ess),
        "implied_ess": _finite(implied_ess(rep)),
        "min_effort": min_effort,
        "converged": bool(converged),
        "batch": _batch_fields(lug),
        "psd_repaired": bool(lug.psd_repaired),
        **_threshold_fields(th),
    }
    _emit(report, args.format)
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def cmd_threshold(args):
    th = delta_threshold(args.alpha, args.eps, args.p, args.m)
    report = {"schema_version": SCHEMA_VERSION, "p": th.p, "m": th.m, **_threshold_fields(th)}
    if args.format == "text":
        sys.stdout.write(f"M = {th.M:.6f}\nceil(M) = {th.M_int}\ndelta = {th.delta:.6f}\n")
    else:
        _emit(report, args.format)
    return EXIT_OK


def cmd_ess(args):
    cs = _load_chains(args)
    bc = BatchConfig.parse(args.batch)
    th = delta_threshold(args.alpha, args.eps, cs.p, cs.m)
    ess = ess_estimate(cs, bc)
    enough = ess >= th.M
    report = {
        "schema_version": SCHEMA_VERSION,
        "m": cs.m,
        "n": cs.n,
        "p": cs.p,
        "ess": _finite(ess),
        "enough": bool(enough),
        **_threshold_fields(th),
    }
    _emit(report, args.format)
    return EXIT_OK if enough else EXIT_NOT_CONVERGED


def _spec_from_args(args):
    kind = args.target
    if kind == "ar1":
        tgt = AR1(args.rho, args.nu)
        return SamplerSpec(tgt, m=args.m, seed=args.seed)
    if kind == "t5":
        return SamplerSpec(StudentT(args.df), m=args.m, seed=args.seed, proposal_var=args.proposal_var or 2.6**2)
    if kind == "bimodal":
        tgt = Bimodal() if args.start_mode == "spread" else Bimodal(start_mean=0.0, start_sd=math.sqrt(2.0))
        return SamplerSpec(tgt, m=args.m, seed=args.seed, proposal_var=args.proposal_var or 10.0)
    if kind == "titanic":
        if not args.dataset:
            raise CliError("the titanic target needs --dataset PATH")
        tgt = titanic_target(args.dataset)
        starts, prop = logistic_setup(tgt, args.m)
        if args.proposal_var:
            prop = prop * args.proposal_var
        return SamplerSpec(tgt, m=args.m, seed=args.seed, proposal_var=prop, starts=starts)
    raise CliError(f"unknown target {kind!r}")


def _save_chains(outdir, samples, names=None):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = []
    for i, chain in enumerate(samples):
        path = outdir / f"chain_{i + 1}.csv"
        write_chain_csv(path, chain, header=names)
        files.append(str(path))
    return files


def cmd_simulate(args):
    spec = _spec_from_args(args)
    g = open_sampler(spec)
    g.extend(args.n)
    names = list(spec.target.names) if args.header and getattr(spec.target, "names", ()) else None
    if args.header and names is None:
        names = [f"x{k + 1}" for k in range(spec.target.p)]
    files = _save_chains(args.outdir, g.samples, names)
    rate = getattr(g, "acceptance_rate", None)
    report = {
        "schema_version": SCHEMA_VERSION,
        "target": args.target,
        "m": spec.m,
        "n": args.n,
        "p": spec.target.p,
        "seed": args.seed,
        "files": files,
        "acceptance_rate": [_finite(r) for r in rate] if rate is not None else None,
    }
    _emit(report, "json")
    return EXIT_OK


def cmd_monitor(args):
    spec = _spec_from_args(args)
    th = delta_threshold(args.alpha, args.eps, spec.target.p, spec.m)
    delta = args.delta if args.delta is not None else th.delta
    min_effort = args.min_effort if args.min_effort is not None else th.M_int
    plan = MonitorPlan(
        delta=delta, min_effort=min_effort, schedule=Schedule.parse(args.schedule),
        max_iterations=args.max_iterations, statistic=args.stat, mv=args.mv,
        batch=BatchConfig.parse(args.batch), burnin=args.burnin, threshold=th,
    )
    tr = run_monitor(spec, plan, tuple(args.track or ()))
    if args.trace:
        tr.write_csv(args.trace)
    files = _save_chains(args.save_chains, tr.chains.samples) if args.save_chains else []
    fin = tr.final
    met = tr.reason == "threshold_met"
    report = {
        "schema_version": SCHEMA_VERSION,
        "target": args.target,
        "m": spec.m,
        "p": spec.target.p,
        "seed": args.seed,
        "statistic": args.stat,
        "schedule": args.schedule,
        "termination_n": fin.n,
        "psrf": _finite(fin.psrf),
        "ess": _finite(fin.ess),
        "reason": tr.reason,
        "converged": met,
        "checkpoints": len(tr.entries),
        "min_effort": min_effort,
        "mean": tr.chains.drop(plan.burnin).samples.mean(axis=(0, 1)).tolist(),
        "files": files,
        **_threshold_fields(th),
        "delta": delta,
    }
    _emit(report, "json")
    return EXIT_OK if met else EXIT_NOT_CONVERGED


def cmd_reproduce(args):
    cfg = StudyConfig(
        experiment=args.experiment, replications=args.replications, seed=args.seed, alpha=args.alpha,
        eps=args.eps, max_iterations=args.max_iterations, h=args.h, dataset=args.dataset,
        batch=BatchConfig.parse(args.batch),
    )
    if cfg.dataset and not Path(cfg.dataset).is_file():
        raise CliError(f"titanic dataset not found at {cfg.dataset}")
    summary = reproduce(cfg, args.outdir, workers=args.workers, plots=not args.no_plots)
    out = {
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.experiment,
        "outdir": str(args.outdir),
        "labels": {
            k: {"termination_median": v["termination_median"], "termination_var": v["termination_var"],
                "threshold_met_fraction": v["threshold_met_fraction"]}
            for k, v in summary["labels"].items()
        },
    }
    _emit(out, "json")
    return EXIT_OK


def _add_threshold_flags(p):
    p.add_argument("--alpha", type=float, default=0.05, help="confidence level complement (default .05)")
    p.add_argument("--eps", type=float, default=0.10, help="relative precision (default .10)")


def _add_chain_flags(p):
    p.add_argument("--chains", nargs="+", required=True, metavar="FILE", help="one CSV per chain")
    p.add_argument("--header", action="store_true", help="chain files have a header row")
    burn = p.add_mutually_exclusive_group()
    burn.add_argument("--burnin", type=int, default=0, help="rows to drop from the start of every chain")
    burn.add_argument("--discard-half", action="store_true", help="drop the first half of every chain")
    p.add_argument("--batch", default="sqrt", help="sqrt, cube or an integer batch size")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def _add_target_flags(p):
    p.add_argument("--target", choices=("ar1", "t5", "bimodal", "titanic"), required=True)
    p.add_argument("--m", type=int, default=3, help="number of chains")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rho", type=float, default=0.95)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--df", type=float, default=5.0)
    p.add_argument("--proposal-var", type=float, default=None,
                   help="proposal variance (titanic: multiplier on the default covariance)")
    p.add_argument("--start-mode", choices=("spread", "left"), default="spread",
                   help="bimodal starts: N(5, 10^2) or N(0, 2)")
    p.add_argument("--dataset", help="Titanic passenger CSV")


def build_parser():
    ap = _Parser(prog="lugsail", description="PSRF convergence diagnostics for MCMC output.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("diagnose", help="PSRF, ESS and convergence verdict for chain files")
    _add_chain_flags(p)
    _add_threshold_flags(p)
    p.add_argument("--stat", choices=("lugsail", "classic"), default="lugsail")
    p.add_argument("--mv", choices=("det", "maxeig"), default=None, help="multivariate form (p > 1)")
    p.add_argument("--min-effort", type=int, default=None, help="iteration floor (default ceil(M))")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("threshold", help="minimum ESS M and the PSRF cutoff delta")
    _add_threshold_flags(p)
    p.add_argument("--p", type=int, default=1, help="dimension")
    p.add_argument("--m", type=int, default=1, help="number of chains")
    p.add_argument("--format", choices=("json", "csv", "text"), default="json")
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("ess", help="multivariate effective sample size for chain files")
    _add_chain_flags(p)
    _add_threshold_flags(p)
    p.set_defaults(func=cmd_ess)

    p = sub.add_parser("simulate", help="write chains from a built-in target")
    _add_target_flags(p)
    p.add_argument("--n", type=int, required=True, help="iterations per chain")
    p.add_argument("--outdir", required=True)
    p.add_argument("--header", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("monitor", help="grow chains until the PSRF cutoff is met")
    _add_target_flags(p)
    _add_threshold_flags(p)
    p.add_argument("--delta", type=float, default=None, help="override the cutoff")
    p.add_argument("--schedule", default="geometric:1.1", help="fixed:K or geometric:RATE[:START]")
    p.add_argument("--stat", choices=("lugsail", "classic"), default="lugsail")
    p.add_argument("--mv", choices=("det", "maxeig"), default=None)
    p.add_argument("--batch", default="sqrt")
    p.add_argument("--burnin", type=int, default=0)
    p.add_argument("--min-effort", type=int, default=None)
    p.add_argument("--max-iterations", type=int, default=10**7)
    p.add_argument("--track", nargs="*", help="extra statistics, e.g. classic classic_maxeig")
    p.add_argument("--trace", help="write the trace CSV here")
    p.add_argument("--save-chains", metavar="DIR", help="write final chains here")
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("reproduce", help="run a replication study and write CSVs and figures")
    p.add_argument("--experiment", choices=EXPERIMENTS, required=True)
    p.add_argument("--replications", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--outdir", required=True)
    p.add_argument("--dataset", help="Titanic passenger CSV (titanic only)")
    p.add_argument("--h", type=float, default=10.0, help="bimodal proposal variance")
    p.add_argument("--batch", default="sqrt")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--max-iterations", type=int, default=10**6)
    p.add_argument("--no-plots", action="store_true", help="write CSVs only")
    _add_threshold_flags(p)
    p.set_defaults(func=cmd_reproduce)
    return ap


_EXPECTED = (CliError, ChainError, DatasetError, SamplerError, EstimatorError, DegenerateChainError,
             ValueError, OSError)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _EXPECTED as exc:
        print(f"lugsail {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
