"""Replication studies for the built-in examples.

Each experiment runs a few monitor runs per replication and records, for
every *label*, where that stopping rule would have terminated and the chain
means at that point.  Labels that use a looser cutoff than the run itself
are read off the run's trace (chains are grown, never regenerated, so the
earlier checkpoint is a prefix of the final chains).  If the looser rule was
never met before the run stopped, a dedicated run is made for it.

Replication ``r`` draws all of its randomness from the key ``(seed, r)``.
"""

import csv
import io
import json
import math
import os
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .ess import delta_threshold
from .mcvar import BatchConfig
from .monitor import MonitorPlan, Schedule, run_monitor
from .psrf import DegenerateChainError, compute_psrf, univariate_psrfs
from .samplers import AR1, Bimodal, SamplerSpec, StudentT, ar1_crossing_n, ar1_truth
from .samplers.titanic import DESIGN_NAMES, logistic_setup, titanic_target

EXPERIMENTS = ("t5", "ar1", "bimodal", "titanic")
SUMMARY_VERSION = 1


@dataclass(frozen=True)
class StudyConfig:
    experiment: str
    replications: int
    seed: int = 0
    alpha: float = 0.05
    eps: float = 0.10
    max_iterations: int = 10**6
    h: float = 10.0  # bimodal proposal variance
    dataset: str | None = None
    batch: BatchConfig = BatchConfig()

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.experiment == "titanic" and not self.dataset:
            raise ValueError("the titanic experiment needs --dataset PATH")
        if not self.h > 0:
            raise ValueError("proposal variance h must be positive")


@dataclass(frozen=True)
class Run:
    """One monitor run: how to build it and what it tracks."""

    name: str
    plan: MonitorPlan
    track: tuple = ()


@dataclass(frozen=True)
class Label:
    """A stopping rule evaluated on a run's trace."""

    name: str
    run: str
    delta: float
    min_effort: int = 1
    column: str = "psrf"


@dataclass
class Outcome:
    label: str
    rep: int
    termination_n: int
    means: np.ndarray
    reason: str  # threshold_met | cap_hit


@dataclass
class Replication:
    rep: int
    outcomes: list
    traces: dict  # run name -> MonitorTrace
    extra: dict = field(default_factory=dict)


@dataclass
class Design:
    """Everything a study needs, built once and shared across replications."""

    make_spec: object  # (rep) -> SamplerSpec
    runs: tuple
    labels: tuple
    threshold: object
    info: dict
    names: tuple = ()
    post: object = None  # optional (Replication) -> dict of extra per-rep output


def _t5_design(cfg):
    m = 3
    th = delta_threshold(cfg.alpha, cfg.eps, 1, m)
    sched = Schedule("fixed", 50)
    plan = MonitorPlan.from_threshold(th, schedule=sched, max_iterations=cfg.max_iterations, batch=cfg.batch)
    runs = (Run("lugsail", plan, ("classic",)),)
    labels = (
        Label("lugsail_delta", "lugsail", th.delta, th.M_int),
        Label("lugsail_1.1", "lugsail", 1.1),
        Label("lugsail_1.01", "lugsail", 1.01),
        Label("classic_1.1", "lugsail", 1.1, column="psrf_classic"),
        Label("classic_1.01", "lugsail", 1.01, column="psrf_classic"),
    )
    tgt = StudentT(5.0)

    def make_spec(rep):
        return SamplerSpec(tgt, m=m, seed=(cfg.seed, rep), proposal_var=2.6**2)

    info = {"target": "t5", "m": m, "proposal_var": 2.6**2, "schedule": "fixed:50", "true_mean": 0.0}
    return Design(make_spec, runs, labels, th, info, ("x",))


def _ar1_design(cfg):
    m, rho, nu = 5, 0.95, 1.0
    th = delta_threshold(cfg.alpha, cfg.eps, 1, m)
    sched = Schedule("fixed", 500)
    common = dict(schedule=sched, max_iterations=cfg.max_iterations, batch=cfg.batch)
    runs = (
        Run("lugsail", MonitorPlan.from_threshold(th, **common), ("classic",)),
        Run("classic", MonitorPlan.from_threshold(th, statistic="classic", **common), ("lugsail",)),
    )
    labels = (
        Label("lugsail_delta", "lugsail", th.delta, th.M_int),
        Label("classic_delta", "classic", th.delta, th.M_int),
        Label("lugsail_1.1", "lugsail", 1.1),
        Label("classic_1.1", "classic", 1.1),
    )
    tgt = AR1(rho, nu)

    def make_spec(rep):
        return SamplerSpec(tgt, m=m, seed=(cfg.seed, rep))

    nstar = ar1_crossing_n(rho, nu, th.delta)
    truth = ar1_truth(rho, nu, nstar)
    info = {
        "target": "ar1", "rho": rho, "nu": nu, "m": m, "schedule": "fixed:500", "true_mean": 0.0,
        "true_crossing_n": nstar, "sigma2": truth.sigma2, "tau2_inf": truth.tau2_inf,
    }
    return Design(make_spec, runs, labels, th, info, ("y",))


def _bimodal_design(cfg):
    m = 5
    th = delta_threshold(cfg.alpha, cfg.eps, 1, m)
    plan = MonitorPlan.from_threshold(th, max_iterations=cfg.max_iterations, batch=cfg.batch)
    runs = (Run("lugsail", plan, ("classic",)),)
    labels = (
        Label("lugsail_delta", "lugsail", th.delta, th.M_int),
        Label("classic_delta", "lugsail", th.delta, th.M_int, column="psrf_classic"),
    )
    if cfg.h >= 5:
        # large steps: over-dispersed starts across both modes
        tgt = Bimodal()
        starts = "N(5, 10^2)"
    else:
        # small steps: every chain starts in the left mode
        tgt = Bimodal(start_mean=0.0, start_sd=math.sqrt(2.0))
        starts = "N(0, 2)"

    def make_spec(rep):
        return SamplerSpec(tgt, m=m, seed=(cfg.seed, rep), proposal_var=cfg.h)

    info = {
        "target": "bimodal", "m": m, "proposal_var": cfg.h, "starts": starts, "schedule": "geometric:1.1",
        "true_mean": tgt.mean, "true_variance": tgt.variance,
    }
    return Design(make_spec, runs, labels, th, info, ("x",))


def _titanic_design(cfg):
    m = 5
    tgt = titanic_target(cfg.dataset)
    starts, prop = logistic_setup(tgt, m)
    th = delta_threshold(cfg.alpha, cfg.eps, tgt.p, m)
    plan = MonitorPlan.from_threshold(
        th, schedule=Schedule("geometric", 1.1, 50), max_iterations=cfg.max_iterations, batch=cfg.batch,
    )
    runs = (Run("lugsail", plan, ("classic_maxeig", "lugsail_maxeig")),)
    labels = (
        Label("lugsail_delta", "lugsail", th.delta, th.M_int),
        Label("lugsail_1.1", "lugsail", 1.1),
    )

    def make_spec(rep):
        return SamplerSpec(tgt, m=m, seed=(cfg.seed, rep), proposal_var=prop, starts=starts)

    def post(result):
        return {"comparison": _titanic_comparison(result.traces["lugsail"].chains, cfg.batch)}

    info = {
        "target": "titanic", "m": m, "p": tgt.p, "records": int(tgt.X.shape[0]),
        "schedule": "geometric:1.1:50", "prior_var": tgt.prior_var,
    }
    return Design(make_spec, runs, labels, th, info, DESIGN_NAMES, post)


def _titanic_comparison(cs, bc):
    """Univariate and multivariate PSRFs side by side at termination."""
    rows = []
    for k, rep in enumerate(univariate_psrfs(cs, "lugsail", bc)):
        rows.append({"statistic": f"lugsail_{DESIGN_NAMES[k]}", "value": rep.value if rep else math.inf})
    for name, stat, mv in (("lugsail_det", "lugsail", "det"), ("lugsail_maxeig", "lugsail", "maxeig"),
                           ("classic_maxeig", "classic", "maxeig")):
        try:
            with warnings.catch_warnings():
                # classic maxeig with m <= p; the rank deficit is the point of the comparison
                warnings.simplefilter("ignore", RuntimeWarning)
                v = compute_psrf(cs, stat, bc, mv, components=False).value
        except DegenerateChainError:
            v = math.inf
        rows.append({"statistic": name, "value": v})
    return rows


_DESIGNS = {"t5": _t5_design, "ar1": _ar1_design, "bimodal": _bimodal_design, "titanic": _titanic_design}


def build_design(cfg):
    return _DESIGNS[cfg.experiment](cfg)


def _means(cs):
    return cs.samples.mean(axis=(0, 1))


def run_replication(design, rep):
    spec = design.make_spec(rep)
    traces = {r.name: run_monitor(spec, r.plan, r.track) for r in design.runs}
    runs = {r.name: r for r in design.runs}
    outcomes = []
    for lab in design.labels:
        tr = traces[lab.run]
        n = tr.first_crossing(lab.delta, lab.min_effort, lab.column)
        if n is not None:
            outcomes.append(Outcome(lab.name, rep, n, _means(tr.chains.prefix(n)), "threshold_met"))
            continue
        # the looser rule was never met on this run's checkpoints: run it on its own
        base = runs[lab.run].plan
        stat = "classic" if lab.column == "psrf_classic" else base.statistic
        plan = replace(base, delta=lab.delta, min_effort=lab.min_effort, statistic=stat, threshold=None)
        own = run_monitor(spec, plan)
        outcomes.append(Outcome(lab.name, rep, own.termination_n, _means(own.chains), own.reason))
    result = Replication(rep, outcomes, traces)
    if design.post is not None:
        result.extra = design.post(result)
    return result


def run_study(cfg, workers=1, on_result=None):
    """Run every replication; results come back sorted by replication index."""
    design = build_design(cfg)

    def task(rep):
        res = run_replication(design, rep)
        if on_result is not None:
            on_result(design, res)
        return res

    if workers <= 1:
        results = [task(r) for r in range(cfg.replications)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, range(cfg.replications)))
    return design, results


def _num(x):
    return f"{x:.17g}"


def write_atomic(path, text):
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def replication_rows(design, results, label):
    """``(header, rows)`` of the numeric per-replication table for one label."""
    p = len(design.names)
    header = ["rep", "termination_n", *(f"mean_{k + 1}" for k in range(p)), "threshold_met"]
    rows = []
    for res in results:
        o = next(o for o in res.outcomes if o.label == label)
        rows.append([str(o.rep), str(o.termination_n), *(_num(v) for v in o.means),
                     "1" if o.reason == "threshold_met" else "0"])
    return header, rows


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _trace_text(trace):
    buf = io.StringIO()
    extra = list(trace.entries[0].extra)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "psrf", "ess", "converged", *extra])
    for e in trace.entries:
        w.writerow([e.n, _num(e.psrf), _num(e.ess), int(e.converged), *(_num(e.extra[k]) for k in extra)])
    return buf.getvalue()


def write_replication_outputs(outdir, design, res):
    """Per-replication files: one trace CSV per run, plus any extra tables."""
    tdir = Path(outdir) / "traces"
    tdir.mkdir(parents=True, exist_ok=True)
    for name, tr in res.traces.items():
        write_atomic(tdir / f"rep{res.rep:04d}_{name}.csv", _trace_text(tr))
    comp = res.extra.get("comparison")
    if comp is not None:
        rows = [[r["statistic"], _num(r["value"])] for r in comp]
        write_atomic(tdir / f"rep{res.rep:04d}_comparison.csv", _csv_text(["statistic", "psrf"], rows))


def summarize_study(cfg, design, results):
    labels = {}
    for lab in design.labels:
        ns = np.array([o.termination_n for r in results for o in r.outcomes if o.label == lab.name], dtype=float)
        mu = np.array([o.means for r in results for o in r.outcomes if o.label == lab.name])
        met = [o.reason == "threshold_met" for r in results for o in r.outcomes if o.label == lab.name]
        R = len(ns)
        labels[lab.name] = {
            "delta": lab.delta,
            "min_effort": lab.min_effort,
            "replications": R,
            "threshold_met_fraction": float(np.mean(met)),
            "termination_median": float(np.median(ns)),
            "termination_mean": float(ns.mean()),
            "termination_min": float(ns.min()),
            "termination_max": float(ns.max()),
            "termination_var": float(ns.var(ddof=1)) if R > 1 else 0.0,
            "termination_sd": float(ns.std(ddof=1)) if R > 1 else 0.0,
            "mean_of_means": mu.mean(axis=0).tolist(),
            "sd_of_means": (mu.std(axis=0, ddof=1) if R > 1 else np.zeros(mu.shape[1])).tolist(),
        }
    out = {
        "summary_version": SUMMARY_VERSION,
        "experiment": cfg.experiment,
        "replications": cfg.replications,
        "seed": cfg.seed,
        "alpha": cfg.alpha,
        "eps": cfg.eps,
        "max_iterations": cfg.max_iterations,
        "batch": cfg.batch.policy if cfg.batch.policy != "explicit" else cfg.batch.size,
        "threshold": design.threshold.as_dict(),
        "components": list(design.names),
        "design": design.info,
        "labels": labels,
    }
    if cfg.experiment == "titanic":
        out["credible_intervals"] = _credible_intervals(design, results[0])
    return out


def _credible_intervals(design, res):
    """Posterior mean and central 95% interval per component for replication 0."""
    tr = res.traces["lugsail"]
    out = {}
    for o in res.outcomes:
        if o.rep != res.rep:
            continue
        x = tr.chains.prefix(min(o.termination_n, tr.chains.n)).samples.reshape(-1, len(design.names))
        lo, hi = np.quantile(x, [0.025, 0.975], axis=0)
        out[o.label] = {
            "n": o.termination_n,
            "mean": x.mean(axis=0).tolist(),
            "lower": lo.tolist(),
            "upper": hi.tolist(),
        }
    return out


def summary_csv(summary):
    header = ["label", "delta", "replications", "threshold_met_fraction", "termination_median",
              "termination_mean", "termination_var", "termination_sd"]
    rows = []
    for name, s in summary["labels"].items():
        rows.append([name, _num(s["delta"]), str(s["replications"]), _num(s["threshold_met_fraction"]),
                     _num(s["termination_median"]), _num(s["termination_mean"]),
                     _num(s["termination_var"]), _num(s["termination_sd"])])
    return _csv_text(header, rows)


def reproduce(cfg, outdir, workers=1, plots=True):
    """Run a study and write its CSVs (and figures) into ``outdir``.

    Per-replication traces are written as each replication finishes; the
    replication tables and the summary are written last.
    """
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {outdir}: {exc.strerror or exc}") from exc
    if not os.access(outdir, os.W_OK):
        raise OSError(f"output directory {outdir} is not writable")

    def on_result(design, res):
        write_replication_outputs(outdir, design, res)

    design, results = run_study(cfg, workers, on_result)
    files = []
    for lab in design.labels:
        header, rows = replication_rows(design, results, lab.name)
        path = outdir / f"replications_{lab.name}.csv"
        write_atomic(path, _csv_text(header, rows))
        files.append(path.name)
    summary = summarize_study(cfg, design, results)
    if plots:
        from . import plots as _plots

        summary["figures"] = _plots.render_study(outdir, cfg, design, results, summary)
    summary["files"] = files
    write_atomic(outdir / "summary.csv", summary_csv(summary))
    write_atomic(outdir / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary
