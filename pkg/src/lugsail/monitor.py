"""Sequential termination: grow chains, re-evaluate the PSRF, stop at the cutoff.

Chains are extended between checkpoints, never regenerated, so a monitor run
is a deterministic function of the sampler seed and the plan.
"""

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .ess import EssThreshold
from .mcvar import BatchConfig
from .psrf import DegenerateChainError, compute_psrf, implied_ess
from .samplers import open_sampler

STATISTICS = ("lugsail", "classic", "lugsail_uni", "lugsail_multi_det", "multi_maxeig")


@dataclass(frozen=True)
class Schedule:
    """Checkpoint spacing: ``fixed`` adds ``step`` iterations, ``geometric`` multiplies by ``step``."""

    kind: str = "geometric"
    step: float = 1.1
    start: int | None = None

    def __post_init__(self):
        if self.kind == "fixed":
            if int(self.step) != self.step or self.step < 1:
                raise ValueError("fixed increment must be a positive integer")
        elif self.kind == "geometric":
            if not self.step > 1:
                raise ValueError("geometric rate must exceed 1")
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def parse(cls, text):
        """``fixed:500`` or ``geometric:1.1`` (optionally ``geometric:1.1:50``)."""
        parts = text.split(":")
        kind = parts[0]
        step = float(parts[1]) if len(parts) > 1 else (50 if kind == "fixed" else 1.1)
        if kind == "fixed":
            step = int(step)
        start = int(parts[2]) if len(parts) > 2 else None
        return cls(kind, step, start)

    def first(self):
        if self.start is not None:
            return self.start
        return int(self.step) if self.kind == "fixed" else 50

    def next(self, n):
        if self.kind == "fixed":
            return n + int(self.step)
        # round first so 50 * 1.1 = 55.000000000000007 still gives 55
        return max(n + 1, math.ceil(round(n * self.step, 9)))


@dataclass(frozen=True)
class MonitorPlan:
    delta: float
    min_effort: int = 1
    schedule: Schedule = Schedule()
    max_iterations: int = 10**7
    statistic: str = "lugsail"
    mv: str | None = None
    batch: BatchConfig = BatchConfig()
    burnin: int = 0
    threshold: EssThreshold | None = None

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.min_effort < 1:
            raise ValueError("min_effort must be at least 1")
        if self.max_iterations < self.min_effort:
            raise ValueError("max_iterations must be at least min_effort")
        if self.statistic not in STATISTICS:
            raise ValueError(f"unknown statistic {self.statistic!r}")

    @classmethod
    def from_threshold(cls, threshold, **kwargs):
        """Plan with ``delta`` and the minimum effort ``ceil(M)`` taken from an EssThreshold."""
        kwargs.setdefault("min_effort", threshold.M_int)
        return cls(delta=threshold.delta, threshold=threshold, **kwargs)


@dataclass(frozen=True)
class TraceEntry:
    n: int
    psrf: float
    ess: float
    converged: bool
    extra: dict = field(default_factory=dict)


@dataclass
class MonitorTrace:
    entries: list
    chains: object  # ChainSet at the last checkpoint, burn-in included
    reason: str  # threshold_met | cap_hit
    plan: MonitorPlan
    acceptance_rate: object = None

    @property
    def final(self):
        return self.entries[-1]

    @property
    def termination_n(self):
        return self.final.n

    def first_crossing(self, delta, min_effort=1, column="psrf"):
        """Checkpoint at which a run with cutoff ``delta`` would have stopped, or None."""
        for e in self.entries:
            value = e.psrf if column == "psrf" else e.extra[column]
            if e.n >= min_effort and value <= delta:
                return e.n
        return None

    def write_csv(self, path):
        extra = list(self.entries[0].extra) if self.entries else []
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "psrf", "ess", "converged", *extra])
            for e in self.entries:
                w.writerow([e.n, _fmt(e.psrf), _fmt(e.ess), int(e.converged), *(_fmt(e.extra[k]) for k in extra)])


def _fmt(x):
    return f"{x:.17g}"


def _evaluate(cs, plan, components=False):
    try:
        rep = compute_psrf(cs, plan.statistic, plan.batch, plan.mv, components=components)
    except DegenerateChainError:
        return None, math.inf, 0.0
    return rep, rep.value, implied_ess(rep)


def _stat_value(cs, name, batch):
    statistic, _, mv = name.partition("_")
    try:
        with warnings.catch_warnings():
            # a rank-deficient B is expected when tracking classic maxeig with m <= p
            warnings.simplefilter("ignore", RuntimeWarning)
            return compute_psrf(cs, statistic, batch, mv or None, components=False).value
    except DegenerateChainError:
        return math.inf


def diagnose_static(cs, plan):
    """One evaluation on fixed chains: ``(report, ess, converged)``.

    ``report`` is None when the within-chain variance is degenerate.
    """
    if plan.burnin:
        cs = cs.drop(plan.burnin)
    rep, value, ess = _evaluate(cs, plan, components=True)
    converged = rep is not None and value <= plan.delta and cs.n + plan.burnin >= plan.min_effort
    return rep, ess, converged


def run_monitor(spec, plan, track=()):
    """Grow chains on ``plan.schedule`` until the PSRF is at most ``plan.delta``.

    ``track`` names extra statistics recorded at every checkpoint, e.g.
    ``("classic",)`` or ``("classic_maxeig", "lugsail_det")``.
    """
    sampler = open_sampler(spec)
    entries = []
    n = max(plan.schedule.first(), plan.burnin + 2)
    while True:
        n = min(n, plan.max_iterations)
        sampler.grow_to(n)
        cs = sampler.chains(plan.burnin)
        _, value, ess = _evaluate(cs, plan)
        converged = n >= plan.min_effort and value <= plan.delta
        extra = {f"psrf_{name}": _stat_value(cs, name, plan.batch) for name in track}
        entries.append(TraceEntry(n, value, ess, converged, extra))
        if converged:
            reason = "threshold_met"
            break
        if n >= plan.max_iterations:
            reason = "cap_hit"
            break
        n = plan.schedule.next(n)
    rate = getattr(sampler, "acceptance_rate", None)
    return MonitorTrace(entries, sampler.chains(), reason, plan, rate)
