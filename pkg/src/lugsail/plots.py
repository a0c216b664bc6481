"""Figures for replication studies.

Rendering uses the non-interactive Agg backend; every figure is also backed
by a CSV written next to it, so nothing here is needed to read the results.
"""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .samplers import Bimodal, StudentT  # noqa: E402

DPI = 120
COLORS = {"lugsail": "tab:blue", "classic": "tab:red"}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI, metadata={"Software": None})
    plt.close(fig)
    return path.name


def running_psrf(path, trace, delta, title=""):
    """PSRF against n for the monitored statistic and anything tracked."""
    n = np.array([e.n for e in trace.entries])
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(n, [e.psrf for e in trace.entries], color=COLORS["lugsail"], lw=1.2,
            label=trace.plan.statistic)
    for key in trace.entries[0].extra:
        name = key.removeprefix("psrf_")
        ax.plot(n, [e.extra[key] for e in trace.entries], lw=1.0, ls="--",
                color=COLORS.get(name.split("_")[0], "tab:gray"), label=name)
    ax.axhline(delta, color="k", lw=0.8, ls=":", label=f"delta = {delta:.6f}")
    ax.axhline(1.1, color="0.6", lw=0.8, ls="-.", label="1.1")
    ax.set_xlabel("iterations per chain")
    ax.set_ylabel("PSRF")
    vals = [e.psrf for e in trace.entries if math.isfinite(e.psrf)]
    if vals:
        ax.set_ylim(0.99, min(max(vals), 2.0) + 0.01)
    ax.set_title(title, fontsize=10)
    ax.legend(fontsize=8, frameon=False)
    return _save(fig, path)


def mean_vs_termination(path, design, results, truth=None, component=0):
    """Scatter of the chain mean at termination against the termination index."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    markers = "os^vD<>"
    for i, lab in enumerate(design.labels):
        pts = [(o.termination_n, o.means[component]) for r in results for o in r.outcomes if o.label == lab.name]
        x, y = zip(*pts)
        ax.scatter(x, y, s=12, alpha=0.6, marker=markers[i % len(markers)], label=lab.name,
                   color=COLORS.get(lab.name.split("_")[0], None))
    if truth is not None:
        ax.axhline(truth, color="k", lw=0.8)
    ax.set_xscale("log")
    ax.set_xlabel("termination index")
    ax.set_ylabel(f"mean of {design.names[component]}")
    ax.legend(fontsize=8, frameon=False)
    return _save(fig, path)


def density_at_termination(path, samples, target, title=""):
    """Histogram of pooled samples with the target density overlaid."""
    x = np.asarray(samples).ravel()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    lo, hi = np.quantile(x, [0.005, 0.995])
    if isinstance(target, Bimodal):
        lo, hi = min(lo, -5.0), max(hi, 13.0)
    ax.hist(x, bins=60, range=(lo, hi), density=True, color="0.75", edgecolor="0.5", lw=0.3)
    grid = np.linspace(lo, hi, 400)
    ax.plot(grid, np.exp(target.log_density(grid[:, None])), color="k", lw=1.0)
    ax.set_xlabel("x")
    ax.set_ylabel("density")
    ax.set_title(title, fontsize=10)
    return _save(fig, path)


def chain_traces(path, chains, component=0, title=""):
    fig, ax = plt.subplots(figsize=(6, 3))
    x = chains.samples[:, :, component]
    for i in range(chains.m):
        ax.plot(np.arange(1, chains.n + 1), x[i], lw=0.5, alpha=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("x")
    ax.set_title(title, fontsize=10)
    return _save(fig, path)


def credible_intervals(path, names, intervals):
    """Posterior means with 95% intervals, one row per coefficient and label."""
    fig, ax = plt.subplots(figsize=(6, 0.45 * len(names) + 1))
    labels = list(intervals)
    off = np.linspace(-0.15, 0.15, len(labels)) if len(labels) > 1 else [0.0]
    y = np.arange(len(names))
    for j, lab in enumerate(labels):
        ci = intervals[lab]
        mean, lo, hi = (np.asarray(ci[k]) for k in ("mean", "lower", "upper"))
        ax.errorbar(mean, y + off[j], xerr=[mean - lo, hi - mean], fmt="o", ms=3, capsize=2,
                    label=f"{lab} (n = {ci['n']})")
    ax.axvline(0.0, color="0.6", lw=0.6)
    ax.set_yticks(y)
    ax.set_yticklabels(names)
    ax.invert_yaxis()
    ax.set_xscale("symlog", linthresh=0.1)
    ax.legend(fontsize=8, frameon=False)
    return _save(fig, path)


def means_spread(path, design, summary):
    """Across-replication sd of each posterior mean, per label."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    x = np.arange(len(design.names))
    labels = list(summary["labels"])
    w = 0.8 / len(labels)
    for j, lab in enumerate(labels):
        ax.bar(x + (j - (len(labels) - 1) / 2) * w, summary["labels"][lab]["sd_of_means"], width=w, label=lab)
    ax.set_xticks(x)
    ax.set_xticklabels(design.names, rotation=45, ha="right", fontsize=8)
    ax.set_yscale("log")
    ax.set_ylabel("sd of posterior mean")
    ax.legend(fontsize=8, frameon=False)
    return _save(fig, path)


def render_study(outdir, cfg, design, results, summary):
    """Write the standard figures for a study; returns the file names."""
    files = []
    first = results[0]
    delta = design.threshold.delta
    for name, tr in first.traces.items():
        files.append(running_psrf(outdir / f"running_psrf_{name}.png", tr, delta,
                                  f"{cfg.experiment}, replication 0"))
    truth = design.info.get("true_mean")
    files.append(mean_vs_termination(outdir / "mean_vs_termination.png", design, results, truth))
    spec = design.make_spec(0)
    if isinstance(spec.target, (StudentT, Bimodal)):
        tr = first.traces["lugsail"]
        files.append(density_at_termination(outdir / "density_at_termination.png", tr.chains.samples,
                                            spec.target, f"n = {tr.termination_n}"))
    if isinstance(spec.target, Bimodal):
        files.append(chain_traces(outdir / "trace_plot.png", first.traces["lugsail"].chains,
                                  title=f"h = {cfg.h}"))
    if cfg.experiment == "titanic":
        files.append(credible_intervals(outdir / "credible_intervals.png", design.names,
                                        summary["credible_intervals"]))
        files.append(means_spread(outdir / "means_spread.png", design, summary))
    return files

