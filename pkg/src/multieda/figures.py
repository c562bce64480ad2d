"""Figure rendering for the report path. One PNG per report kind.

matplotlib is imported lazily and pinned to the Agg backend, so importing
this module stays cheap and rendering works headless.
"""

from __future__ import annotations

import numpy as np

from .drift import DominanceReport, ExitStats, MartingaleReport, drift_bound
from .runtime import RuntimeRecord

DPI = 120


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt = _pyplot()
    plt.close(fig)


def drift_figure(path: str, stats: ExitStats) -> None:
    """Empirical exit probabilities with exact CIs against the bound."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    pairs = stats.pairs
    x = np.arange(len(pairs))
    p_hat = np.array([p.p_hat for p in pairs])
    lo = np.array([p.p_hat - p.ci_lo for p in pairs])
    hi = np.array([p.ci_hi - p.p_hat for p in pairs])
    ax.errorbar(x, p_hat, yerr=[lo, hi], fmt="o", capsize=3, label="empirical exit probability")
    if pairs:
        ax.axhline(pairs[0].bound, color="tab:red", linestyle="--", label="closed-form bound")
    ax.set_xticks(x)
    ax.set_xticklabels([f"{p.position}:{p.value}" for p in pairs], rotation=45)
    ax.set_xlabel("watched position:value")
    ax.set_ylabel("exit probability")
    ax.set_title(f"{stats.mode} exits, horizon {stats.config.horizon}, {stats.config.trials} trials")
    ax.legend()
    _save(fig, path)


def runtime_figure(path: str, records: list[RuntimeRecord]) -> None:
    """Critical-position traces per trial; convergence iterations marked."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    drew_trace = False
    for rec in records:
        trace = rec.record.critical_trace
        if trace is not None and len(trace) > 1:
            ax.plot(np.arange(len(trace)), trace, alpha=0.4, linewidth=1)
            drew_trace = True
    if drew_trace:
        ax.set_xlabel("iteration")
        ax.set_ylabel("critical position")
    else:
        evals = [rec.record.evaluations for rec in records]
        ax.hist(evals, bins=min(20, max(1, len(set(evals)))))
        ax.set_xlabel("evaluations")
        ax.set_ylabel("trials")
    converged = sum(rec.record.convergence_iteration is not None for rec in records)
    ax.set_title(f"{len(records)} trials, {converged} converged")
    _save(fig, path)


def dominance_figure(path: str, report: DominanceReport) -> None:
    """Both empirical CDFs over the threshold grid; violations flagged."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.step(report.thresholds, report.cdf_weakpref, where="post", label="weak preference")
    ax.step(report.thresholds, report.cdf_neutral, where="post", label="neutral")
    bad = np.asarray(report.violations, dtype=bool)
    if bad.any():
        ax.plot(report.thresholds[bad], report.cdf_weakpref[bad], "rx", label="violation")
    ax.set_xlabel("threshold")
    ax.set_ylabel("empirical CDF")
    ax.set_title(
        f"value-{report.value} frequency at position {report.position}, "
        f"iteration {report.iteration}"
    )
    ax.legend()
    _save(fig, path)


def martingale_figure(path: str, report: MartingaleReport) -> None:
    """Trajectory mean with a 3-standard-error band around the target."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    its = report.iterations
    ax.plot(its, report.means, label="empirical mean")
    band = 3.0 * report.standard_errors
    ax.fill_between(its, report.means - band, report.means + band, alpha=0.25, label="mean ± 3 SE")
    ax.axhline(report.target, color="tab:red", linestyle="--", label="expected value")
    ax.set_xlabel("iteration")
    ax.set_ylabel(f"frequency of value {report.value} at position {report.position}")
    ax.set_title(f"max |mean − target| = {report.max_deviation_sigmas:.2f} SE")
    ax.legend()
    _save(fig, path)


def bound_figure(path: str, mu: int, horizon: int, r: int) -> None:
    """Bound as a function of the horizon, with the requested point marked."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    t_max = max(2 * horizon, 10)
    ts = np.arange(t_max + 1)
    ax.plot(ts, [drift_bound(mu, int(t), r) for t in ts], label="bound")
    ax.plot([horizon], [drift_bound(mu, horizon, r)], "o", label=f"T = {horizon}")
    ax.set_xlabel("horizon T")
    ax.set_ylabel("exit probability bound")
    ax.set_title(f"mu = {mu}, r = {r}")
    ax.legend()
    _save(fig, path)
