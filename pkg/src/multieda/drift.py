"""Genetic-drift laboratory.

Without a fitness signal, frequencies wander by sampling noise alone.
This module measures that drift empirically and compares it against the
closed-form tail bound

    2 * exp(-mu / (12*T*r + (4/3)*r)),

which caps the probability that a neutral frequency leaves the middle
range [1/(2r), 3/(2r)] within the first T iterations, and equally the
probability that the value-0 frequency of a position that weakly prefers
0 ever drops to 1/(2r).

Three experiment shapes are provided: first-exit counting with exact
binomial confidence intervals, an empirical stochastic-dominance check
between a weakly-preferring and a neutral process, and a martingale
report verifying that neutral frequencies keep their mean.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .algorithms import EdaParams, Instrumentation, StopRule, initial_state, run
from .benchmarks import make_benchmark
from .model import default_borders, no_margins
from .parallel import run_trials, trial_rng

EXIT_MODES = {"neutral_constant": "two_sided", "first_zero_bonus": "one_sided_low"}


def drift_bound(mu: int, horizon: int, r: int) -> float:
    """Tail bound 2*exp(-mu / (12*horizon*r + (4/3)*r)).

    Evaluated in double precision: the denominator and the division are
    IEEE-754 double steps. ``mu = 0`` gives the vacuous bound 2. The bound
    decreases in mu and increases in horizon and r.
    """
    if mu < 0:
        raise ValueError(f"mu must be nonnegative, got {mu}")
    if horizon < 0:
        raise ValueError(f"horizon must be nonnegative, got {horizon}")
    if r < 2:
        raise ValueError(f"r must be at least 2, got {r}")
    return 2.0 * math.exp(-(mu / (12.0 * horizon * r + (4.0 / 3.0) * r)))


def clopper_pearson(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval for a proportion."""
    if not 0 <= successes <= trials:
        raise ValueError(f"need 0 <= successes <= trials, got {successes}/{trials}")
    if trials == 0:
        return 0.0, 1.0
    alpha = 1.0 - confidence
    lo = 0.0 if successes == 0 else float(stats.beta.ppf(alpha / 2, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(stats.beta.ppf(1 - alpha / 2, successes + 1, trials - successes))
    return lo, hi


@dataclass(frozen=True)
class DriftConfig:
    """One drift experiment: run ``trials`` seeded runs for ``horizon``
    iterations and watch the listed (position, value) frequency pairs.

    Positions are 1-based, values 0-based. ``fitness`` selects the
    benchmark by name; ``margins`` selects the border mode.
    """

    params: EdaParams
    n: int
    r: int
    fitness: str
    horizon: int
    watched: tuple[tuple[int, int], ...]
    trials: int
    master_seed: int
    margins: bool = True
    cadence: int = 1

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be at least 1, got {self.n}")
        if self.r < 2:
            raise ValueError(f"r must be at least 2, got {self.r}")
        if self.horizon < 0:
            raise ValueError(f"horizon must be nonnegative, got {self.horizon}")
        if not self.watched:
            raise ValueError("watched must list at least one (position, value) pair")
        for position, value in self.watched:
            if not 1 <= position <= self.n:
                raise ValueError(f"watched position {position} outside [1..{self.n}]")
            if not 0 <= value < self.r:
                raise ValueError(f"watched value {value} outside [0..{self.r - 1}]")
        if self.trials < 1:
            raise ValueError(f"trials must be at least 1, got {self.trials}")
        if self.master_seed < 0:
            raise ValueError(f"master_seed must be nonnegative, got {self.master_seed}")
        if self.cadence < 1:
            raise ValueError(f"cadence must be at least 1, got {self.cadence}")

    def borders(self):
        return default_borders(self.n, self.r) if self.margins else no_margins(self.r)


def _drift_trial(config: DriftConfig, index: int) -> dict[tuple[int, int], np.ndarray]:
    f = make_benchmark(config.fitness, config.n, config.r)
    state = initial_state(config.params, config.n, config.r, config.borders(), trial_rng(config.master_seed, index))
    record = run(
        state,
        f,
        StopRule(max_iterations=config.horizon),
        Instrumentation(watched=config.watched, cadence=config.cadence),
    )
    return record.watched_series


@dataclass(frozen=True)
class TrajectorySet:
    """Watched frequencies of every trial at the logged iterations."""

    config: DriftConfig
    iterations: np.ndarray
    series: dict[tuple[int, int], np.ndarray]  # (trials, len(iterations))


def collect_trajectories(config: DriftConfig, workers: int = 1) -> TrajectorySet:
    """Run the experiment and stack the watched series across trials."""
    results = run_trials(functools.partial(_drift_trial, config), config.trials, workers)
    logged = np.arange(0, config.horizon + 1, config.cadence, dtype=np.int64)
    series = {
        pair: np.vstack([res[pair] for res in results]) for pair in config.watched
    }
    return TrajectorySet(config=config, iterations=logged, series=series)


@dataclass(frozen=True)
class PairExitStats:
    """First-exit statistics of one watched (position, value) pair."""

    position: int
    value: int
    trials: int
    exits: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    bound: float
    exit_iterations: tuple[Optional[int], ...]


@dataclass(frozen=True)
class ExitStats:
    """Exit statistics of a drift experiment, one entry per watched pair.

    ``mode`` is two_sided for a neutral fitness (leave the middle range
    [1/(2r), 3/(2r)]) and one_sided_low for a weakly-0-preferring fitness
    (value-0 frequency drops to 1/(2r) or below).
    """

    config: DriftConfig
    mode: str
    pairs: tuple[PairExitStats, ...]


def _first_exit(series: np.ndarray, iterations: np.ndarray, r: int, mode: str) -> Optional[int]:
    center = 1.0 / r
    radius = 1.0 / (2.0 * r)
    if mode == "two_sided":
        exited = np.abs(series - center) >= radius
    else:
        exited = series <= radius
    hits = np.flatnonzero(exited)
    return int(iterations[hits[0]]) if hits.size else None


def exit_time_experiment(config: DriftConfig, workers: int = 1) -> ExitStats:
    """Count, per watched pair, the trials whose frequency exits by T.

    The exit event is checked at every logged iteration, so use cadence 1
    for faithful first-exit times. The reported bound uses the config's
    mu and horizon; it applies to neutral positions (two-sided) and to
    weak-preference positions (one-sided, value 0).
    """
    mode = EXIT_MODES.get(config.fitness)
    if mode is None:
        raise ValueError(
            f"exit experiments need a fitness in {sorted(EXIT_MODES)}, got {config.fitness!r}"
        )
    if mode == "one_sided_low":
        bad = [pair for pair in config.watched if pair[1] != 0]
        if bad:
            raise ValueError(f"one-sided exits watch value 0 only, got pairs {bad}")
    if config.params.mu is None:
        raise ValueError("exit experiments need an algorithm with mu (umda or pbil)")
    traj = collect_trajectories(config, workers)
    bound = drift_bound(config.params.mu, config.horizon, config.r)
    pairs = []
    for position, value in config.watched:
        exit_iters = tuple(
            _first_exit(traj.series[(position, value)][k], traj.iterations, config.r, mode)
            for k in range(config.trials)
        )
        exits = sum(1 for e in exit_iters if e is not None)
        lo, hi = clopper_pearson(exits, config.trials)
        pairs.append(
            PairExitStats(
                position=position,
                value=value,
                trials=config.trials,
                exits=exits,
                p_hat=exits / config.trials,
                ci_lo=lo,
                ci_hi=hi,
                bound=bound,
                exit_iterations=exit_iters,
            )
        )
    return ExitStats(config=config, mode=mode, pairs=tuple(pairs))


@dataclass(frozen=True)
class DominanceReport:
    """Empirical CDF comparison of one frequency under two fitnesses.

    A violation at threshold theta means the weak-preference CDF exceeds
    the neutral CDF by more than ``sigmas`` pooled standard errors there,
    i.e. the weakly-preferring process failed to dominate.
    """

    iteration: int
    position: int
    value: int
    thresholds: np.ndarray
    cdf_weakpref: np.ndarray
    cdf_neutral: np.ndarray
    diff: np.ndarray
    pooled_se: np.ndarray
    sigmas: float
    violations: np.ndarray
    flagged: bool


def dominance_check(
    neutral: TrajectorySet,
    weakpref: TrajectorySet,
    iteration: int,
    grid_points: int = 101,
    sigmas: float = 3.0,
) -> DominanceReport:
    """Check that the weak-preference frequency stochastically dominates
    the neutral one at the given iteration, on an even threshold grid.

    Both trajectory sets must come from identical algorithm parameters and
    trial counts; the compared pair is position 1, value 0.
    """
    cn, cw = neutral.config, weakpref.config
    if cn.fitness != "neutral_constant":
        raise ValueError(f"neutral set must use neutral_constant, got {cn.fitness!r}")
    if cw.fitness != "first_zero_bonus":
        raise ValueError(f"weak-preference set must use first_zero_bonus, got {cw.fitness!r}")
    for attr in ("params", "n", "r", "trials", "margins", "horizon", "cadence"):
        if getattr(cn, attr) != getattr(cw, attr):
            raise ValueError(
                f"mismatched configs: {attr} differs "
                f"({getattr(cn, attr)!r} vs {getattr(cw, attr)!r})"
            )
    pair = (1, 0)
    if pair not in neutral.series or pair not in weakpref.series:
        raise ValueError("both trajectory sets must watch position 1, value 0")
    where = np.flatnonzero(neutral.iterations == iteration)
    if not where.size:
        raise ValueError(f"iteration {iteration} was not logged")
    col = int(where[0])

    q = neutral.series[pair][:, col]
    p = weakpref.series[pair][:, col]
    thresholds = np.linspace(0.0, 1.0, grid_points)
    cdf_q = (q[:, None] <= thresholds).mean(axis=0)
    cdf_p = (p[:, None] <= thresholds).mean(axis=0)
    n_q, n_p = q.size, p.size
    pooled = (cdf_q * n_q + cdf_p * n_p) / (n_q + n_p)
    pooled_se = np.sqrt(pooled * (1.0 - pooled) * (1.0 / n_q + 1.0 / n_p))
    diff = cdf_p - cdf_q
    violations = diff > sigmas * pooled_se
    return DominanceReport(
        iteration=iteration,
        position=pair[0],
        value=pair[1],
        thresholds=thresholds,
        cdf_weakpref=cdf_p,
        cdf_neutral=cdf_q,
        diff=diff,
        pooled_se=pooled_se,
        sigmas=sigmas,
        violations=violations,
        flagged=bool(violations.any()),
    )


@dataclass(frozen=True)
class MartingaleReport:
    """Mean of one watched frequency across trials, per logged iteration.

    ``deviation_sigmas[t]`` is |mean - 1/r| in standard-error units; it is
    0 for an exact match and infinity if the spread is zero but the mean
    is off target.
    """

    position: int
    value: int
    target: float
    iterations: np.ndarray
    means: np.ndarray
    standard_errors: np.ndarray
    deviation_sigmas: np.ndarray
    max_deviation_sigmas: float


def martingale_report(trajectories: TrajectorySet, position: int, value: int) -> MartingaleReport:
    """Summarize how well a neutral frequency keeps its initial mean.

    Requires a margin-free run (restriction breaks the mean-preservation
    argument) on a fitness that is neutral at the watched position.
    """
    config = trajectories.config
    if config.margins:
        raise ValueError("martingale reports need a margin-free configuration")
    neutral_here = config.fitness == "neutral_constant" or (
        config.fitness == "first_zero_bonus" and position >= 2
    )
    if not neutral_here:
        raise ValueError(
            f"{config.fitness!r} is not neutral at position {position}"
        )
    pair = (position, value)
    if pair not in trajectories.series:
        raise ValueError(f"pair {pair} was not watched")
    series = trajectories.series[pair]
    target = 1.0 / config.r
    means = series.mean(axis=0)
    if series.shape[0] > 1:
        spread = series.std(axis=0, ddof=1) / np.sqrt(series.shape[0])
    else:
        spread = np.zeros(series.shape[1])
    deviations = np.abs(means - target)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigmas = np.where(deviations == 0.0, 0.0, deviations / spread)
    return MartingaleReport(
        position=position,
        value=value,
        target=target,
        iterations=trajectories.iterations,
        means=means,
        standard_errors=spread,
        deviation_sigmas=sigmas,
        max_deviation_sigmas=float(np.max(sigmas)) if sigmas.size else 0.0,
    )
