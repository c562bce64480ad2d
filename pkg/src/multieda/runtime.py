"""Runtime laboratory: r-UMDA on the leading-zeros benchmark.

Two parameter evaluators back the experiments:

* :func:`convergence_params` gives the smallest selection and population
  sizes under which the value-0 frequencies provably fixate position by
  position, plus the iteration budget this takes.
* :func:`lower_bound_quantities` gives the matching early-phase
  quantities: how far the selection-relevant position can advance per
  iteration (``advance_cap``), the trailing margin where sampling the
  optimum stops being unlikely (``tail_margin``), and the resulting
  iteration count before which the optimum is unlikely to be sampled.

The experiment driver records, per trial, the two structural observables
those analyses are built on: the critical position (first position whose
value-0 frequency is not yet at the upper border) and the maximum
selection-relevant position (largest i such that at least mu individuals
have at least i-1 leading zeros).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

from .algorithms import (
    EdaParams,
    Instrumentation,
    ScoredPopulation,
    StopRule,
    TrialRecord,
    _critical_from_rows,
    _selection_relevant_from_fitnesses,
    initial_state,
    run,
)
from .benchmarks import make_benchmark
from .model import FrequencyMatrix, default_borders
from .parallel import run_trials, trial_rng, trial_seed_key

# Snap tolerance for the integer-valued parameter formulas: a value this
# close (relative) to an integer is treated as that integer before the
# ceiling, so float evaluation agrees with exact arithmetic when a formula
# lands exactly on the integer grid.
CEIL_SNAP_RTOL = 1e-9


def _ceil_snapped(x: float) -> int:
    nearest = round(x)
    if abs(x - nearest) <= CEIL_SNAP_RTOL * max(1.0, abs(nearest)):
        return int(nearest)
    return int(math.ceil(x))


def _log_base(x: float, base: float) -> float:
    return math.log(x) / math.log(base)


@dataclass(frozen=True)
class ConvergenceParams:
    """Parameter regime under which the model fixates within budget.

    ``mu_min`` and ``lambda_min`` are the smallest admissible selection
    and population sizes at selection pressure ``s``; ``iteration_budget``
    caps the fixation phase and ``guard_horizon`` is the horizon within
    which low value-0 frequencies are protected by the same regime. The
    experiment cap takes whichever is larger.
    """

    n: int
    r: int
    s: float
    mu_min: int
    lambda_min: int
    iteration_budget: int
    guard_horizon: int

    @property
    def experiment_cap(self) -> int:
        return max(self.iteration_budget, self.guard_horizon)


def convergence_params(n: int, r: int, s: float = 1.0) -> ConvergenceParams:
    """Evaluate the upper-bound parameter formulas.

    mu_min = ceil(24*(n+1)*r*ln(n)*(1 + log_{2s}(r))),
    lambda_min = ceil(3*s*e*mu_min), and
    iteration_budget = ceil(n * log_{2s}(2r)), with the documented
    near-integer snap applied before each ceiling. Requires n >= 4r.
    """
    if r < 2:
        raise ValueError(f"r must be at least 2, got {r}")
    if n < 4 * r:
        raise ValueError(f"n must be at least 4r = {4 * r}, got {n}")
    if s < 1.0:
        raise ValueError(f"s must be at least 1, got {s}")
    mu_min = _ceil_snapped(24.0 * (n + 1) * r * math.log(n) * (1.0 + _log_base(r, 2.0 * s)))
    lambda_min = _ceil_snapped(3.0 * s * math.e * mu_min)
    iteration_budget = _ceil_snapped(n * _log_base(2.0 * r, 2.0 * s))
    guard_horizon = _ceil_snapped(n * (1.0 + _log_base(r, 2.0 * s)))
    return ConvergenceParams(
        n=n,
        r=r,
        s=s,
        mu_min=mu_min,
        lambda_min=lambda_min,
        iteration_budget=iteration_budget,
        guard_horizon=guard_horizon,
    )


@dataclass(frozen=True)
class LowerBoundQuantities:
    """Early-phase quantities for a given (lambda, mu, delta).

    ``mu_ok`` reports (without rejecting) whether mu clears the size
    requirement ``mu_min`` the analysis assumes.
    """

    n: int
    r: int
    lam: int
    mu: int
    delta: float
    advance_cap: int
    tail_margin: int
    iteration_lower_bound: int
    mu_min: int
    mu_ok: bool


def lower_bound_quantities(
    n: int, r: int, lam: int, mu: int, delta: float
) -> LowerBoundQuantities:
    """Evaluate the lower-bound formulas.

    advance_cap = ceil(log_{2r/3}((1+delta) * lambda/mu)),
    tail_margin = ceil(log_{2r/3}(n^2 * lambda)) + 1, and
    iteration_lower_bound = floor((n - tail_margin)/advance_cap) - 1,
    clamped at 0. The same near-integer snap as in
    :func:`convergence_params` is applied before each ceiling.
    """
    if r < 2:
        raise ValueError(f"r must be at least 2, got {r}")
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if not 1 <= mu <= lam:
        raise ValueError(f"need 1 <= mu <= lam, got mu={mu} lam={lam}")
    base = 2.0 * r / 3.0
    advance_cap = _ceil_snapped(_log_base((1.0 + delta) * lam / mu, base))
    tail_margin = _ceil_snapped(_log_base(float(n) * n * lam, base)) + 1
    iteration_lower_bound = max(0, (n - tail_margin) // advance_cap - 1)
    mu_min = _ceil_snapped(
        max(
            24.0 * (n + 1) * r * math.log(n),
            6.0 * (1.0 + delta) / (delta * delta) * math.log(n),
        )
    )
    return LowerBoundQuantities(
        n=n,
        r=r,
        lam=lam,
        mu=mu,
        delta=delta,
        advance_cap=advance_cap,
        tail_margin=tail_margin,
        iteration_lower_bound=iteration_lower_bound,
        mu_min=mu_min,
        mu_ok=mu >= mu_min,
    )


def critical_position(model: FrequencyMatrix) -> int:
    """Smallest position whose value-0 frequency is below the upper
    border while all earlier ones sit at it; n+1 once every row is there.

    Border equality is tested within 1e-12. Only meaningful for margined
    models, where the border is reachable but not crossable.
    """
    if not model.borders.with_margins:
        raise ValueError("critical positions are defined for margined models")
    return _critical_from_rows(model.rows, model.borders.upper)


def max_selection_relevant_position(pop: ScoredPopulation, mu: int) -> int:
    """Largest position i such that at least mu individuals have at least
    i-1 leading zeros, capped at n. Position 1 always qualifies.

    The fitnesses must come from the leading-zeros benchmark, whose values
    are exactly the leading-zero counts.
    """
    if not 1 <= mu <= pop.size:
        raise ValueError(f"mu must satisfy 1 <= mu <= {pop.size}, got {mu}")
    return _selection_relevant_from_fitnesses(pop.fitnesses, mu, pop.individuals.shape[0])


@dataclass(frozen=True)
class RuntimeConfig:
    """One runtime experiment of the r-UMDA on leading zeros."""

    n: int
    r: int
    lam: int
    mu: int
    iteration_cap: int
    trials: int
    master_seed: int
    stop_on_convergence: bool = True
    stop_on_optimum: bool = False
    track_zero_frequencies: bool = False

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n}")
        if self.r < 2:
            raise ValueError(f"r must be at least 2, got {self.r}")
        if not 1 <= self.mu <= self.lam:
            raise ValueError(f"need 1 <= mu <= lam, got mu={self.mu} lam={self.lam}")
        if self.iteration_cap < 0:
            raise ValueError(f"iteration_cap must be nonnegative, got {self.iteration_cap}")
        if self.trials < 1:
            raise ValueError(f"trials must be at least 1, got {self.trials}")
        if self.master_seed < 0:
            raise ValueError(f"master_seed must be nonnegative, got {self.master_seed}")


@dataclass(frozen=True)
class RuntimeRecord:
    """One trial's outcome plus the full per-iteration traces."""

    trial: int
    seed: str
    record: TrialRecord


def _runtime_trial(config: RuntimeConfig, index: int) -> RuntimeRecord:
    f = make_benchmark("r_leading_ones", config.n, config.r)
    params = EdaParams(algorithm="umda", lam=config.lam, mu=config.mu)
    state = initial_state(
        params,
        config.n,
        config.r,
        default_borders(config.n, config.r),
        trial_rng(config.master_seed, index),
    )
    stop = StopRule(
        max_iterations=config.iteration_cap,
        optimum_fitness=float(config.n) if config.stop_on_optimum else None,
        on_convergence=config.stop_on_convergence,
    )
    instrument = Instrumentation(
        track_critical=True,
        track_selection_relevant=True,
        track_zero_frequencies=config.track_zero_frequencies,
        hit_fitness=float(config.n),
    )
    record = run(state, f, stop, instrument)
    return RuntimeRecord(
        trial=index,
        seed=trial_seed_key(config.master_seed, index),
        record=record,
    )


def runtime_experiment(config: RuntimeConfig, workers: int = 1) -> list[RuntimeRecord]:
    """Run seeded trials; trials that exhaust the cap are flagged, not errors."""
    return run_trials(functools.partial(_runtime_trial, config), config.trials, workers)
