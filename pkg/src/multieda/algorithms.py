"""Single-step transitions and the run loop for the three r-valued EDAs.

All three algorithms share the model from :mod:`multieda.model` and differ
only in how they turn one sampled population into the next frequency
matrix:

* ``umda_step``: relative value frequencies among the mu best of lambda.
* ``pbil_step``: convex combination of the current row with those
  relative frequencies, weighted by rho.
* ``cga_step``: two samples; the winner's values gain 1/K per position,
  the loser's lose 1/K.

Every step ends by restricting each row back onto the clamped simplex.

Reproducibility contract: an iteration consumes a fixed, documented number
of draws from the state's generator. r-UMDA and r-PBIL consume n blocks of
lambda uniforms (population sampling, position order) followed by lambda
tie-break keys; r-cGA consumes n blocks of 2 uniforms followed by exactly
one winner coin, drawn even when the two fitnesses differ.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .benchmarks import FitnessFunction
from .model import (
    BORDER_TOL,
    Borders,
    FrequencyMatrix,
    new_uniform,
    restrict_matrix,
    sample_population,
)

ALGORITHMS = ("umda", "pbil", "cga")


@dataclass(frozen=True)
class EdaParams:
    """Identity and parameters of one algorithm.

    ``lam`` and ``mu`` are the population and selection sizes of r-UMDA
    and r-PBIL; ``rho`` is the r-PBIL scaling factor; ``K`` is the r-cGA
    hypothetical population size. Fields that do not belong to the chosen
    algorithm must be left unset.
    """

    algorithm: str
    lam: Optional[int] = None
    mu: Optional[int] = None
    rho: Optional[float] = None
    K: Optional[float] = None

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(
                f"unknown algorithm {self.algorithm!r} (known: {', '.join(ALGORITHMS)})"
            )
        if self.algorithm in ("umda", "pbil"):
            if self.lam is None or self.mu is None:
                raise ValueError(f"{self.algorithm} requires lam and mu")
            if self.lam < 1:
                raise ValueError(f"lam must be at least 1, got {self.lam}")
            if not 1 <= self.mu <= self.lam:
                raise ValueError(f"mu must satisfy 1 <= mu <= lam, got mu={self.mu} lam={self.lam}")
            if self.K is not None:
                raise ValueError("K belongs to cga only")
        if self.algorithm == "umda" and self.rho is not None:
            raise ValueError("rho belongs to pbil only")
        if self.algorithm == "pbil":
            if self.rho is None:
                raise ValueError("pbil requires rho")
            if not 0.0 <= self.rho <= 1.0:
                raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        if self.algorithm == "cga":
            if self.K is None:
                raise ValueError("cga requires K")
            if self.K <= 0.0:
                raise ValueError(f"K must be positive, got {self.K}")
            if self.lam is not None or self.mu is not None or self.rho is not None:
                raise ValueError("cga takes only K; lam, mu and rho must be unset")

    @property
    def samples_per_iteration(self) -> int:
        return 2 if self.algorithm == "cga" else int(self.lam)


@dataclass
class EdaState:
    """Mutable run state: parameters, current model, counters, RNG."""

    params: EdaParams
    model: FrequencyMatrix
    rng: np.random.Generator
    iteration: int = 0
    evaluations: int = 0


def initial_state(
    params: EdaParams,
    n: int,
    r: int,
    borders: Borders,
    rng: np.random.Generator,
) -> EdaState:
    """Uniform model plus a caller-owned generator."""
    return EdaState(params=params, model=new_uniform(n, r, borders), rng=rng)


@dataclass(frozen=True)
class ScoredPopulation:
    """A sampled population (columns) with its fitness values."""

    individuals: np.ndarray
    fitnesses: np.ndarray

    def __post_init__(self) -> None:
        if self.individuals.ndim != 2:
            raise ValueError(f"individuals must be (n, count), got {self.individuals.shape}")
        if self.fitnesses.shape != (self.individuals.shape[1],):
            raise ValueError(
                f"fitnesses must have shape ({self.individuals.shape[1]},), "
                f"got {self.fitnesses.shape}"
            )

    @property
    def size(self) -> int:
        return self.individuals.shape[1]


def select_top_mu(pop: ScoredPopulation, mu: int, rng: np.random.Generator) -> np.ndarray:
    """The mu fittest individuals, ties broken uniformly at random.

    Draws one tie key per individual (exactly ``pop.size`` uniforms, always
    consumed) and sorts by fitness descending, tie key ascending. Among
    equal fitnesses at the cut boundary this selects a uniformly random
    subset. Returns an (n, mu) column array.
    """
    if not 1 <= mu <= pop.size:
        raise ValueError(f"mu must satisfy 1 <= mu <= {pop.size}, got {mu}")
    tie_keys = rng.random(pop.size)
    order = np.lexsort((tie_keys, -pop.fitnesses))
    return pop.individuals[:, order[:mu]]


def _sample_scored(state: EdaState, f: FitnessFunction) -> ScoredPopulation:
    count = state.params.samples_per_iteration
    pop = sample_population(state.model, count, state.rng)
    return ScoredPopulation(pop, f.batch(pop))


def _relative_frequencies(selected: np.ndarray, r: int) -> np.ndarray:
    n, mu = selected.shape
    offsets = np.arange(n, dtype=np.int64)[:, None] * r
    flat = (selected.astype(np.int64) + offsets).ravel()
    counts = np.bincount(flat, minlength=n * r).reshape(n, r)
    return counts / mu


def _advance(state: EdaState, rows: np.ndarray) -> EdaState:
    model = FrequencyMatrix(rows, state.model.borders)
    return replace(
        state,
        model=model,
        iteration=state.iteration + 1,
        evaluations=state.evaluations + state.params.samples_per_iteration,
    )


def _umda_update(state: EdaState, pop: ScoredPopulation) -> EdaState:
    selected = select_top_mu(pop, state.params.mu, state.rng)
    freq = _relative_frequencies(selected, state.model.r)
    return _advance(state, restrict_matrix(freq, state.model.borders))


def _pbil_update(state: EdaState, pop: ScoredPopulation) -> EdaState:
    selected = select_top_mu(pop, state.params.mu, state.rng)
    freq = _relative_frequencies(selected, state.model.r)
    rho = state.params.rho
    blended = (1.0 - rho) * state.model.rows + rho * freq
    return _advance(state, restrict_matrix(blended, state.model.borders))


def _cga_update(state: EdaState, pop: ScoredPopulation) -> EdaState:
    coin = state.rng.random()  # consumed unconditionally
    f0, f1 = pop.fitnesses
    if f0 > f1:
        win, lose = 0, 1
    elif f1 > f0:
        win, lose = 1, 0
    else:
        win, lose = (0, 1) if coin < 0.5 else (1, 0)
    winner = pop.individuals[:, win].astype(np.int64)
    loser = pop.individuals[:, lose].astype(np.int64)
    freq = state.model.rows.copy()
    step = 1.0 / state.params.K
    moved = np.flatnonzero(winner != loser)  # agreeing positions stay bit-identical
    freq[moved, winner[moved]] += step
    freq[moved, loser[moved]] -= step
    return _advance(state, restrict_matrix(freq, state.model.borders))


_UPDATES = {"umda": _umda_update, "pbil": _pbil_update, "cga": _cga_update}


def _step_scored(state: EdaState, f: FitnessFunction) -> tuple[EdaState, ScoredPopulation]:
    pop = _sample_scored(state, f)
    return _UPDATES[state.params.algorithm](state, pop), pop


def _checked_step(state: EdaState, f: FitnessFunction, algorithm: str) -> EdaState:
    if state.params.algorithm != algorithm:
        raise ValueError(f"state is configured for {state.params.algorithm!r}, not {algorithm!r}")
    return _step_scored(state, f)[0]


def umda_step(state: EdaState, f: FitnessFunction) -> EdaState:
    """One r-UMDA iteration: sample lambda, keep mu best, re-estimate rows."""
    return _checked_step(state, f, "umda")


def pbil_step(state: EdaState, f: FitnessFunction) -> EdaState:
    """One r-PBIL iteration: blend current rows with the selection frequencies."""
    return _checked_step(state, f, "pbil")


def cga_step(state: EdaState, f: FitnessFunction) -> EdaState:
    """One r-cGA iteration: two samples, winner shifts rows by 1/K."""
    return _checked_step(state, f, "cga")


@dataclass(frozen=True)
class StopRule:
    """When to end a run. At least one condition must be set.

    ``max_evaluations`` stops before a step that would exceed the budget.
    ``optimum_fitness`` stops after the first step that samples an
    individual with at least this fitness. ``on_convergence`` stops once
    every position's value-0 frequency sits at the upper border.
    """

    max_iterations: Optional[int] = None
    max_evaluations: Optional[int] = None
    optimum_fitness: Optional[float] = None
    on_convergence: bool = False

    def __post_init__(self) -> None:
        if (
            self.max_iterations is None
            and self.max_evaluations is None
            and self.optimum_fitness is None
            and not self.on_convergence
        ):
            raise ValueError("a stop rule needs at least one condition")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ValueError(f"max_iterations must be >= 0, got {self.max_iterations}")
        if self.max_evaluations is not None and self.max_evaluations < 0:
            raise ValueError(f"max_evaluations must be >= 0, got {self.max_evaluations}")


@dataclass(frozen=True)
class Instrumentation:
    """What a run records.

    ``watched`` holds (position, value) pairs, positions 1-based and
    values 0-based; their frequencies are logged every ``cadence``
    iterations (iteration 0 always included). ``hit_fitness`` tracks the
    first iteration whose population reaches that fitness, independently
    of any stop rule.
    """

    watched: tuple[tuple[int, int], ...] = ()
    cadence: int = 1
    track_critical: bool = False
    track_selection_relevant: bool = False
    track_zero_frequencies: bool = False
    hit_fitness: Optional[float] = None

    def __post_init__(self) -> None:
        if self.cadence < 1:
            raise ValueError(f"cadence must be at least 1, got {self.cadence}")
        for pair in self.watched:
            if len(pair) != 2:
                raise ValueError(f"watched entries are (position, value) pairs, got {pair!r}")


@dataclass
class TrialRecord:
    """Everything one run produced.

    ``watched_series`` maps each watched (position, value) pair to the
    frequency at the logged iterations in ``watched_iterations``. The
    critical trace covers every model state (length iterations+1); the
    selection-relevant trace covers every sampled population (length
    iterations). ``first_hit_evaluations`` counts fitness calls up to and
    including the first individual at ``hit_fitness``.
    """

    iterations: int
    evaluations: int
    stop_reason: str
    flagged_nonterminating: bool
    watched_iterations: np.ndarray
    watched_series: dict[tuple[int, int], np.ndarray]
    first_hit_iteration: Optional[int]
    first_hit_evaluations: Optional[int]
    convergence_iteration: Optional[int]
    critical_trace: Optional[np.ndarray]
    selection_relevant_trace: Optional[np.ndarray]
    zero_frequency_trace: Optional[np.ndarray]
    final_model: FrequencyMatrix


def _is_converged(model: FrequencyMatrix) -> bool:
    return bool(np.all(model.rows[:, 0] >= model.borders.upper - BORDER_TOL))


def _critical_from_rows(rows: np.ndarray, upper: float) -> int:
    below = np.flatnonzero(rows[:, 0] < upper - BORDER_TOL)
    return int(below[0]) + 1 if below.size else rows.shape[0] + 1


def _selection_relevant_from_fitnesses(fitnesses: np.ndarray, mu: int, n: int) -> int:
    kth_best = np.partition(fitnesses, fitnesses.size - mu)[fitnesses.size - mu]
    return min(n, int(kth_best) + 1)


def run(
    state: EdaState,
    f: FitnessFunction,
    stop: StopRule,
    instrument: Instrumentation = Instrumentation(),
) -> TrialRecord:
    """Iterate the configured algorithm until the stop rule fires.

    The passed state is consumed: its generator advances and the returned
    record's ``final_model`` is the last model. Runs are deterministic
    given the state's generator. A run is flagged as non-terminating when
    an optimum or convergence stop was requested but only a budget fired.
    """
    if instrument.track_selection_relevant and state.params.algorithm == "cga":
        raise ValueError("selection-relevant positions need mu, which cga does not have")
    for position, value in instrument.watched:
        if not 1 <= position <= state.model.n:
            raise ValueError(f"watched position {position} outside [1..{state.model.n}]")
        if not 0 <= value < state.model.r:
            raise ValueError(f"watched value {value} outside [0..{state.model.r - 1}]")

    watched_iters: list[int] = []
    watched_vals: dict[tuple[int, int], list[float]] = {p: [] for p in instrument.watched}
    critical: list[int] = []
    selrel: list[int] = []
    zero_freqs: list[np.ndarray] = []
    first_hit_iter: Optional[int] = None
    first_hit_evals: Optional[int] = None
    convergence_iter: Optional[int] = None

    def log_model(t: int, model: FrequencyMatrix) -> None:
        nonlocal convergence_iter
        if instrument.watched and t % instrument.cadence == 0:
            watched_iters.append(t)
            for position, value in instrument.watched:
                watched_vals[(position, value)].append(float(model.rows[position - 1, value]))
        if instrument.track_critical:
            critical.append(_critical_from_rows(model.rows, model.borders.upper))
        if instrument.track_zero_frequencies:
            zero_freqs.append(model.rows[:, 0].copy())
        if convergence_iter is None and _is_converged(model):
            convergence_iter = t

    log_model(0, state.model)
    per_step = state.params.samples_per_iteration
    stop_reason = None
    while True:
        if stop.max_iterations is not None and state.iteration >= stop.max_iterations:
            stop_reason = "iteration_budget"
            break
        if (
            stop.max_evaluations is not None
            and state.evaluations + per_step > stop.max_evaluations
        ):
            stop_reason = "evaluation_budget"
            break
        if stop.on_convergence and _is_converged(state.model):
            stop_reason = "converged"
            break

        evals_before = state.evaluations
        t = state.iteration
        state, pop = _step_scored(state, f)

        if instrument.track_selection_relevant:
            selrel.append(
                _selection_relevant_from_fitnesses(pop.fitnesses, state.params.mu, state.model.n)
            )
        if instrument.hit_fitness is not None and first_hit_iter is None:
            hits = pop.fitnesses >= instrument.hit_fitness
            if hits.any():
                first_hit_iter = t
                first_hit_evals = evals_before + int(np.argmax(hits)) + 1
        log_model(state.iteration, state.model)
        if stop.optimum_fitness is not None and np.any(pop.fitnesses >= stop.optimum_fitness):
            stop_reason = "optimum"
            break

    flagged = (
        (stop.optimum_fitness is not None or stop.on_convergence)
        and stop_reason in ("iteration_budget", "evaluation_budget")
    )
    return TrialRecord(
        iterations=state.iteration,
        evaluations=state.evaluations,
        stop_reason=stop_reason,
        flagged_nonterminating=flagged,
        watched_iterations=np.asarray(watched_iters, dtype=np.int64),
        watched_series={k: np.asarray(v) for k, v in watched_vals.items()},
        first_hit_iteration=first_hit_iter,
        first_hit_evaluations=first_hit_evals,
        convergence_iteration=convergence_iter,
        critical_trace=np.asarray(critical, dtype=np.int64) if instrument.track_critical else None,
        selection_relevant_trace=(
            np.asarray(selrel, dtype=np.int64) if instrument.track_selection_relevant else None
        ),
        zero_frequency_trace=np.vstack(zero_freqs) if zero_freqs else None,
        final_model=state.model,
    )
