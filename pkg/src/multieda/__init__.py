"""Univariate estimation-of-distribution algorithms for r-valued strings.

Three model-based optimizers (UMDA, PBIL, and a compact GA) share one
n-by-r frequency-matrix model with configurable border clamping, plus two
experiment labs: one measuring genetic drift of the model frequencies
against a closed-form bound, one measuring convergence of UMDA on the
leading-zeros benchmark against parameter-formula predictions.
"""

from .algorithms import (
    ALGORITHMS,
    EdaParams,
    EdaState,
    Instrumentation,
    ScoredPopulation,
    StopRule,
    TrialRecord,
    cga_step,
    initial_state,
    pbil_step,
    run,
    select_top_mu,
    umda_step,
)
from .benchmarks import BENCHMARK_NAMES, FitnessFunction, make_benchmark
from .drift import (
    DominanceReport,
    DriftConfig,
    ExitStats,
    MartingaleReport,
    PairExitStats,
    TrajectorySet,
    clopper_pearson,
    collect_trajectories,
    dominance_check,
    drift_bound,
    exit_time_experiment,
    martingale_report,
)
from .model import (
    Borders,
    FrequencyMatrix,
    check_individual,
    default_borders,
    new_uniform,
    no_margins,
    restrict_matrix,
    restrict_row,
    sample_individual,
    sample_population,
)
from .parallel import WORKERS_ENV_VAR, resolve_workers, run_trials, trial_rng, trial_seed_key
from .runtime import (
    ConvergenceParams,
    LowerBoundQuantities,
    RuntimeConfig,
    RuntimeRecord,
    convergence_params,
    critical_position,
    lower_bound_quantities,
    max_selection_relevant_position,
    runtime_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "BENCHMARK_NAMES",
    "Borders",
    "ConvergenceParams",
    "DominanceReport",
    "DriftConfig",
    "EdaParams",
    "EdaState",
    "ExitStats",
    "FitnessFunction",
    "FrequencyMatrix",
    "Instrumentation",
    "LowerBoundQuantities",
    "MartingaleReport",
    "PairExitStats",
    "RuntimeConfig",
    "RuntimeRecord",
    "ScoredPopulation",
    "StopRule",
    "TrajectorySet",
    "TrialRecord",
    "WORKERS_ENV_VAR",
    "cga_step",
    "check_individual",
    "clopper_pearson",
    "collect_trajectories",
    "convergence_params",
    "critical_position",
    "default_borders",
    "dominance_check",
    "drift_bound",
    "exit_time_experiment",
    "initial_state",
    "lower_bound_quantities",
    "make_benchmark",
    "martingale_report",
    "max_selection_relevant_position",
    "new_uniform",
    "no_margins",
    "pbil_step",
    "resolve_workers",
    "restrict_matrix",
    "restrict_row",
    "run",
    "run_trials",
    "runtime_experiment",
    "sample_individual",
    "sample_population",
    "select_top_mu",
    "trial_rng",
    "trial_seed_key",
    "umda_step",
    "__version__",
]
