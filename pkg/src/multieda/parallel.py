"""Deterministic parallel execution of independent trials.

Trial i always draws from the generator seeded by (master_seed, i), no
matter which process runs it or in which order trials finish, so results
are identical for any worker count. Aggregation is by trial index.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Mapping, Optional, TypeVar

import numpy as np

WORKERS_ENV_VAR = "MULTIEDA_WORKERS"

T = TypeVar("T")


def trial_rng(master_seed: int, index: int) -> np.random.Generator:
    """The independent stream for one trial: PCG64 seeded by the pair."""
    if master_seed < 0:
        raise ValueError(f"master_seed must be nonnegative, got {master_seed}")
    if index < 0:
        raise ValueError(f"trial index must be nonnegative, got {index}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([master_seed, index])))


def trial_seed_key(master_seed: int, index: int) -> str:
    """Human-readable identifier of a trial's stream, used in outputs."""
    return f"{master_seed}:{index}"


def resolve_workers(requested: Optional[int], env: Optional[Mapping[str, str]] = None) -> int:
    """Worker count with the environment override applied.

    Precedence: WORKERS_ENV_VAR if set, else ``requested``, else 1.
    """
    mapping = os.environ if env is None else env
    raw = mapping.get(WORKERS_ENV_VAR)
    if raw is not None:
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"{WORKERS_ENV_VAR} must be an integer, got {raw!r}") from None
        if value < 1:
            raise ValueError(f"{WORKERS_ENV_VAR} must be >= 1, got {value}")
        return value
    if requested is None:
        return 1
    if requested < 1:
        raise ValueError(f"workers must be >= 1, got {requested}")
    return requested


def run_trials(fn: Callable[[int], T], n_trials: int, workers: int = 1) -> list[T]:
    """Evaluate ``fn(0..n_trials-1)``, results ordered by trial index.

    ``fn`` must be picklable (a module-level function or functools.partial
    of one) when workers > 1. With one worker everything runs in-process.
    """
    if n_trials < 0:
        raise ValueError(f"n_trials must be nonnegative, got {n_trials}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if workers == 1 or n_trials <= 1:
        return [fn(i) for i in range(n_trials)]
    chunksize = max(1, n_trials // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_trials), chunksize=chunksize))
