"""Benchmark fitness functions over r-valued strings.

Three functions are provided:

* ``r_leading_ones``: length of the all-0 prefix; optimum is the all-0
  string with fitness n. Substituting a 0 anywhere never lowers fitness.
* ``neutral_constant``: identically 0, so every position is neutral.
* ``first_zero_bonus``: 1 if the first position holds a 0, else 0. The
  smallest function that strictly rewards one value at one position while
  keeping every other position neutral.

Each has a scalar form (one individual) and a batch form used by the
algorithms, wrapped together in :class:`FitnessFunction`.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .model import check_individual


@dataclass(frozen=True)
class FitnessFunction:
    """A deterministic fitness over length-n strings with r values each.

    ``batch`` maps an (n, count) population array to a (count,) float
    array. Calling the object evaluates a single individual.
    """

    name: str
    n: int
    r: int
    optimum_fitness: Optional[float]
    batch: Callable[[np.ndarray], np.ndarray]

    def __call__(self, values: np.ndarray) -> float:
        arr = np.asarray(values)
        check_individual(arr, self.n, self.r)
        return float(self.batch(arr[:, None])[0])


def r_leading_ones(values: np.ndarray) -> int:
    """Number of consecutive 0s at the start of ``values``."""
    arr = np.asarray(values)
    nonzero = np.flatnonzero(arr)
    return int(nonzero[0]) if nonzero.size else int(arr.size)


def neutral_constant(values: np.ndarray) -> float:
    """Constant fitness; every position is neutral."""
    return 0.0


def first_zero_bonus(values: np.ndarray) -> float:
    """1 if the first position holds value 0, else 0."""
    arr = np.asarray(values)
    return 1.0 if arr[0] == 0 else 0.0


def _leading_zeros_batch(pop: np.ndarray) -> np.ndarray:
    prefix = np.logical_and.accumulate(pop == 0, axis=0)
    return prefix.sum(axis=0, dtype=np.int64).astype(np.float64)


def _neutral_batch(pop: np.ndarray) -> np.ndarray:
    return np.zeros(pop.shape[1], dtype=np.float64)


def _first_zero_batch(pop: np.ndarray) -> np.ndarray:
    return (pop[0] == 0).astype(np.float64)


def _make_leading(n: int, r: int) -> FitnessFunction:
    return FitnessFunction("r_leading_ones", n, r, float(n), _leading_zeros_batch)


def _make_neutral(n: int, r: int) -> FitnessFunction:
    return FitnessFunction("neutral_constant", n, r, 0.0, _neutral_batch)


def _make_first_zero(n: int, r: int) -> FitnessFunction:
    return FitnessFunction("first_zero_bonus", n, r, 1.0, _first_zero_batch)


_FACTORIES: dict[str, Callable[[int, int], FitnessFunction]] = {
    "r_leading_ones": _make_leading,
    "neutral_constant": _make_neutral,
    "first_zero_bonus": _make_first_zero,
}

BENCHMARK_NAMES = tuple(sorted(_FACTORIES))


def make_benchmark(name: str, n: int, r: int) -> FitnessFunction:
    """Look up a benchmark by name, as used in experiment configs."""
    if name not in _FACTORIES:
        hint = difflib.get_close_matches(name, BENCHMARK_NAMES, n=1)
        suffix = f", did you mean {hint[0]!r}?" if hint else ""
        raise ValueError(
            f"unknown benchmark {name!r} (known: {', '.join(BENCHMARK_NAMES)}){suffix}"
        )
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if r < 2:
        raise ValueError(f"r must be at least 2, got {r}")
    return _FACTORIES[name](n, r)
