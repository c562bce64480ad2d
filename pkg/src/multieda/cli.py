"""Configuration-driven front door for the experiment labs.

Subcommands: ``drift``, ``runtime``, ``dominance``, ``martingale``,
``bound``. Each reads a JSON config, runs seeded trials (parallel where
it helps), and writes four artifacts into the output directory: a CSV
table, a JSON detail file, a rendered PNG, and ``manifest.json``.

Config validation reports every problem at once, not just the first,
and unknown keys are errors with a closest-match suggestion. A master
seed is always required; there is no wall-clock default, so two runs of
the same config are identical byte for byte (CSV and JSON; the manifest
records wall time and is exempt).

An optional ``assert`` object turns a run into a pass/fail check: each
entry compares an empirical quantity against a limit, the outcomes land
in the manifest, and any failure makes the exit status 1. Exit statuses:
0 ok, 1 assertion failed, 2 invalid config, 3 I/O error.
"""

from __future__ import annotations

import argparse
import difflib
import json
import os
import sys
import time
from dataclasses import dataclass
from typing import Any, Callable, Optional

from . import figures, reports
from .algorithms import ALGORITHMS, EdaParams
from .benchmarks import BENCHMARK_NAMES
from .drift import (
    DriftConfig,
    EXIT_MODES,
    collect_trajectories,
    dominance_check,
    drift_bound,
    exit_time_experiment,
    martingale_report,
)
from .parallel import resolve_workers
from .runtime import RuntimeConfig, convergence_params, runtime_experiment

KINDS = ("drift", "runtime", "dominance", "martingale", "bound")

EXIT_OK = 0
EXIT_ASSERT_FAILED = 1
EXIT_SPEC_ERROR = 2
EXIT_IO_ERROR = 3

MAX_SEED = 2**64 - 1


class SpecError(ValueError):
    """Invalid experiment config; ``errors`` lists every problem found."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class ExperimentSpec:
    """A validated experiment configuration.

    One flat record covers all five kinds; fields that do not apply to
    ``kind`` keep their defaults. ``checks`` holds the optional assert
    block as (name, limit) pairs.
    """

    kind: str
    master_seed: int
    trials: int = 1
    workers: Optional[int] = None
    n: Optional[int] = None
    r: Optional[int] = None
    algorithm: str = "umda"
    lam: Optional[int] = None
    mu: Optional[int] = None
    rho: Optional[float] = None
    K: Optional[float] = None
    fitness: str = "neutral_constant"
    horizon: Optional[int] = None
    watched: tuple[tuple[int, int], ...] = ((1, 0),)
    margins: bool = True
    cadence: int = 1
    iteration: Optional[int] = None
    grid_points: int = 101
    sigmas: float = 3.0
    position: int = 1
    value: int = 0
    s: Optional[float] = None
    iteration_cap: Optional[int] = None
    stop_on_convergence: bool = True
    stop_on_optimum: bool = False
    track_zero_frequencies: bool = False
    checks: tuple[tuple[str, Any], ...] = ()


_COMMON_KEYS = ("kind", "master_seed", "trials", "workers", "assert")

_KIND_KEYS: dict[str, tuple[str, ...]] = {
    "drift": (
        "n", "r", "algorithm", "lambda", "mu", "rho", "K",
        "fitness", "horizon", "watched", "margins", "cadence",
    ),
    "runtime": (
        "n", "r", "lambda", "mu", "s", "iteration_cap",
        "stop_on_convergence", "stop_on_optimum", "track_zero_frequencies",
    ),
    "dominance": (
        "n", "r", "lambda", "mu", "iteration", "horizon",
        "grid_points", "sigmas", "margins",
    ),
    "martingale": (
        "n", "r", "algorithm", "lambda", "mu", "rho", "K",
        "fitness", "horizon", "position", "value", "cadence", "margins",
    ),
    "bound": ("mu", "horizon", "r"),
}

_KIND_CHECKS: dict[str, tuple[str, ...]] = {
    "drift": ("bound_slack_sigmas", "max_p_hat"),
    "runtime": (
        "min_converged_trials", "max_convergence_iteration",
        "max_hits_before", "max_flagged_trials",
    ),
    "dominance": ("no_violations",),
    "martingale": ("max_deviation_sigmas",),
    "bound": ("bound_between",),
}


class _ConfigReader:
    """Typed key extraction that appends problems instead of raising."""

    def __init__(self, data: dict[str, Any], errors: list[str]):
        self.data = data
        self.errors = errors

    def _get(self, key: str, kind: type, label: str, default: Any, required: bool) -> Any:
        if key not in self.data:
            if required:
                self.errors.append(f"missing required key '{key}'")
            return default
        value = self.data[key]
        # bool is an int subclass; never accept it for numeric keys
        if isinstance(value, bool) and kind is not bool:
            self.errors.append(f"'{key}' must be {label}, got {value!r}")
            return default
        if kind is float and isinstance(value, int):
            value = float(value)
        if not isinstance(value, kind):
            self.errors.append(f"'{key}' must be {label}, got {value!r}")
            return default
        return value

    def get_int(
        self,
        key: str,
        *,
        default: Optional[int] = None,
        required: bool = False,
        minimum: Optional[int] = None,
        maximum: Optional[int] = None,
    ) -> Optional[int]:
        value = self._get(key, int, "an integer", default, required)
        if value is None or key not in self.data:
            return value
        if minimum is not None and value < minimum:
            self.errors.append(f"'{key}' must be >= {minimum}, got {value}")
            return default
        if maximum is not None and value > maximum:
            self.errors.append(f"'{key}' must be <= {maximum}, got {value}")
            return default
        return value

    def get_float(
        self,
        key: str,
        *,
        default: Optional[float] = None,
        required: bool = False,
        minimum: Optional[float] = None,
        maximum: Optional[float] = None,
    ) -> Optional[float]:
        value = self._get(key, float, "a number", default, required)
        if value is None or key not in self.data:
            return value
        if minimum is not None and value < minimum:
            self.errors.append(f"'{key}' must be >= {minimum}, got {value}")
            return default
        if maximum is not None and value > maximum:
            self.errors.append(f"'{key}' must be <= {maximum}, got {value}")
            return default
        return value

    def get_bool(self, key: str, *, default: Optional[bool] = None) -> Optional[bool]:
        return self._get(key, bool, "a boolean", default, False)

    def get_str(
        self,
        key: str,
        *,
        default: Optional[str] = None,
        choices: Optional[tuple[str, ...]] = None,
    ) -> Optional[str]:
        value = self._get(key, str, "a string", default, False)
        if value is not None and choices is not None and value not in choices:
            suggestion = _suggest(value, choices)
            self.errors.append(f"'{key}' must be one of {', '.join(choices)}, got {value!r}{suggestion}")
            return default
        return value


def _suggest(word: str, candidates: tuple[str, ...]) -> str:
    close = difflib.get_close_matches(word, candidates, n=1, cutoff=0.6)
    return f" (did you mean '{close[0]}'?)" if close else ""


def _check_unknown_keys(data: dict[str, Any], kind: str, errors: list[str]) -> None:
    allowed = _COMMON_KEYS + _KIND_KEYS[kind]
    for key in data:
        if key not in allowed:
            errors.append(f"unknown key '{key}'{_suggest(key, allowed)}")


def _parse_watched(reader: _ConfigReader, n: Optional[int], r: Optional[int]) -> Optional[tuple]:
    raw = reader.data.get("watched")
    if raw is None:
        return None
    if not isinstance(raw, list) or not raw:
        reader.errors.append("'watched' must be a non-empty list of [position, value] pairs")
        return None
    pairs = []
    for entry in raw:
        if (
            not isinstance(entry, list)
            or len(entry) != 2
            or not all(isinstance(x, int) and not isinstance(x, bool) for x in entry)
        ):
            reader.errors.append(f"'watched' entries must be [position, value] integer pairs, got {entry!r}")
            return None
        position, value = entry
        if n is not None and not 1 <= position <= n:
            reader.errors.append(f"watched position {position} outside [1..{n}]")
        if r is not None and not 0 <= value <= r - 1:
            reader.errors.append(f"watched value {value} outside [0..{r - 1}]")
        pairs.append((position, value))
    return tuple(pairs)


def _parse_algorithm_params(
    reader: _ConfigReader, errors: list[str], allowed: tuple[str, ...]
) -> dict[str, Any]:
    algorithm = reader.get_str("algorithm", default="umda", choices=allowed)
    lam = reader.get_int("lambda", minimum=1)
    mu = reader.get_int("mu", minimum=1)
    rho = reader.get_float("rho", minimum=0.0, maximum=1.0)
    big_k = reader.get_float("K")
    if big_k is not None and big_k <= 0.0:
        errors.append(f"'K' must be positive, got {big_k}")
        big_k = None
    if algorithm in ("umda", "pbil"):
        if "lambda" not in reader.data:
            errors.append(f"algorithm '{algorithm}' requires 'lambda'")
        if "mu" not in reader.data:
            errors.append(f"algorithm '{algorithm}' requires 'mu'")
        if lam is not None and mu is not None and mu > lam:
            errors.append(f"constraint mu <= lambda violated: mu={mu}, lambda={lam}")
        if big_k is not None:
            errors.append("'K' applies to algorithm 'cga' only")
        if algorithm == "umda" and rho is not None:
            errors.append("'rho' applies to algorithm 'pbil' only")
        if algorithm == "pbil" and "rho" not in reader.data:
            errors.append("algorithm 'pbil' requires 'rho'")
    elif algorithm == "cga":
        if "K" not in reader.data:
            errors.append("algorithm 'cga' requires 'K'")
        for key in ("lambda", "mu", "rho"):
            if key in reader.data:
                errors.append(f"'{key}' does not apply to algorithm 'cga'")
        lam = mu = rho = None
    return {"algorithm": algorithm, "lam": lam, "mu": mu, "rho": rho, "K": big_k}


def _parse_checks(data: dict[str, Any], kind: str, errors: list[str]) -> tuple:
    raw = data.get("assert")
    if raw is None:
        return ()
    if not isinstance(raw, dict):
        errors.append("'assert' must be an object of named checks")
        return ()
    known = _KIND_CHECKS[kind]
    checks = []
    for name, value in raw.items():
        if name not in known:
            errors.append(f"unknown assert check '{name}'{_suggest(name, known)}")
            continue
        if name in ("bound_slack_sigmas", "max_deviation_sigmas"):
            if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
                errors.append(f"assert '{name}' needs a positive number, got {value!r}")
                continue
            value = float(value)
        elif name == "max_p_hat":
            if not isinstance(value, (int, float)) or isinstance(value, bool) or not 0 <= value <= 1:
                errors.append(f"assert '{name}' needs a number in [0, 1], got {value!r}")
                continue
            value = float(value)
        elif name in ("min_converged_trials", "max_convergence_iteration", "max_flagged_trials"):
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                errors.append(f"assert '{name}' needs a nonnegative integer, got {value!r}")
                continue
        elif name == "max_hits_before":
            ok = (
                isinstance(value, list)
                and len(value) == 2
                and all(isinstance(x, int) and not isinstance(x, bool) and x >= 0 for x in value)
            )
            if not ok:
                errors.append(
                    f"assert '{name}' needs [max_count, iteration] nonnegative integers, got {value!r}"
                )
                continue
            value = tuple(value)
        elif name == "no_violations":
            if value is not True:
                errors.append(f"assert '{name}' must be true, got {value!r}")
                continue
        elif name == "bound_between":
            ok = (
                isinstance(value, list)
                and len(value) == 2
                and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value)
                and value[0] <= value[1]
            )
            if not ok:
                errors.append(f"assert '{name}' needs [low, high] with low <= high, got {value!r}")
                continue
            value = (float(value[0]), float(value[1]))
        checks.append((name, value))
    return tuple(checks)


def parse_spec(
    text: str,
    kind: Optional[str] = None,
    *,
    seed_override: Optional[int] = None,
) -> ExperimentSpec:
    """Validate a JSON config document into an :class:`ExperimentSpec`.

    Collects every validation problem and raises one :class:`SpecError`
    listing them all. ``kind`` (from the subcommand) must agree with the
    config's own "kind" when both are present; ``seed_override`` (from
    --seed) takes precedence over the config's master_seed.
    """
    errors: list[str] = []
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError([f"config is not valid JSON: {exc}"]) from None
    if not isinstance(data, dict):
        raise SpecError(["config must be a JSON object"])

    config_kind = data.get("kind")
    if config_kind is not None and not isinstance(config_kind, str):
        raise SpecError([f"'kind' must be a string, got {config_kind!r}"])
    if config_kind is not None and config_kind not in KINDS:
        raise SpecError([f"unknown kind '{config_kind}'{_suggest(config_kind, KINDS)}"])
    if kind is not None and config_kind is not None and kind != config_kind:
        raise SpecError([f"config kind '{config_kind}' does not match requested kind '{kind}'"])
    resolved_kind = kind or config_kind
    if resolved_kind is None:
        raise SpecError(["no kind given: pass a subcommand or put 'kind' in the config"])

    _check_unknown_keys(data, resolved_kind, errors)
    reader = _ConfigReader(data, errors)

    if seed_override is not None:
        if not 0 <= seed_override <= MAX_SEED:
            errors.append(f"--seed must be in [0, 2^64-1], got {seed_override}")
        master_seed = seed_override
        reader.get_int("master_seed", minimum=0, maximum=MAX_SEED)  # still type-check it
    else:
        master_seed = reader.get_int("master_seed", minimum=0, maximum=MAX_SEED)
        if master_seed is None and "master_seed" not in data:
            errors.append("a master seed is required: set 'master_seed' or pass --seed")
    trials = reader.get_int("trials", default=1, minimum=1)
    workers = reader.get_int("workers", minimum=1)
    checks = _parse_checks(data, resolved_kind, errors)

    fields: dict[str, Any] = {
        "kind": resolved_kind,
        "master_seed": master_seed if master_seed is not None else 0,
        "trials": trials if trials is not None else 1,
        "workers": workers,
        "checks": checks,
    }

    if resolved_kind == "bound":
        fields["mu"] = reader.get_int("mu", required=True, minimum=0)
        fields["horizon"] = reader.get_int("horizon", required=True, minimum=0)
        fields["r"] = reader.get_int("r", required=True, minimum=2)
    else:
        n = reader.get_int("n", required=True, minimum=2)
        r = reader.get_int("r", required=True, minimum=2)
        fields["n"], fields["r"] = n, r

        if resolved_kind == "drift":
            fields.update(_parse_algorithm_params(reader, errors, ("umda", "pbil")))
            fitness = reader.get_str(
                "fitness", default="neutral_constant", choices=tuple(sorted(EXIT_MODES))
            )
            fields["fitness"] = fitness
            fields["horizon"] = reader.get_int("horizon", required=True, minimum=0)
            watched = _parse_watched(reader, n, r)
            if watched is not None:
                fields["watched"] = watched
            if fitness == "first_zero_bonus":
                for position, value in fields.get("watched", ((1, 0),)):
                    if value != 0:
                        errors.append(
                            f"fitness 'first_zero_bonus' tracks one-sided exits at value 0; "
                            f"cannot watch value {value}"
                        )
            fields["margins"] = reader.get_bool("margins", default=True)
            fields["cadence"] = reader.get_int("cadence", default=1, minimum=1)

        elif resolved_kind == "runtime":
            lam = reader.get_int("lambda", minimum=1)
            mu = reader.get_int("mu", minimum=1)
            s = reader.get_float("s")
            if s is not None and s < 1.0:
                errors.append(f"'s' must be >= 1, got {s}")
                s = None
            explicit = "lambda" in data or "mu" in data
            if s is not None and explicit:
                errors.append("give either 's' (derive lambda and mu) or explicit 'lambda'/'mu', not both")
            elif s is None and not explicit:
                errors.append("runtime needs either 's' or explicit 'lambda' and 'mu'")
            elif s is None:
                if lam is None and "lambda" not in data:
                    errors.append("'mu' without 'lambda': both are required")
                if mu is None and "mu" not in data:
                    errors.append("'lambda' without 'mu': both are required")
                if lam is not None and mu is not None and mu > lam:
                    errors.append(f"constraint mu <= lambda violated: mu={mu}, lambda={lam}")
                if "iteration_cap" not in data:
                    errors.append("explicit 'lambda'/'mu' runs need 'iteration_cap'")
            if s is not None and n is not None and r is not None and n < 4 * r:
                errors.append(f"deriving sizes from 's' needs n >= 4r, got n={n}, r={r}")
            fields["lam"], fields["mu"], fields["s"] = lam, mu, s
            fields["iteration_cap"] = reader.get_int("iteration_cap", minimum=0)
            fields["stop_on_convergence"] = reader.get_bool("stop_on_convergence", default=True)
            fields["stop_on_optimum"] = reader.get_bool("stop_on_optimum", default=False)
            fields["track_zero_frequencies"] = reader.get_bool("track_zero_frequencies", default=False)

        elif resolved_kind == "dominance":
            fields.update(_parse_algorithm_params(reader, errors, ("umda",)))
            iteration = reader.get_int("iteration", required=True, minimum=0)
            fields["iteration"] = iteration
            horizon = reader.get_int("horizon", minimum=0)
            if horizon is None:
                horizon = iteration
            elif iteration is not None and horizon < iteration:
                errors.append(f"'horizon' must cover 'iteration': {horizon} < {iteration}")
            fields["horizon"] = horizon
            fields["grid_points"] = reader.get_int("grid_points", default=101, minimum=2)
            fields["sigmas"] = reader.get_float("sigmas", default=3.0)
            if fields["sigmas"] is not None and fields["sigmas"] <= 0:
                errors.append(f"'sigmas' must be positive, got {fields['sigmas']}")
            fields["margins"] = reader.get_bool("margins", default=False)

        elif resolved_kind == "martingale":
            fields.update(_parse_algorithm_params(reader, errors, ALGORITHMS))
            fields["horizon"] = reader.get_int("horizon", required=True, minimum=0)
            position = reader.get_int("position", default=1, minimum=1)
            value = reader.get_int("value", default=0, minimum=0)
            if position is not None and n is not None and position > n:
                errors.append(f"'position' must be in [1..{n}], got {position}")
            if value is not None and r is not None and value > r - 1:
                errors.append(f"'value' must be in [0..{r - 1}], got {value}")
            fields["position"], fields["value"] = position, value
            fields["cadence"] = reader.get_int("cadence", default=1, minimum=1)
            fitness = reader.get_str(
                "fitness", default="neutral_constant", choices=tuple(sorted(BENCHMARK_NAMES))
            )
            fields["fitness"] = fitness
            margins = reader.get_bool("margins", default=False)
            if margins:
                errors.append("martingale runs require 'margins' false (the mean argument needs the raw update)")
            fields["margins"] = False
            if fitness == "first_zero_bonus" and position is not None and position < 2:
                errors.append("'first_zero_bonus' is only neutral at positions >= 2")
            elif fitness == "r_leading_ones":
                errors.append("'r_leading_ones' is not neutral at any position")

    if errors:
        raise SpecError(errors)
    return ExperimentSpec(**{k: v for k, v in fields.items() if v is not None or k in ("workers",)})


def spec_to_config(spec: ExperimentSpec) -> dict[str, Any]:
    """The config document (JSON-ready dict) that reproduces this spec."""
    out: dict[str, Any] = {"kind": spec.kind, "master_seed": spec.master_seed}
    if spec.kind != "bound":
        out["trials"] = spec.trials
        out["n"] = spec.n
    out["r"] = spec.r
    if spec.workers is not None:
        out["workers"] = spec.workers

    def put_algorithm() -> None:
        out["algorithm"] = spec.algorithm
        if spec.lam is not None:
            out["lambda"] = spec.lam
        if spec.mu is not None:
            out["mu"] = spec.mu
        if spec.rho is not None:
            out["rho"] = spec.rho
        if spec.K is not None:
            out["K"] = spec.K

    if spec.kind == "drift":
        put_algorithm()
        out.update(
            fitness=spec.fitness,
            horizon=spec.horizon,
            watched=[list(pair) for pair in spec.watched],
            margins=spec.margins,
            cadence=spec.cadence,
        )
    elif spec.kind == "runtime":
        if spec.s is not None:
            out["s"] = spec.s
        else:
            out["lambda"], out["mu"] = spec.lam, spec.mu
        if spec.iteration_cap is not None:
            out["iteration_cap"] = spec.iteration_cap
        out.update(
            stop_on_convergence=spec.stop_on_convergence,
            stop_on_optimum=spec.stop_on_optimum,
            track_zero_frequencies=spec.track_zero_frequencies,
        )
    elif spec.kind == "dominance":
        # dominance configs take no 'algorithm' key (always umda)
        out["lambda"], out["mu"] = spec.lam, spec.mu
        out.update(
            iteration=spec.iteration,
            horizon=spec.horizon,
            grid_points=spec.grid_points,
            sigmas=spec.sigmas,
            margins=spec.margins,
        )
    elif spec.kind == "martingale":
        put_algorithm()
        out.update(
            fitness=spec.fitness,
            horizon=spec.horizon,
            position=spec.position,
            value=spec.value,
            cadence=spec.cadence,
            margins=spec.margins,
        )
    else:
        out["mu"] = spec.mu
        out["horizon"] = spec.horizon
    if spec.checks:
        out["assert"] = {name: list(v) if isinstance(v, tuple) else v for name, v in spec.checks}
    return out


def _eda_params(spec: ExperimentSpec) -> EdaParams:
    return EdaParams(algorithm=spec.algorithm, lam=spec.lam, mu=spec.mu, rho=spec.rho, K=spec.K)


def _assertion(name: str, passed: bool, observed: Any, limit: Any) -> dict[str, Any]:
    return {"name": name, "passed": bool(passed), "observed": observed, "limit": limit}


def _run_drift(spec: ExperimentSpec, workers: int, out_dir: str, render: bool):
    config = DriftConfig(
        params=_eda_params(spec),
        n=spec.n,
        r=spec.r,
        fitness=spec.fitness,
        horizon=spec.horizon,
        watched=spec.watched,
        trials=spec.trials,
        master_seed=spec.master_seed,
        margins=spec.margins,
        cadence=spec.cadence,
    )
    stats = exit_time_experiment(config, workers)
    outputs = _emit(
        out_dir, "drift", render,
        csv=lambda path: reports.write_drift_csv(path, stats),
        payload=stats,
        figure=lambda path: figures.drift_figure(path, stats),
    )
    results = []
    for name, limit in spec.checks:
        if name == "bound_slack_sigmas":
            bound = stats.pairs[0].bound if stats.pairs else 0.0
            cap = bound + limit * (bound / spec.trials) ** 0.5
            worst = max((p.p_hat for p in stats.pairs), default=0.0)
            results.append(_assertion(name, worst <= cap, worst, cap))
        elif name == "max_p_hat":
            worst = max((p.p_hat for p in stats.pairs), default=0.0)
            results.append(_assertion(name, worst <= limit, worst, limit))
    return outputs, results


def _run_runtime(spec: ExperimentSpec, workers: int, out_dir: str, render: bool):
    if spec.s is not None:
        derived = convergence_params(spec.n, spec.r, spec.s)
        lam, mu = derived.lambda_min, derived.mu_min
        cap = spec.iteration_cap if spec.iteration_cap is not None else derived.experiment_cap
    else:
        derived = None
        lam, mu, cap = spec.lam, spec.mu, spec.iteration_cap
    config = RuntimeConfig(
        n=spec.n,
        r=spec.r,
        lam=lam,
        mu=mu,
        iteration_cap=cap,
        trials=spec.trials,
        master_seed=spec.master_seed,
        stop_on_convergence=spec.stop_on_convergence,
        stop_on_optimum=spec.stop_on_optimum,
        track_zero_frequencies=spec.track_zero_frequencies,
    )
    records = runtime_experiment(config, workers)
    payload = {"config": config, "derived_params": derived, "records": records}
    outputs = _emit(
        out_dir, "runtime", render,
        csv=lambda path: reports.write_runtime_csv(path, records),
        payload=payload,
        figure=lambda path: figures.runtime_figure(path, records),
    )
    converged = [rec.record.convergence_iteration for rec in records
                 if rec.record.convergence_iteration is not None]
    results = []
    for name, limit in spec.checks:
        if name == "min_converged_trials":
            results.append(_assertion(name, len(converged) >= limit, len(converged), limit))
        elif name == "max_convergence_iteration":
            worst = max(converged, default=None)
            results.append(_assertion(name, worst is None or worst <= limit, worst, limit))
        elif name == "max_hits_before":
            max_count, before = limit
            hits = sum(
                1 for rec in records
                if rec.record.first_hit_iteration is not None
                and rec.record.first_hit_iteration < before
            )
            results.append(_assertion(name, hits <= max_count, hits, list(limit)))
        elif name == "max_flagged_trials":
            flagged = sum(rec.record.flagged_nonterminating for rec in records)
            results.append(_assertion(name, flagged <= limit, flagged, limit))
    return outputs, results


def _run_dominance(spec: ExperimentSpec, workers: int, out_dir: str, render: bool):
    arms = {}
    # independent arms: the weak-preference run offsets the master seed by 1
    for fitness, seed in (
        ("neutral_constant", spec.master_seed),
        ("first_zero_bonus", spec.master_seed + 1),
    ):
        config = DriftConfig(
            params=_eda_params(spec),
            n=spec.n,
            r=spec.r,
            fitness=fitness,
            horizon=spec.horizon,
            watched=((1, 0),),
            trials=spec.trials,
            master_seed=seed,
            margins=spec.margins,
            cadence=1,
        )
        arms[fitness] = collect_trajectories(config, workers)
    report = dominance_check(
        arms["neutral_constant"],
        arms["first_zero_bonus"],
        spec.iteration,
        grid_points=spec.grid_points,
        sigmas=spec.sigmas,
    )
    payload = {
        "neutral_config": arms["neutral_constant"].config,
        "weak_preference_config": arms["first_zero_bonus"].config,
        "report": report,
    }
    outputs = _emit(
        out_dir, "dominance", render,
        csv=lambda path: reports.write_dominance_csv(path, report),
        payload=payload,
        figure=lambda path: figures.dominance_figure(path, report),
    )
    results = []
    for name, limit in spec.checks:
        if name == "no_violations":
            violations = int(report.violations.sum())
            results.append(_assertion(name, not report.flagged, violations, 0))
    return outputs, results


def _run_martingale(spec: ExperimentSpec, workers: int, out_dir: str, render: bool):
    config = DriftConfig(
        params=_eda_params(spec),
        n=spec.n,
        r=spec.r,
        fitness=spec.fitness,
        horizon=spec.horizon,
        watched=((spec.position, spec.value),),
        trials=spec.trials,
        master_seed=spec.master_seed,
        margins=False,
        cadence=spec.cadence,
    )
    trajectories = collect_trajectories(config, workers)
    report = martingale_report(trajectories, spec.position, spec.value)
    payload = {"config": config, "report": report}
    outputs = _emit(
        out_dir, "martingale", render,
        csv=lambda path: reports.write_martingale_csv(path, report),
        payload=payload,
        figure=lambda path: figures.martingale_figure(path, report),
    )
    results = []
    for name, limit in spec.checks:
        if name == "max_deviation_sigmas":
            observed = report.max_deviation_sigmas
            results.append(_assertion(name, observed <= limit, observed, limit))
    return outputs, results


def _run_bound(spec: ExperimentSpec, workers: int, out_dir: str, render: bool):
    value = drift_bound(spec.mu, spec.horizon, spec.r)
    payload = {"mu": spec.mu, "horizon": spec.horizon, "r": spec.r, "bound": value}
    outputs = _emit(
        out_dir, "bound", render,
        csv=lambda path: reports.write_bound_csv(path, spec.mu, spec.horizon, spec.r, value),
        payload=payload,
        figure=lambda path: figures.bound_figure(path, spec.mu, spec.horizon, spec.r),
    )
    results = []
    for name, limit in spec.checks:
        if name == "bound_between":
            lo, hi = limit
            results.append(_assertion(name, lo <= value <= hi, value, list(limit)))
    return outputs, results


def _emit(
    out_dir: str,
    stem: str,
    render: bool,
    *,
    csv: Callable[[str], None],
    payload: Any,
    figure: Callable[[str], None],
) -> list[str]:
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    json_path = os.path.join(out_dir, f"{stem}.json")
    csv(csv_path)
    reports.write_json(json_path, payload)
    outputs = [f"{stem}.csv", f"{stem}.json"]
    if render:
        figure(os.path.join(out_dir, f"{stem}.png"))
        outputs.append(f"{stem}.png")
    return outputs


_RUNNERS = {
    "drift": _run_drift,
    "runtime": _run_runtime,
    "dominance": _run_dominance,
    "martingale": _run_martingale,
    "bound": _run_bound,
}


def run_spec(
    spec: ExperimentSpec,
    out_dir: str = ".",
    *,
    workers: Optional[int] = None,
    figures_enabled: bool = True,
) -> int:
    """Run one experiment and write its artifacts into ``out_dir``.

    ``workers`` is the resolved worker count; when None it is resolved
    here (environment override, then the spec's own value, then 1). The
    manifest is written even when an assert check fails. Returns the
    process exit status.
    """
    if workers is None:
        workers = resolve_workers(spec.workers)
    os.makedirs(out_dir, exist_ok=True)
    start = time.perf_counter()
    outputs, results = _RUNNERS[spec.kind](spec, workers, out_dir, figures_enabled)
    failed = [res for res in results if not res["passed"]]
    reports.write_manifest(
        os.path.join(out_dir, "manifest.json"),
        kind=spec.kind,
        spec_echo=spec_to_config(spec),
        master_seed=spec.master_seed,
        outputs=outputs,
        wall_time_seconds=time.perf_counter() - start,
        workers=workers,
        assertion_results=results,
        status="assert_failed" if failed else "ok",
    )
    for res in failed:
        print(
            f"assert {res['name']} failed: observed {res['observed']}, limit {res['limit']}",
            file=sys.stderr,
        )
    return EXIT_ASSERT_FAILED if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multieda",
        description="Drift and runtime experiments for r-valued estimation-of-distribution algorithms.",
    )
    sub = parser.add_subparsers(dest="kind", required=True, metavar="|".join(KINDS))
    help_lines = {
        "drift": "frequency exit probabilities vs. the closed-form drift bound",
        "runtime": "leading-zeros runtime trials with convergence instrumentation",
        "dominance": "CDF comparison of a weakly-preferred vs. neutral frequency",
        "martingale": "mean stability of a neutral frequency without margins",
        "bound": "evaluate the drift bound formula",
    }
    for kind in KINDS:
        cmd = sub.add_parser(kind, help=help_lines[kind])
        cmd.add_argument("--config", required=True, metavar="PATH", help="JSON experiment config")
        cmd.add_argument("--seed", type=int, default=None, metavar="U64",
                         help="master seed (overrides the config's master_seed)")
        cmd.add_argument("--workers", type=int, default=None, metavar="K",
                         help="parallel trial processes (default: config value or 1)")
        cmd.add_argument("--out", default=".", metavar="DIR", help="output directory (default: .)")
        cmd.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        print(f"cannot read config {args.config}: {exc}", file=sys.stderr)
        return EXIT_IO_ERROR
    try:
        spec = parse_spec(text, args.kind, seed_override=args.seed)
    except SpecError as exc:
        for problem in exc.errors:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_SPEC_ERROR
    try:
        requested = args.workers if args.workers is not None else spec.workers
        workers = resolve_workers(requested)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SPEC_ERROR
    try:
        return run_spec(spec, args.out, workers=workers, figures_enabled=not args.no_figures)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO_ERROR


if __name__ == "__main__":
    sys.exit(main())
