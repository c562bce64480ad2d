"""Serialization of experiment results: CSV tables, JSON detail, manifests.

Column orders are fixed and versioned (``CSV_SCHEMA_VERSION``). Cell
formatting is deterministic: ints via str, floats via repr (shortest
round-trip form), booleans as "true"/"false", missing values as the
empty string. Every CSV written here re-parses to the same values
through the matching read_* function.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import platform
from typing import Any, Optional

import numpy as np

from .drift import DominanceReport, ExitStats, MartingaleReport
from .runtime import RuntimeRecord

CSV_SCHEMA_VERSION = 1

DRIFT_COLUMNS = ("position", "value", "trials", "exits", "p_hat", "ci_lo", "ci_hi", "bound")
RUNTIME_COLUMNS = ("trial", "seed", "converged_iter", "first_hit_iter", "evaluations", "flagged")
DOMINANCE_COLUMNS = ("threshold", "cdf_weak_pref", "cdf_neutral", "diff", "pooled_se", "violation")
MARTINGALE_COLUMNS = ("iteration", "mean", "std_error", "deviation_sigmas")
BOUND_COLUMNS = ("mu", "horizon", "r", "bound")


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, str):
        return value
    raise TypeError(f"cannot format {type(value).__name__} cell: {value!r}")


def _write_rows(path: str, columns: tuple[str, ...], rows: list[dict[str, Any]]) -> None:
    # lineterminator pinned so output bytes do not depend on the platform
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row[col]) for col in columns])


def _parse_optional_int(text: str) -> Optional[int]:
    return None if text == "" else int(text)


def _parse_bool(text: str) -> bool:
    if text == "true":
        return True
    if text == "false":
        return False
    raise ValueError(f"expected 'true' or 'false', got {text!r}")


_PARSERS = {
    "int": int,
    "optional_int": _parse_optional_int,
    "float": float,
    "str": str,
    "bool": _parse_bool,
}

_SCHEMAS: dict[str, tuple[tuple[str, str], ...]] = {
    "drift": (
        ("position", "int"),
        ("value", "int"),
        ("trials", "int"),
        ("exits", "int"),
        ("p_hat", "float"),
        ("ci_lo", "float"),
        ("ci_hi", "float"),
        ("bound", "float"),
    ),
    "runtime": (
        ("trial", "int"),
        ("seed", "str"),
        ("converged_iter", "optional_int"),
        ("first_hit_iter", "optional_int"),
        ("evaluations", "int"),
        ("flagged", "bool"),
    ),
    "dominance": (
        ("threshold", "float"),
        ("cdf_weak_pref", "float"),
        ("cdf_neutral", "float"),
        ("diff", "float"),
        ("pooled_se", "float"),
        ("violation", "bool"),
    ),
    "martingale": (
        ("iteration", "int"),
        ("mean", "float"),
        ("std_error", "float"),
        ("deviation_sigmas", "float"),
    ),
    "bound": (
        ("mu", "int"),
        ("horizon", "int"),
        ("r", "int"),
        ("bound", "float"),
    ),
}


def read_csv(path: str, kind: str) -> list[dict[str, Any]]:
    """Parse a CSV written by this module back to typed row dicts."""
    schema = _SCHEMAS.get(kind)
    if schema is None:
        raise ValueError(f"unknown csv kind {kind!r}; expected one of {sorted(_SCHEMAS)}")
    expected_header = [name for name, _ in schema]
    with open(path, "r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header != expected_header:
            raise ValueError(f"header mismatch in {path}: {header} != {expected_header}")
        rows = []
        for raw in reader:
            if len(raw) != len(schema):
                raise ValueError(f"row width mismatch in {path}: {raw}")
            rows.append(
                {name: _PARSERS[parser](cell) for (name, parser), cell in zip(schema, raw)}
            )
    return rows


def drift_rows(stats: ExitStats) -> list[dict[str, Any]]:
    return [
        {
            "position": pair.position,
            "value": pair.value,
            "trials": pair.trials,
            "exits": pair.exits,
            "p_hat": pair.p_hat,
            "ci_lo": pair.ci_lo,
            "ci_hi": pair.ci_hi,
            "bound": pair.bound,
        }
        for pair in stats.pairs
    ]


def runtime_rows(records: list[RuntimeRecord]) -> list[dict[str, Any]]:
    return [
        {
            "trial": rec.trial,
            "seed": rec.seed,
            "converged_iter": rec.record.convergence_iteration,
            "first_hit_iter": rec.record.first_hit_iteration,
            "evaluations": rec.record.evaluations,
            "flagged": rec.record.flagged_nonterminating,
        }
        for rec in records
    ]


def dominance_rows(report: DominanceReport) -> list[dict[str, Any]]:
    return [
        {
            "threshold": float(report.thresholds[k]),
            "cdf_weak_pref": float(report.cdf_weakpref[k]),
            "cdf_neutral": float(report.cdf_neutral[k]),
            "diff": float(report.diff[k]),
            "pooled_se": float(report.pooled_se[k]),
            "violation": bool(report.violations[k]),
        }
        for k in range(len(report.thresholds))
    ]


def martingale_rows(report: MartingaleReport) -> list[dict[str, Any]]:
    return [
        {
            "iteration": int(report.iterations[k]),
            "mean": float(report.means[k]),
            "std_error": float(report.standard_errors[k]),
            "deviation_sigmas": float(report.deviation_sigmas[k]),
        }
        for k in range(len(report.iterations))
    ]


def bound_rows(mu: int, horizon: int, r: int, bound: float) -> list[dict[str, Any]]:
    return [{"mu": mu, "horizon": horizon, "r": r, "bound": bound}]


def write_drift_csv(path: str, stats: ExitStats) -> None:
    _write_rows(path, DRIFT_COLUMNS, drift_rows(stats))


def write_runtime_csv(path: str, records: list[RuntimeRecord]) -> None:
    _write_rows(path, RUNTIME_COLUMNS, runtime_rows(records))


def write_dominance_csv(path: str, report: DominanceReport) -> None:
    _write_rows(path, DOMINANCE_COLUMNS, dominance_rows(report))


def write_martingale_csv(path: str, report: MartingaleReport) -> None:
    _write_rows(path, MARTINGALE_COLUMNS, martingale_rows(report))


def write_bound_csv(path: str, mu: int, horizon: int, r: int, bound: float) -> None:
    _write_rows(path, BOUND_COLUMNS, bound_rows(mu, horizon, r, bound))


def _json_key(key: Any) -> str:
    if isinstance(key, str):
        return key
    if isinstance(key, tuple):
        return ",".join(str(part) for part in key)
    if isinstance(key, (int, np.integer)):
        return str(int(key))
    raise TypeError(f"cannot use {type(key).__name__} as a JSON key: {key!r}")


def to_jsonable(obj: Any) -> Any:
    """Recursively convert records (dataclasses, numpy values) to JSON types."""
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    if isinstance(obj, (np.bool_, np.integer, np.floating)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {
            field.name: to_jsonable(getattr(obj, field.name))
            for field in dataclasses.fields(obj)
        }
    if isinstance(obj, dict):
        return {_json_key(key): to_jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(item) for item in obj]
    raise TypeError(f"cannot convert {type(obj).__name__} to JSON: {obj!r}")


def write_json(path: str, payload: Any) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(to_jsonable(payload), handle, indent=2, sort_keys=True)
        handle.write("\n")


def write_manifest(
    path: str,
    *,
    kind: str,
    spec_echo: dict[str, Any],
    master_seed: int,
    outputs: list[str],
    wall_time_seconds: float,
    workers: int = 1,
    assertion_results: Optional[list[dict[str, Any]]] = None,
    status: str = "ok",
) -> None:
    """Record what ran and with which versions. Written even on failure.

    Contains the wall time, so manifests are not byte-reproducible; the
    determinism contract covers the CSV and JSON result files only.
    """
    from . import __version__

    payload = {
        "kind": kind,
        "spec": spec_echo,
        "master_seed": master_seed,
        "outputs": sorted(outputs),
        "wall_time_seconds": wall_time_seconds,
        "workers": workers,
        "status": status,
        "assertion_results": assertion_results if assertion_results is not None else [],
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "versions": {
            "multieda": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": _module_version("scipy"),
            "matplotlib": _module_version("matplotlib"),
        },
    }
    write_json(path, payload)


def _module_version(name: str) -> Optional[str]:
    try:
        module = __import__(name)
    except ImportError:
        return None
    return getattr(module, "__version__", None)
