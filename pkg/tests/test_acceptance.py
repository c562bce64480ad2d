"""Acceptance suite.

Every numbered test carries the ``criterion`` marker and prints one
PASS/FAIL line in the terminal summary (see conftest.py). The expensive
experiments are produced once per worker count by session fixtures; the
statistical criteria read the 1-worker artifacts and the determinism
criterion byte-compares the 1- and 8-worker outputs.
"""

import json
import math
import time

import numpy as np
import pytest

from multieda.drift import drift_bound
from multieda.model import (
    Borders,
    default_borders,
    no_margins,
    restrict_matrix,
    restrict_row,
)
from multieda.reports import read_csv
from multieda.runtime import convergence_params, lower_bound_quantities
from conftest import DOMINANCE, EARLY_PHASE, FIXATION, MARTINGALE_NEUTRAL
from oracle_values import BOUND, CONVERGENCE, LOWER_BOUND


@pytest.mark.criterion(1, "restriction: 1e5 random updates stay on the clamped simplex")
def test_restriction_random_updates():
    started = time.perf_counter()
    rng = np.random.default_rng(99173)
    count = 100_000

    border_cache = {}

    def borders_for(kind, n, r, step):
        if kind == 0:
            key = ("free", r)
        elif kind == 1:
            key = ("default", n, r)
        else:
            key = ("custom", r, step)
        made = border_cache.get(key)
        if made is None:
            if kind == 0:
                made = no_margins(r)
            elif kind == 1:
                made = default_borders(n, r)
            else:
                a = step * 0.1 * (0.9 / r)
                made = Borders(lower=a, upper=1.0 - a * (r - 1), r=r)
            border_cache[key] = made
        return key, made

    rs = rng.integers(2, 17, size=count)
    ns = rng.integers(2, 51, size=count)
    kinds = rng.integers(0, 3, size=count)
    steps = rng.integers(1, 9, size=count)

    buckets = {}
    for k in range(count):
        r, n = int(rs[k]), int(ns[k])
        if kinds[k] == 1 and r == 2 and n == 2:
            n = 3  # the default margin is degenerate there (a*r = 1)
        key, borders = borders_for(int(kinds[k]), n, r, int(steps[k]))
        raw = rng.random(r) ** 3
        update = raw / raw.sum()
        out = restrict_row(update, borders)
        bucket = buckets.setdefault(key, (borders, [], []))
        bucket[1].append(update)
        bucket[2].append(out)

    checked = 0
    for borders, updates, outs in buckets.values():
        inputs, results = np.vstack(updates), np.vstack(outs)
        checked += len(inputs)
        assert np.abs(results.sum(axis=1) - 1.0).max() <= 1e-12
        assert results.min() >= borders.lower
        assert results.max() <= borders.upper
        # restricting a second time changes nothing, bit for bit
        assert np.array_equal(restrict_matrix(results, borders), results)
        # weak order of the entries survives: equal stays equal,
        # larger stays at least as large
        order = np.argsort(inputs, axis=1, kind="stable")
        u = np.take_along_axis(inputs, order, axis=1)
        o = np.take_along_axis(results, order, axis=1)
        same = u[:, 1:] == u[:, :-1]
        assert np.all(o[:, 1:][same] == o[:, :-1][same])
        assert np.all(o[:, 1:][~same] >= o[:, :-1][~same])
    assert checked == count

    elapsed = time.perf_counter() - started
    assert elapsed < 10.0, f"restriction property run took {elapsed:.1f}s"


@pytest.mark.criterion(2, "neutral frequency mean within 3 SE of 1/r at t=1,5,20,50")
def test_neutral_mean_preserved(martingale_neutral_runs):
    rows = read_csv(str(martingale_neutral_runs[1] / "martingale.csv"), "martingale")
    by_iteration = {row["iteration"]: row for row in rows}
    assert by_iteration[0]["deviation_sigmas"] == 0.0  # exact at the start
    for t in (1, 5, 20, 50):
        row = by_iteration[t]
        assert row["deviation_sigmas"] <= 3.0, (
            f"t={t}: mean {row['mean']} is {row['deviation_sigmas']:.2f} SE "
            f"away from {1 / MARTINGALE_NEUTRAL['r']}"
        )


@pytest.mark.criterion(3, "neutral exit rate within bound + 3 sigma; small-mu contrast")
def test_neutral_exit_probability(drift_neutral_runs, drift_neutral_small_mu_runs):
    row = read_csv(str(drift_neutral_runs[1] / "drift.csv"), "drift")[0]
    bound = row["bound"]
    assert 0.02 <= bound <= 0.1, "mu was chosen to land the bound in [0.02, 0.1]"
    trials = row["trials"]
    limit = bound + 3.0 * math.sqrt(bound / trials)
    assert row["p_hat"] <= limit, f"exit rate {row['p_hat']} above {limit}"

    # a 10x smaller mu must drift visibly more: two-proportion test at 3 sigma
    small = read_csv(str(drift_neutral_small_mu_runs[1] / "drift.csv"), "drift")[0]
    assert small["trials"] == trials
    pooled = (row["exits"] + small["exits"]) / (2 * trials)
    se = math.sqrt(pooled * (1.0 - pooled) * (2.0 / trials))
    assert small["p_hat"] > row["p_hat"] + 3.0 * se, (
        f"small-mu exit rate {small['p_hat']} not separated from {row['p_hat']}"
    )


@pytest.mark.criterion(4, "weak-preference exit rate within bound + 3 sigma")
def test_weak_preference_exit_probability(drift_weak_pref_runs):
    row = read_csv(str(drift_weak_pref_runs[1] / "drift.csv"), "drift")[0]
    limit = row["bound"] + 3.0 * math.sqrt(row["bound"] / row["trials"])
    assert row["p_hat"] <= limit, f"exit rate {row['p_hat']} above {limit}"


@pytest.mark.criterion(5, "weak-preference CDF dominates neutral at all 101 grid points")
def test_stochastic_dominance(dominance_runs):
    rows = read_csv(str(dominance_runs[1] / "dominance.csv"), "dominance")
    assert len(rows) == DOMINANCE.get("grid_points", 101)
    for row in rows:
        diff = row["cdf_weak_pref"] - row["cdf_neutral"]
        assert diff <= 3.0 * row["pooled_se"], f"violated at theta={row['threshold']}"
        assert row["violation"] is False


@pytest.mark.criterion(6, "18+ of 20 trials fixate within 67 iterations, optimum sampled")
def test_fixation_within_budget(fixation_runs):
    payload = json.loads((fixation_runs[1] / "runtime.json").read_text())
    derived = payload["derived_params"]
    assert derived["mu_min"] == 25_079
    assert derived["lambda_min"] == 204_516
    assert derived["iteration_budget"] == 67

    rows = read_csv(str(fixation_runs[1] / "runtime.csv"), "runtime")
    assert len(rows) == FIXATION["trials"] == 20
    converged = [
        row
        for row in rows
        if row["converged_iter"] is not None and row["converged_iter"] <= 67
    ]
    assert len(converged) >= 18, f"only {len(converged)} of 20 trials converged in time"
    for row in converged:
        assert row["first_hit_iter"] is not None, f"trial {row['trial']} never hit"
        assert row["first_hit_iter"] < row["converged_iter"], (
            f"trial {row['trial']}: hit at {row['first_hit_iter']}, "
            f"converged at {row['converged_iter']}"
        )


@pytest.mark.criterion(7, "at most 1 of 20 trials samples the optimum early")
def test_no_early_optimum_hits(early_phase_runs):
    quantities = lower_bound_quantities(
        EARLY_PHASE["n"],
        EARLY_PHASE["r"],
        EARLY_PHASE["lambda"],
        EARLY_PHASE["mu"],
        0.5,
    )
    assert quantities.iteration_lower_bound == 24
    assert quantities.mu_ok

    rows = read_csv(str(early_phase_runs[1] / "runtime.csv"), "runtime")
    assert len(rows) == 20
    early = [
        row
        for row in rows
        if row["first_hit_iter"] is not None
        and row["first_hit_iter"] < quantities.iteration_lower_bound
    ]
    assert len(early) <= 1, f"{len(early)} trials sampled the optimum early: {early}"


@pytest.mark.criterion(8, "critical position traces climb from 1 to n+1, never dropping")
def test_sequential_fixation_order(fixation_runs):
    payload = json.loads((fixation_runs[1] / "runtime.json").read_text())
    records = payload["records"]
    assert len(records) == 20
    n = FIXATION["n"]
    for wrapper in records:
        record = wrapper["record"]
        trace = np.asarray(record["critical_trace"])
        assert trace[0] == 1
        assert (np.diff(trace) >= 0).all(), (
            f"trial {wrapper['trial']}: critical position decreased"
        )
        if record["convergence_iteration"] is not None:
            assert trace[-1] == n + 1


@pytest.mark.criterion(9, "parameter formulas match frozen high-precision oracles")
def test_formula_oracles():
    started = time.perf_counter()

    assert len(CONVERGENCE) >= 10
    for (n, r, s), expected in CONVERGENCE.items():
        got = convergence_params(n, r, s)
        assert (
            got.mu_min,
            got.lambda_min,
            got.iteration_budget,
            got.guard_horizon,
        ) == expected, (n, r, s)

    assert len(LOWER_BOUND) >= 10
    for (n, r, lam, mu, delta), expected in LOWER_BOUND.items():
        got = lower_bound_quantities(n, r, lam, mu, delta)
        assert (
            got.advance_cap,
            got.tail_margin,
            got.iteration_lower_bound,
            got.mu_min,
        ) == expected, (n, r, lam, mu, delta)

    assert len(BOUND) >= 10
    for (mu, horizon, r), expected in BOUND.items():
        got = drift_bound(mu, horizon, r)
        assert abs(got - expected) <= math.ulp(expected), (mu, horizon, r)

    assert time.perf_counter() - started < 1.0


@pytest.mark.criterion(10, "CSV outputs byte-identical with 1 and 8 workers")
def test_worker_count_determinism(
    martingale_neutral_runs,
    drift_neutral_runs,
    drift_neutral_small_mu_runs,
    drift_weak_pref_runs,
    dominance_runs,
    fixation_runs,
    early_phase_runs,
):
    experiments = {
        "martingale-neutral": martingale_neutral_runs,
        "drift-neutral": drift_neutral_runs,
        "drift-neutral-small-mu": drift_neutral_small_mu_runs,
        "drift-weak-pref": drift_weak_pref_runs,
        "dominance": dominance_runs,
        "fixation": fixation_runs,
        "early-phase": early_phase_runs,
    }
    for name, dirs in experiments.items():
        base, other = dirs[1], dirs[8]
        csv_names = sorted(path.name for path in base.glob("*.csv"))
        assert csv_names, f"{name} produced no CSV"
        for filename in csv_names:
            assert (base / filename).read_bytes() == (other / filename).read_bytes(), (
                f"{name}: {filename} differs between 1 and 8 workers"
            )
        # result JSONs share the contract; only the manifest may vary
        for path in sorted(base.glob("*.json")):
            if path.name == "manifest.json":
                continue
            assert path.read_bytes() == (other / path.name).read_bytes(), (
                f"{name}: {path.name} differs between 1 and 8 workers"
            )


# ------------------------------------------------ structural invariants
# (checked on the same early-phase trials as criterion 7)


def test_frontier_advance_is_capped(early_phase_runs):
    # the furthest selection-relevant position should move by more than
    # the per-iteration cap d only with probability ~ n^-2
    d = lower_bound_quantities(
        EARLY_PHASE["n"], EARLY_PHASE["r"], EARLY_PHASE["lambda"],
        EARLY_PHASE["mu"], 0.5,
    ).advance_cap
    payload = json.loads((early_phase_runs[1] / "runtime.json").read_text())
    jumps_over, total = 0, 0
    for wrapper in payload["records"]:
        trace = np.asarray(wrapper["record"]["selection_relevant_trace"])
        assert len(trace) == EARLY_PHASE["iteration_cap"]
        diffs = np.diff(trace)
        jumps_over += int((diffs > d).sum())
        total += diffs.size
    q = EARLY_PHASE["n"] ** -2
    allowed = q * total + 3.0 * math.sqrt(total * q * (1.0 - q))
    assert jumps_over <= allowed, f"{jumps_over} of {total} jumps exceeded d={d}"


def test_unreached_positions_stay_centered(early_phase_runs):
    # before the selection frontier reaches a position, its value-0
    # frequency should stay strictly inside (1/(2r), 3/(2r))
    r, n = EARLY_PHASE["r"], EARLY_PHASE["n"]
    lo, hi = 1.0 / (2 * r), 3.0 / (2 * r)
    payload = json.loads((early_phase_runs[1] / "runtime.json").read_text())
    violating_trials = 0
    for wrapper in payload["records"]:
        record = wrapper["record"]
        frontier = np.maximum.accumulate(record["selection_relevant_trace"])
        zero_freqs = np.asarray(record["zero_frequency_trace"])
        assert zero_freqs.shape == (EARLY_PHASE["iteration_cap"] + 1, n)
        violated = False
        for t, reach in enumerate(frontier):
            tail = zero_freqs[t, reach:]
            if tail.size and ((tail <= lo) | (tail >= hi)).any():
                violated = True
                break
        violating_trials += violated
    trials = len(payload["records"])
    per_trial = 2.0 / n
    allowed = trials * per_trial + 3.0 * math.sqrt(trials * per_trial * (1 - per_trial))
    assert violating_trials <= allowed, (
        f"{violating_trials} of {trials} trials left the drift window early"
    )
