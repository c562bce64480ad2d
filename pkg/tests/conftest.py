"""Shared test infrastructure.

The acceptance suite reruns every experiment with 1 and 8 workers, which
is expensive, so each experiment lives in a session-scoped fixture whose
artifacts all dependent tests read. Acceptance tests are pushed to the
end of the collection so the unit suite fails fast, and every test
tagged with the ``criterion`` marker contributes one PASS/FAIL line to a
terminal summary section.
"""

import json

import pytest

from multieda.cli import parse_spec, run_spec

WORKER_COUNTS = (1, 8)

# fixed experiment grids of the acceptance suite; master seeds are
# arbitrary but frozen so results are reproducible byte for byte
MARTINGALE_NEUTRAL = {
    "kind": "martingale",
    "master_seed": 602001,
    "trials": 10_000,
    "n": 5,
    "r": 4,
    "lambda": 40,
    "mu": 20,
    "fitness": "neutral_constant",
    "horizon": 50,
    "position": 1,
    "value": 0,
}

DRIFT_NEUTRAL = {
    "kind": "drift",
    "master_seed": 602003,
    "trials": 400,
    "n": 10,
    "r": 5,
    "lambda": 11_000,
    "mu": 11_000,
    "fitness": "neutral_constant",
    "horizon": 50,
    "watched": [[1, 0]],
}

DRIFT_NEUTRAL_SMALL_MU = {
    **DRIFT_NEUTRAL,
    "master_seed": 602004,
    "lambda": 1_100,
    "mu": 1_100,
}

DRIFT_WEAK_PREF = {
    **DRIFT_NEUTRAL,
    "master_seed": 602005,
    "fitness": "first_zero_bonus",
}

DOMINANCE = {
    "kind": "dominance",
    "master_seed": 602006,
    "trials": 2_000,
    "n": 10,
    "r": 4,
    "lambda": 100,
    "mu": 50,
    "iteration": 20,
}

FIXATION = {
    "kind": "runtime",
    "master_seed": 602009,
    "trials": 20,
    "n": 20,
    "r": 5,
    "s": 1.0,
}

EARLY_PHASE = {
    "kind": "runtime",
    "master_seed": 602010,
    "trials": 20,
    "n": 100,
    "r": 4,
    "lambda": 364_131,
    "mu": 44_652,
    "iteration_cap": 25,
    "track_zero_frequencies": True,
}


def _run_with_each_worker_count(tmp_path_factory, name, config):
    spec = parse_spec(json.dumps(config), None)
    dirs = {}
    for workers in WORKER_COUNTS:
        out = tmp_path_factory.mktemp(f"{name}-w{workers}")
        code = run_spec(spec, str(out), workers=workers, figures_enabled=False)
        if code != 0:
            pytest.fail(f"{name} run with {workers} workers exited with {code}")
        dirs[workers] = out
    return dirs


@pytest.fixture(scope="session")
def martingale_neutral_runs(tmp_path_factory):
    return _run_with_each_worker_count(
        tmp_path_factory, "martingale-neutral", MARTINGALE_NEUTRAL
    )


@pytest.fixture(scope="session")
def drift_neutral_runs(tmp_path_factory):
    return _run_with_each_worker_count(tmp_path_factory, "drift-neutral", DRIFT_NEUTRAL)


@pytest.fixture(scope="session")
def drift_neutral_small_mu_runs(tmp_path_factory):
    return _run_with_each_worker_count(
        tmp_path_factory, "drift-neutral-small-mu", DRIFT_NEUTRAL_SMALL_MU
    )


@pytest.fixture(scope="session")
def drift_weak_pref_runs(tmp_path_factory):
    return _run_with_each_worker_count(
        tmp_path_factory, "drift-weak-pref", DRIFT_WEAK_PREF
    )


@pytest.fixture(scope="session")
def dominance_runs(tmp_path_factory):
    return _run_with_each_worker_count(tmp_path_factory, "dominance", DOMINANCE)


@pytest.fixture(scope="session")
def fixation_runs(tmp_path_factory):
    return _run_with_each_worker_count(tmp_path_factory, "fixation", FIXATION)


@pytest.fixture(scope="session")
def early_phase_runs(tmp_path_factory):
    return _run_with_each_worker_count(tmp_path_factory, "early-phase", EARLY_PHASE)


# ------------------------------------------------- criterion bookkeeping

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(number, label): tags a test as one acceptance criterion",
    )


def pytest_collection_modifyitems(config, items):
    # acceptance tests run last: everything else gives feedback in seconds
    items.sort(key=lambda item: item.path.name == "test_acceptance.py")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, label = marker.args
    entry = _CRITERIA.setdefault(number, {"label": label, "outcome": "PASS"})
    if report.skipped:
        entry["outcome"] = "SKIP"
    elif report.failed:
        entry["outcome"] = "FAIL"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        terminalreporter.write_line(
            f"criterion {number:2d}: {entry['outcome']:4s} {entry['label']}"
        )
