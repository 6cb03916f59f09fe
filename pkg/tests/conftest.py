"""Shared fixtures: converged solves of the two bundled scenarios.

The full runs are session-scoped because several test modules (solver,
scenario export, CLI, acceptance) all exercise the same converged
solutions and the solves are the expensive part.
"""

import time

import pytest

import evmfg


def _solve(name):
    config = evmfg.load_scenario(name)
    problem, options, resampled = evmfg.build_problem(config)
    start = time.perf_counter()
    solution = evmfg.solve_mfe(problem, options)
    wall_time = time.perf_counter() - start
    return {
        "config": config,
        "problem": problem,
        "options": options,
        "resampled": resampled,
        "solution": solution,
        "wall_time": wall_time,
    }


@pytest.fixture(scope="session")
def ev_run():
    return _solve("ev_weekend")


@pytest.fixture(scope="session")
def phev_run():
    return _solve("phev_flat")


@pytest.fixture(scope="session")
def ev_run_dir(ev_run, tmp_path_factory):
    out = tmp_path_factory.mktemp("ev_weekend_run")
    evmfg.export_results(
        ev_run["solution"],
        ev_run["problem"],
        ev_run["config"],
        out,
        wall_time=ev_run["wall_time"],
        resampled=ev_run["resampled"],
    )
    return out


@pytest.fixture(scope="session")
def phev_run_dir(phev_run, tmp_path_factory):
    out = tmp_path_factory.mktemp("phev_flat_run")
    evmfg.export_results(
        phev_run["solution"],
        phev_run["problem"],
        phev_run["config"],
        out,
        wall_time=phev_run["wall_time"],
        resampled=phev_run["resampled"],
    )
    return out
