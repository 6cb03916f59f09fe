"""Command-line front end.

Commands:
  run <scenario> --out <dir> [--set k=v ...]   solve and export
  verify <dir>                                 audit an exported run
  oracle <dir> [--states N] [--agents N] [--seed N]
                                               independent cross-checks
  schema                                       print the scenario schema

``run`` exits 0 on convergence, 2 on non-convergence (results are still
written), 1 on any error. ``oracle`` exits 0 iff the dynamic-programming
value check is within 2% and (1D model only) the Monte Carlo density check
is within 0.1 sup-t L1 distance.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DivergenceError, ScenarioError
from .oracle import _bilinear, dp_best_response, ev_mdp, mc_population, phev_mdp
from .phev import PhevPriceSeries
from .scenario import (
    SCHEMA_TEXT,
    ScenarioConfig,
    apply_overrides,
    build_problem,
    export_results,
    load_scenario,
    read_field_csv,
    read_series_csv,
    validate_config,
)
from .solver import MfeSolution, solve_mfe, verify_solution

DP_THRESHOLD = 0.02
MC_THRESHOLD = 0.1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evmfg", description="Mean field equilibrium solver for vehicle trading games.")
    parser.add_argument("--version", action="version", version=f"evmfg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="solve a scenario and export results")
    p_run.add_argument("scenario", help="scenario file path or bundled name")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--set", dest="overrides", action="append", default=[], metavar="K=V",
                       help="scenario override (dotted path), repeatable")

    p_verify = sub.add_parser("verify", help="audit an exported run directory")
    p_verify.add_argument("run_dir", help="directory of a prior run")

    p_oracle = sub.add_parser("oracle", help="cross-check a run with DP and Monte Carlo")
    p_oracle.add_argument("run_dir", help="directory of a prior run")
    p_oracle.add_argument("--states", type=int, default=20, help="DP state lattice size (default 20)")
    p_oracle.add_argument("--agents", type=int, default=100_000, help="Monte Carlo agents (default 100000)")
    p_oracle.add_argument("--seed", type=int, default=0, help="Monte Carlo seed (default 0)")

    sub.add_parser("schema", help="print the scenario schema")
    return parser


def cmd_run(args: argparse.Namespace) -> int:
    config = load_scenario(args.scenario)
    if args.overrides:
        config = apply_overrides(config, args.overrides)
    problem, options, resampled = build_problem(config)
    start = time.perf_counter()
    sol = solve_mfe(problem, options)
    wall = time.perf_counter() - start
    export_results(sol, problem, config, args.out, wall_time=wall, resampled=resampled)
    residual = sol.residuals[-1] if sol.residuals else float("nan")
    if sol.converged:
        print(f"converged in {sol.iterations} iterations (residual {residual:.3e}); wrote {args.out}")
        return 0
    print(f"did not converge after {sol.iterations} iterations (residual {residual:.3e}); wrote {args.out}")
    return 2


def _load_run(run_dir: Path) -> tuple[MfeSolution, object, ScenarioConfig, dict]:
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise ScenarioError("run_dir", f"manifest not found: {manifest_path}")
    with open(manifest_path) as handle:
        manifest = json.load(handle)
    config = ScenarioConfig(data=validate_config(manifest["scenario"]), base_dir=Path.cwd())
    problem, options, _ = build_problem(config)
    shape = (problem.tgrid.n_nodes,) + problem.sgrid.shape
    try:
        m = read_field_csv(run_dir / "m.csv", shape)
        v = read_field_csv(run_dir / "v.csv", shape)
        if config.model == "ev":
            p = read_series_csv(run_dir / "price.csv")
            alpha = read_field_csv(run_dir / "alpha.csv", shape)
        else:
            r1 = read_series_csv(run_dir / "r1.csv")
            p = PhevPriceSeries(r1=r1, r2=config.data["price"]["r2"])
            alpha = (read_field_csv(run_dir / "mu1.csv", shape), read_field_csv(run_dir / "mu2.csv", shape))
    except OSError as exc:
        raise ScenarioError("run_dir", f"missing run artifact: {exc}") from exc
    conv = manifest.get("convergence", {})
    sol = MfeSolution(
        v=v, m=m, p=p, alpha=alpha,
        residuals=list(conv.get("residuals", [])),
        converged=bool(conv.get("converged", False)),
        iterations=int(conv.get("iterations", 0)),
        tol=float(conv.get("tol", options.tol)),
    )
    return sol, problem, config, manifest


def cmd_verify(args: argparse.Namespace) -> int:
    sol, problem, _, _ = _load_run(Path(args.run_dir))
    report = verify_solution(sol, problem)
    print(report)
    return 0 if report.passed else 1


def cmd_oracle(args: argparse.Namespace) -> int:
    sol, problem, config, _ = _load_run(Path(args.run_dir))
    if config.model == "ev":
        mdp = ev_mdp(problem.params, problem.tgrid, np.asarray(sol.p), n_states=args.states)
        value, _ = dp_best_response(mdp)
        v0 = np.interp(mdp.states, problem.sgrid.nodes, sol.v[0])
        dp_dev = float(np.abs(value[0] - v0).max() / np.abs(v0).max())
        hist = mc_population(sol.alpha, problem.m0, problem.params, problem.tgrid, problem.sgrid,
                             n_agents=args.agents, seed=args.seed)
        l1 = np.abs(hist - sol.m).sum(axis=1) * problem.sgrid.dx
        mc_dist = float(l1.max())
        print(f"dp value deviation: {dp_dev:.6g} (threshold {DP_THRESHOLD})")
        print(f"mc density distance: {mc_dist:.6g} (threshold {MC_THRESHOLD})")
        return 0 if dp_dev <= DP_THRESHOLD and mc_dist <= MC_THRESHOLD else 1
    n_states = min(args.states, 10)
    mdp = phev_mdp(problem.params, problem.tgrid, sol.p, n_states=n_states)
    value, _ = dp_best_response(mdp)
    z1, z2 = np.meshgrid(mdp.states1, mdp.states2, indexing="ij")
    v0 = _bilinear(sol.v[0], problem.sgrid.nodes1, problem.sgrid.nodes2, z1, z2)
    dp_dev = float(np.abs(value[0] - v0).max() / np.abs(v0).max())
    print(f"dp value deviation: {dp_dev:.6g} (threshold {DP_THRESHOLD})")
    print("mc density distance: not applicable (2D model)")
    return 0 if dp_dev <= DP_THRESHOLD else 1


def cmd_schema(_: argparse.Namespace) -> int:
    print(SCHEMA_TEXT, end="")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": cmd_run, "verify": cmd_verify, "oracle": cmd_oracle, "schema": cmd_schema}
    try:
        return handlers[args.command](args)
    except (ScenarioError, DivergenceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
