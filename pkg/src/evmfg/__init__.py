"""Mean field equilibria for electric-vehicle electricity trading.

A finite-difference solver for the coupled backward value / forward density
system of two trading games (one battery on a line, two battery packs on a
square), plus independent dynamic-programming and Monte Carlo cross-checks,
declarative scenario files and a CLI.
"""

from .errors import DivergenceError, ScenarioError
from .ev import (
    EvParams,
    EvProblem,
    ev_cost,
    ev_price,
    fpk_forward_sweep,
    hjb_backward_sweep,
    optimal_control,
)
from .grids import SpaceGrid1D, SpaceGrid2D, TimeGrid
from .numerics import (
    diff2,
    diff_central,
    diff_upwind,
    integrate,
    mean_rate,
    space_mean,
    substep_count,
)
from .oracle import (
    DiscreteMdp,
    PhevMdp,
    dp_best_response,
    ev_mdp,
    fold_reflect,
    mc_population,
    phev_mdp,
    sample_density,
)
from .phev import (
    PhevParams,
    PhevPriceSeries,
    PhevProblem,
    beta,
    beta_divergence,
    phev_cost,
    phev_fpk_forward_sweep,
    phev_hjb_backward_sweep,
    phev_optimal_controls,
    phev_price,
)
from .scenario import (
    SCHEMA_TEXT,
    ScenarioConfig,
    apply_overrides,
    build_problem,
    bundled_scenarios,
    canonical_yaml,
    ev_purchases,
    export_results,
    load_scenario,
    read_field_csv,
    read_series_csv,
    scenario_hash,
    validate_config,
    write_scenario,
)
from .solver import MfeSolution, SolverOptions, VerifyReport, solve_mfe, verify_solution

__version__ = "0.1.0"

__all__ = [
    "DivergenceError",
    "ScenarioError",
    "TimeGrid",
    "SpaceGrid1D",
    "SpaceGrid2D",
    "diff_central",
    "diff_upwind",
    "diff2",
    "integrate",
    "space_mean",
    "mean_rate",
    "substep_count",
    "EvParams",
    "EvProblem",
    "ev_price",
    "optimal_control",
    "hjb_backward_sweep",
    "fpk_forward_sweep",
    "ev_cost",
    "PhevParams",
    "PhevPriceSeries",
    "PhevProblem",
    "beta",
    "beta_divergence",
    "phev_price",
    "phev_optimal_controls",
    "phev_hjb_backward_sweep",
    "phev_fpk_forward_sweep",
    "phev_cost",
    "SolverOptions",
    "MfeSolution",
    "VerifyReport",
    "solve_mfe",
    "verify_solution",
    "DiscreteMdp",
    "PhevMdp",
    "ev_mdp",
    "phev_mdp",
    "dp_best_response",
    "mc_population",
    "fold_reflect",
    "sample_density",
    "ScenarioConfig",
    "load_scenario",
    "write_scenario",
    "apply_overrides",
    "build_problem",
    "bundled_scenarios",
    "canonical_yaml",
    "scenario_hash",
    "validate_config",
    "export_results",
    "ev_purchases",
    "read_field_csv",
    "read_series_csv",
    "SCHEMA_TEXT",
]
