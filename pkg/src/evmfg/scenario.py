"""Declarative scenario files, series ingestion and result export.

Scenarios are YAML documents validated against a fixed schema (printed by
the ``schema`` CLI command). Loading fills defaults and canonicalizes the
document, so ``load_scenario(write_scenario(c)) == c``. Two scenarios ship
inside the package: ``ev_weekend`` (a weekend consumption profile with an
endogenous quadratic price) and ``phev_flat`` (constant consumption, two
battery packs).

Exports are long-format CSV with a fixed column order and 17-significant-
digit floats, so identical runs produce byte-identical CSV files. The run
manifest records the scenario (resolved form and hash), solver version,
grid sizes, convergence history and wall time; the wall time necessarily
varies between runs, so bit-reproducibility is a property of the CSV set.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import ScenarioError
from .ev import EvParams, EvProblem
from .grids import SpaceGrid1D, SpaceGrid2D, TimeGrid
from .numerics import mean_rate
from .phev import PhevParams, PhevProblem
from .solver import MfeSolution, SolverOptions

SCHEMA_VERSION = 1

SCHEMA_TEXT = """\
# Scenario schema (version 1). YAML document, keys as below.
schema_version: 1          # required, must be 1
name: <string>             # optional, defaults to the file stem
model: ev | phev           # required
horizon: <float > 0>       # required, length of the planning window
time_steps: <int >= 2>     # required, number of time intervals
space:
  cells: <int >= 4>        # ev: battery cells; phev: [n1, n2] pack cells

series:                    # one value per time node, or a resampled form.
  # Each series is one of:
  #   <scalar>                        constant in time
  #   [v0, v1, ...]                   exactly time_steps + 1 values
  #   {times: [...], values: [...]}   linear interpolation to the nodes
  #   {csv: <path>}                   two-column t,value file, interpolated
  # ev model:    g, d, sigma, H
  # phev model:  g, Q1, Q2
  g: ...

costs:                     # named presets; no embedded code
  # ev model:   f (running), kappa (terminal)
  # phev model: s (running), xi (terminal)
  # presets:
  #   {kind: quadratic_shortage, weight: <w>=0>, target: <float>}
  #       -> w * (target - x)^2        (ev: x; phev: z1 + z2)
  #   {kind: zero}
  f: {kind: quadratic_shortage, weight: 1.0, target: 1.0}

price:
  # ev model:
  exponent: <float>        # default 2.0
  coupled: <bool>          # default true; false freezes demand out of p
  # phev model:
  offset: <float >= 0>     # default 0.5, added to the positive grid draw
  r2: <float>              # required, flat second-pack price

initial_density:           # normalized to unit mass on the grid
  kind: triangle | truncated_gaussian | histogram
  # triangle (ev only):    center, halfwidth; support within [0, 1]
  # truncated_gaussian:    mean (scalar for ev, [m1, m2] for phev),
  #                        variance (isotropic, > 0)
  # histogram:             csv: <path>, one value per cell (row-major)

solver:                    # optional block, defaults below
  max_iters: 200
  tol: 1.0e-06
  damping: 0.5

# Overrides (--set) use dotted paths into this document, e.g.
#   --set solver.max_iters=50   --set price.coupled=false
# Bare solver keys (max_iters, tol, damping) are accepted as shorthand.
"""

_SOLVER_DEFAULTS = {"max_iters": 200, "tol": 1e-6, "damping": 0.5}
_EV_SERIES = ("g", "d", "sigma", "H")
_PHEV_SERIES = ("g", "Q1", "Q2")
_EV_COSTS = ("f", "kappa")
_PHEV_COSTS = ("s", "xi")


@dataclass
class ScenarioConfig:
    """A validated, canonical scenario document."""

    data: dict
    base_dir: Path = field(default_factory=Path.cwd, compare=False)

    @property
    def name(self) -> str:
        return self.data["name"]

    @property
    def model(self) -> str:
        return self.data["model"]


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ScenarioError(f"{where}{key}" if where.endswith(".") or not where else key, "missing key")
    return mapping[key]


def _reject_unknown(mapping: dict, allowed: set[str], where: str) -> None:
    for key in mapping:
        if key not in allowed:
            path = f"{where}.{key}" if where else str(key)
            raise ScenarioError(path, "unknown key")


def _as_number(value, fld: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(fld, f"expected a number, got {value!r}")
    out = float(value)
    if not np.isfinite(out):
        raise ScenarioError(fld, "must be finite")
    return out


def _as_int(value, fld: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(fld, f"expected an integer, got {value!r}")
    return value


def _validate_series_spec(spec, fld: str):
    """Normalize a series entry to one of the four canonical forms."""
    if isinstance(spec, bool):
        raise ScenarioError(fld, "expected a series, got a boolean")
    if isinstance(spec, (int, float)):
        return _as_number(spec, fld)
    if isinstance(spec, list):
        return [_as_number(v, f"{fld}[{k}]") for k, v in enumerate(spec)]
    if isinstance(spec, dict):
        if "csv" in spec:
            _reject_unknown(spec, {"csv"}, fld)
            if not isinstance(spec["csv"], str):
                raise ScenarioError(f"{fld}.csv", "expected a path string")
            return {"csv": spec["csv"]}
        if "times" in spec or "values" in spec:
            _reject_unknown(spec, {"times", "values"}, fld)
            times = _require(spec, "times", f"{fld}.")
            values = _require(spec, "values", f"{fld}.")
            if not isinstance(times, list) or not isinstance(values, list):
                raise ScenarioError(fld, "times and values must be lists")
            if len(times) != len(values) or len(times) < 2:
                raise ScenarioError(fld, "times and values must have equal length >= 2")
            times = [_as_number(v, f"{fld}.times[{k}]") for k, v in enumerate(times)]
            values = [_as_number(v, f"{fld}.values[{k}]") for k, v in enumerate(values)]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ScenarioError(f"{fld}.times", "must be strictly increasing")
            return {"times": times, "values": values}
    raise ScenarioError(fld, "expected scalar, list, {times, values} or {csv}")


def _validate_cost_spec(spec, fld: str) -> dict:
    if not isinstance(spec, dict):
        raise ScenarioError(fld, "expected a mapping with a 'kind' key")
    kind = _require(spec, "kind", f"{fld}.")
    if kind == "zero":
        _reject_unknown(spec, {"kind"}, fld)
        return {"kind": "zero"}
    if kind == "quadratic_shortage":
        _reject_unknown(spec, {"kind", "weight", "target"}, fld)
        weight = _as_number(_require(spec, "weight", f"{fld}."), f"{fld}.weight")
        if weight < 0.0:
            raise ScenarioError(f"{fld}.weight", "must be nonnegative")
        target = _as_number(_require(spec, "target", f"{fld}."), f"{fld}.target")
        return {"kind": "quadratic_shortage", "weight": weight, "target": target}
    raise ScenarioError(f"{fld}.kind", f"unknown cost preset {kind!r}")


def _validate_density_spec(spec, model: str, fld: str) -> dict:
    if not isinstance(spec, dict):
        raise ScenarioError(fld, "expected a mapping with a 'kind' key")
    kind = _require(spec, "kind", f"{fld}.")
    if kind == "triangle":
        if model != "ev":
            raise ScenarioError(f"{fld}.kind", "triangle density is one-dimensional")
        _reject_unknown(spec, {"kind", "center", "halfwidth"}, fld)
        center = _as_number(_require(spec, "center", f"{fld}."), f"{fld}.center")
        halfwidth = _as_number(_require(spec, "halfwidth", f"{fld}."), f"{fld}.halfwidth")
        if halfwidth <= 0.0:
            raise ScenarioError(f"{fld}.halfwidth", "must be positive")
        if center - halfwidth < 0.0 or center + halfwidth > 1.0:
            raise ScenarioError(fld, f"triangle support [{center - halfwidth}, {center + halfwidth}] not within [0, 1]")
        return {"kind": "triangle", "center": center, "halfwidth": halfwidth}
    if kind == "truncated_gaussian":
        _reject_unknown(spec, {"kind", "mean", "variance"}, fld)
        mean = _require(spec, "mean", f"{fld}.")
        if model == "ev":
            mean = _as_number(mean, f"{fld}.mean")
        else:
            if not isinstance(mean, list) or len(mean) != 2:
                raise ScenarioError(f"{fld}.mean", "expected [m1, m2] for the 2D model")
            mean = [_as_number(v, f"{fld}.mean[{k}]") for k, v in enumerate(mean)]
        variance = _as_number(_require(spec, "variance", f"{fld}."), f"{fld}.variance")
        if variance <= 0.0:
            raise ScenarioError(f"{fld}.variance", "must be positive")
        return {"kind": "truncated_gaussian", "mean": mean, "variance": variance}
    if kind == "histogram":
        _reject_unknown(spec, {"kind", "csv"}, fld)
        path = _require(spec, "csv", f"{fld}.")
        if not isinstance(path, str):
            raise ScenarioError(f"{fld}.csv", "expected a path string")
        return {"kind": "histogram", "csv": path}
    raise ScenarioError(f"{fld}.kind", f"unknown density kind {kind!r}")


def validate_config(data, name_default: str = "scenario") -> dict:
    """Validate a raw document and return the canonical, defaults-filled form."""
    if not isinstance(data, dict):
        raise ScenarioError("document", "scenario must be a mapping")
    allowed = {
        "schema_version", "name", "model", "horizon", "time_steps",
        "space", "series", "costs", "price", "initial_density", "solver",
    }
    _reject_unknown(data, allowed, "")
    version = _require(data, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise ScenarioError("schema_version", f"expected {SCHEMA_VERSION}, got {version!r}")
    model = _require(data, "model", "")
    if model not in ("ev", "phev"):
        raise ScenarioError("model", f"expected 'ev' or 'phev', got {model!r}")
    horizon = _as_number(_require(data, "horizon", ""), "horizon")
    if horizon <= 0.0:
        raise ScenarioError("horizon", "must be positive")
    time_steps = _as_int(_require(data, "time_steps", ""), "time_steps")
    if time_steps < 2:
        raise ScenarioError("time_steps", "must be at least 2")

    space = _require(data, "space", "")
    if not isinstance(space, dict):
        raise ScenarioError("space", "expected a mapping")
    _reject_unknown(space, {"cells"}, "space")
    cells = _require(space, "cells", "space.")
    if model == "ev":
        cells = _as_int(cells, "space.cells")
        if cells < 4:
            raise ScenarioError("space.cells", "must be at least 4")
    else:
        if not isinstance(cells, list) or len(cells) != 2:
            raise ScenarioError("space.cells", "expected [n1, n2] for the 2D model")
        cells = [_as_int(v, f"space.cells[{k}]") for k, v in enumerate(cells)]
        if min(cells) < 4:
            raise ScenarioError("space.cells", "each axis needs at least 4 cells")

    series_spec = _require(data, "series", "")
    if not isinstance(series_spec, dict):
        raise ScenarioError("series", "expected a mapping")
    wanted = _EV_SERIES if model == "ev" else _PHEV_SERIES
    _reject_unknown(series_spec, set(wanted), "series")
    series = {}
    for key in wanted:
        series[key] = _validate_series_spec(_require(series_spec, key, "series."), f"series.{key}")

    costs_spec = _require(data, "costs", "")
    if not isinstance(costs_spec, dict):
        raise ScenarioError("costs", "expected a mapping")
    cost_keys = _EV_COSTS if model == "ev" else _PHEV_COSTS
    _reject_unknown(costs_spec, set(cost_keys), "costs")
    costs = {}
    for key in cost_keys:
        costs[key] = _validate_cost_spec(_require(costs_spec, key, "costs."), f"costs.{key}")

    price_spec = data.get("price", {})
    if not isinstance(price_spec, dict):
        raise ScenarioError("price", "expected a mapping")
    if model == "ev":
        _reject_unknown(price_spec, {"exponent", "coupled"}, "price")
        exponent = _as_number(price_spec.get("exponent", 2.0), "price.exponent")
        coupled = price_spec.get("coupled", True)
        if not isinstance(coupled, bool):
            raise ScenarioError("price.coupled", "expected a boolean")
        price = {"exponent": exponent, "coupled": coupled}
    else:
        _reject_unknown(price_spec, {"offset", "r2"}, "price")
        offset = _as_number(price_spec.get("offset", 0.5), "price.offset")
        if offset < 0.0:
            raise ScenarioError("price.offset", "must be nonnegative")
        r2 = _as_number(_require(price_spec, "r2", "price."), "price.r2")
        price = {"offset": offset, "r2": r2}

    density = _validate_density_spec(_require(data, "initial_density", ""), model, "initial_density")

    solver_spec = data.get("solver", {})
    if not isinstance(solver_spec, dict):
        raise ScenarioError("solver", "expected a mapping")
    _reject_unknown(solver_spec, set(_SOLVER_DEFAULTS), "solver")
    solver = dict(_SOLVER_DEFAULTS)
    for key, value in solver_spec.items():
        solver[key] = value
    solver["max_iters"] = _as_int(solver["max_iters"], "solver.max_iters")
    if solver["max_iters"] < 1:
        raise ScenarioError("solver.max_iters", "must be at least 1")
    solver["tol"] = _as_number(solver["tol"], "solver.tol")
    if solver["tol"] <= 0.0:
        raise ScenarioError("solver.tol", "must be positive")
    solver["damping"] = _as_number(solver["damping"], "solver.damping")
    if not 0.0 < solver["damping"] <= 1.0:
        raise ScenarioError("solver.damping", "must be in (0, 1]")

    name = data.get("name", name_default)
    if not isinstance(name, str) or not name:
        raise ScenarioError("name", "expected a nonempty string")

    return {
        "schema_version": SCHEMA_VERSION,
        "name": name,
        "model": model,
        "horizon": horizon,
        "time_steps": time_steps,
        "space": {"cells": cells},
        "series": series,
        "costs": costs,
        "price": price,
        "initial_density": density,
        "solver": solver,
    }


def bundled_scenarios() -> list[str]:
    root = resources.files("evmfg").joinpath("scenarios")
    return sorted(p.name.removesuffix(".yaml") for p in root.iterdir() if p.name.endswith(".yaml"))


def load_scenario(path_or_name: str | Path) -> ScenarioConfig:
    """Load a scenario from a file path or a bundled scenario name."""
    path = Path(path_or_name)
    if path.exists():
        text = path.read_text()
        base_dir = path.parent
        stem = path.stem
    else:
        name = str(path_or_name)
        candidate = resources.files("evmfg").joinpath("scenarios", f"{name}.yaml")
        if "/" in name or not candidate.is_file():
            raise ScenarioError("path", f"scenario file not found: {path_or_name}")
        text = candidate.read_text()
        base_dir = Path.cwd()
        stem = name
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError("document", f"not valid YAML: {exc}") from exc
    return ScenarioConfig(data=validate_config(raw, name_default=stem), base_dir=base_dir)


def write_scenario(config: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(canonical_yaml(config.data))


def canonical_yaml(data: dict) -> str:
    return yaml.safe_dump(data, sort_keys=True, default_flow_style=False)


def scenario_hash(data: dict) -> str:
    return hashlib.sha256(canonical_yaml(data).encode()).hexdigest()


def apply_overrides(config: ScenarioConfig, overrides: list[str]) -> ScenarioConfig:
    """Apply dotted key=value overrides and re-validate.

    Values parse as YAML scalars (so ``true``, ``0.5``, ``[1, 2]`` work).
    Bare solver keys are shorthand for ``solver.<key>``.
    """
    data = json.loads(json.dumps(config.data))  # deep copy of plain data
    for item in overrides:
        if "=" not in item:
            raise ScenarioError("override", f"expected key=value, got {item!r}")
        key, _, raw_value = item.partition("=")
        key = key.strip()
        if not key:
            raise ScenarioError("override", f"empty key in {item!r}")
        if "." not in key and key in _SOLVER_DEFAULTS:
            key = f"solver.{key}"
        try:
            value = yaml.safe_load(raw_value) if raw_value.strip() else ""
        except yaml.YAMLError as exc:
            raise ScenarioError(key, f"override value is not valid YAML: {exc}") from exc
        parts = key.split(".")
        target = data
        for part in parts[:-1]:
            if not isinstance(target, dict) or part not in target:
                raise ScenarioError(key, "no such scenario field")
            target = target[part]
        if not isinstance(target, dict):
            raise ScenarioError(key, "no such scenario field")
        target[parts[-1]] = value
    return ScenarioConfig(data=validate_config(data, name_default=config.name), base_dir=config.base_dir)


def _read_two_column_csv(path: Path, fld: str) -> tuple[np.ndarray, np.ndarray]:
    if not path.exists():
        raise ScenarioError(fld, f"file not found: {path}")
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise ScenarioError(fld, f"could not parse {path}: {exc}") from exc
    if table.shape[1] < 2:
        raise ScenarioError(fld, f"{path} needs two columns (t, value)")
    return table[:, 0], table[:, 1]


def _materialize_series(spec, tgrid: TimeGrid, base_dir: Path, fld: str) -> tuple[np.ndarray, bool]:
    """Return (one value per time node, whether it was resampled)."""
    if isinstance(spec, (int, float)):
        return np.full(tgrid.n_nodes, float(spec)), False
    if isinstance(spec, list):
        if len(spec) != tgrid.n_nodes:
            raise ScenarioError(fld, f"expected {tgrid.n_nodes} values (time_steps + 1), got {len(spec)}")
        return np.asarray(spec, dtype=float), False
    if "csv" in spec:
        times, values = _read_two_column_csv(base_dir / spec["csv"], fld)
        if np.any(np.diff(times) <= 0.0):
            raise ScenarioError(fld, "csv times must be strictly increasing")
        return np.interp(tgrid.nodes, times, values), True
    times = np.asarray(spec["times"], dtype=float)
    values = np.asarray(spec["values"], dtype=float)
    return np.interp(tgrid.nodes, times, values), True


def _make_cost_1d(spec: dict):
    if spec["kind"] == "zero":
        def running(t, x):
            return np.zeros_like(x)

        def terminal(x):
            return np.zeros_like(x)
    else:
        weight = spec["weight"]
        target = spec["target"]

        def running(t, x):
            return weight * (target - x) ** 2

        def terminal(x):
            return weight * (target - x) ** 2
    return running, terminal


def _make_cost_2d(spec: dict):
    if spec["kind"] == "zero":
        def running(t, z1, z2):
            return np.zeros_like(z1)

        def terminal(z1, z2):
            return np.zeros_like(z1)
    else:
        weight = spec["weight"]
        target = spec["target"]

        def running(t, z1, z2):
            return weight * (target - z1 - z2) ** 2

        def terminal(z1, z2):
            return weight * (target - z1 - z2) ** 2
    return running, terminal


def _normalize(values: np.ndarray, cell_volume: float, fld: str) -> np.ndarray:
    total = values.sum() * cell_volume
    if not total > 0.0:
        raise ScenarioError(fld, "density has no mass on the grid")
    return values / total


def _initial_density_1d(spec: dict, sgrid: SpaceGrid1D, base_dir: Path) -> np.ndarray:
    x = sgrid.nodes
    if spec["kind"] == "triangle":
        values = np.maximum(0.0, 1.0 - np.abs(x - spec["center"]) / spec["halfwidth"])
    elif spec["kind"] == "truncated_gaussian":
        values = np.exp(-((x - spec["mean"]) ** 2) / (2.0 * spec["variance"]))
    else:
        path = base_dir / spec["csv"]
        if not path.exists():
            raise ScenarioError("initial_density.csv", f"file not found: {path}")
        values = np.loadtxt(path, delimiter=",", ndmin=1)
        if values.shape != sgrid.shape:
            raise ScenarioError("initial_density.csv", f"expected {sgrid.n_cells} values, got {values.shape}")
        if values.min() < 0.0:
            raise ScenarioError("initial_density.csv", "histogram values must be nonnegative")
    return _normalize(values, sgrid.cell_volume, "initial_density")


def _initial_density_2d(spec: dict, sgrid: SpaceGrid2D, base_dir: Path) -> np.ndarray:
    z1, z2 = sgrid.meshes()
    if spec["kind"] == "truncated_gaussian":
        m1, m2 = spec["mean"]
        values = np.exp(-((z1 - m1) ** 2 + (z2 - m2) ** 2) / (2.0 * spec["variance"]))
    else:
        path = base_dir / spec["csv"]
        if not path.exists():
            raise ScenarioError("initial_density.csv", f"file not found: {path}")
        values = np.loadtxt(path, delimiter=",", ndmin=2)
        if values.shape != sgrid.shape:
            raise ScenarioError("initial_density.csv", f"expected shape {sgrid.shape}, got {values.shape}")
        if values.min() < 0.0:
            raise ScenarioError("initial_density.csv", "histogram values must be nonnegative")
    return _normalize(values, sgrid.cell_volume, "initial_density")


def build_problem(config: ScenarioConfig):
    """Instantiate (problem, solver options, resampled-series names)."""
    data = config.data
    tgrid = TimeGrid(t1=data["horizon"], n_steps=data["time_steps"])
    resampled: list[str] = []

    def series(key: str) -> np.ndarray:
        arr, was_resampled = _materialize_series(data["series"][key], tgrid, config.base_dir, f"series.{key}")
        if was_resampled:
            resampled.append(key)
        if not np.all(np.isfinite(arr)):
            raise ScenarioError(f"series.{key}", "contains non-finite values")
        return arr

    if data["model"] == "ev":
        sgrid = SpaceGrid1D(n_cells=data["space"]["cells"])
        g = series("g")
        d = series("d")
        sigma = series("sigma")
        h = series("H")
        if np.any(h <= 0.0):
            raise ScenarioError("series.H", "must be positive everywhere")
        if np.any(sigma < 0.0):
            raise ScenarioError("series.sigma", "must be nonnegative")
        f_run, _ = _make_cost_1d(data["costs"]["f"])
        _, kappa = _make_cost_1d(data["costs"]["kappa"])
        params = EvParams(
            g=g, sigma=sigma, H=h, d=d, f_cost=f_run, kappa=kappa,
            price_exponent=data["price"]["exponent"],
            demand_coupled=data["price"]["coupled"],
        )
        m0 = _initial_density_1d(data["initial_density"], sgrid, config.base_dir)
        problem = EvProblem(params=params, tgrid=tgrid, sgrid=sgrid, m0=m0, name=data["name"])
    else:
        n1, n2 = data["space"]["cells"]
        sgrid = SpaceGrid2D(n1=n1, n2=n2)
        g = series("g")
        q1 = series("Q1")
        q2 = series("Q2")
        if np.any(q1 <= 0.0):
            raise ScenarioError("series.Q1", "must be positive everywhere")
        if np.any(q2 <= 0.0):
            raise ScenarioError("series.Q2", "must be positive everywhere")
        s_run, _ = _make_cost_2d(data["costs"]["s"])
        _, xi = _make_cost_2d(data["costs"]["xi"])
        params = PhevParams(
            g=g, Q1=q1, Q2=q2, r2=data["price"]["r2"],
            s_cost=s_run, xi=xi, price_offset=data["price"]["offset"],
        )
        m0 = _initial_density_2d(data["initial_density"], sgrid, config.base_dir)
        problem = PhevProblem(params=params, tgrid=tgrid, sgrid=sgrid, m0=m0, name=data["name"])

    options = SolverOptions(
        max_iters=data["solver"]["max_iters"],
        tol=data["solver"]["tol"],
        damping=data["solver"]["damping"],
    )
    return problem, options, resampled


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _write_series_csv(path: Path, header: str, t: np.ndarray, columns: list[np.ndarray]) -> None:
    with open(path, "w") as handle:
        handle.write(header + "\n")
        for i in range(len(t)):
            row = [_fmt(t[i])] + [_fmt(col[i]) for col in columns]
            handle.write(",".join(row) + "\n")


def _write_field_csv_1d(path: Path, t: np.ndarray, x: np.ndarray, values: np.ndarray) -> None:
    with open(path, "w") as handle:
        handle.write("t,x,value\n")
        for i in range(len(t)):
            ti = _fmt(t[i])
            for j in range(len(x)):
                handle.write(f"{ti},{_fmt(x[j])},{_fmt(values[i, j])}\n")


def _write_field_csv_2d(path: Path, t: np.ndarray, z1: np.ndarray, z2: np.ndarray, values: np.ndarray) -> None:
    with open(path, "w") as handle:
        handle.write("t,z1,z2,value\n")
        for i in range(len(t)):
            ti = _fmt(t[i])
            for j in range(len(z1)):
                zj = _fmt(z1[j])
                for k in range(len(z2)):
                    handle.write(f"{ti},{zj},{_fmt(z2[k])},{_fmt(values[i, j, k])}\n")


def export_results(
    sol: MfeSolution,
    problem,
    config: ScenarioConfig,
    out_dir: str | Path,
    wall_time: float = 0.0,
    resampled: list[str] | None = None,
) -> list[str]:
    """Write the result CSV set and the run manifest; returns file names."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t = problem.tgrid.nodes
    if config.model == "ev":
        files = _export_ev(sol, problem, out, t)
    else:
        files = _export_phev(sol, problem, out, t)
    manifest = {
        "scenario": config.data,
        "scenario_hash": scenario_hash(config.data),
        "solver_version": _solver_version(),
        "model": config.model,
        "grid": {
            "time_steps": problem.tgrid.n_steps,
            "space_cells": list(problem.sgrid.shape),
        },
        "convergence": {
            "converged": sol.converged,
            "iterations": sol.iterations,
            "tol": sol.tol,
            "residuals": [float(r) for r in sol.residuals],
        },
        "resampled_series": sorted(resampled or []),
        "wall_time_s": wall_time,
    }
    with open(out / "manifest.json", "w") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    files.append("manifest.json")
    return files


def _solver_version() -> str:
    from . import __version__

    return __version__


def ev_purchases(m: np.ndarray, problem: EvProblem) -> np.ndarray:
    """Aggregate purchase series g + d/dt of the mean battery level."""
    return problem.params.g + mean_rate(m, problem.sgrid, problem.tgrid)


def _export_ev(sol: MfeSolution, problem: EvProblem, out: Path, t: np.ndarray) -> list[str]:
    x = problem.sgrid.nodes
    purchases = ev_purchases(sol.m, problem)
    regulated = purchases + problem.params.d
    baseline = float(purchases.mean()) + problem.params.d
    _write_field_csv_1d(out / "m.csv", t, x, sol.m)
    _write_field_csv_1d(out / "v.csv", t, x, sol.v)
    _write_field_csv_1d(out / "alpha.csv", t, x, sol.alpha)
    _write_series_csv(out / "price.csv", "t,value", t, [np.asarray(sol.p)])
    _write_series_csv(out / "purchases.csv", "t,value", t, [purchases])
    _write_series_csv(out / "total_consumption.csv", "t,regulated,baseline", t, [regulated, baseline])
    return ["m.csv", "v.csv", "alpha.csv", "price.csv", "purchases.csv", "total_consumption.csv"]


def _export_phev(sol: MfeSolution, problem: PhevProblem, out: Path, t: np.ndarray) -> list[str]:
    z1 = problem.sgrid.nodes1
    z2 = problem.sgrid.nodes2
    mu1, mu2 = sol.alpha
    _write_field_csv_2d(out / "m.csv", t, z1, z2, sol.m)
    _write_field_csv_2d(out / "v.csv", t, z1, z2, sol.v)
    _write_field_csv_2d(out / "mu1.csv", t, z1, z2, mu1)
    _write_field_csv_2d(out / "mu2.csv", t, z1, z2, mu2)
    _write_series_csv(out / "r1.csv", "t,value", t, [sol.p.r1])
    with open(out / "control_sections.csv", "w") as handle:
        handle.write("z2,z1,mu1,mu2\n")
        for target in (0.5, 0.9):
            k = int(np.argmin(np.abs(z2 - target)))
            zk = _fmt(z2[k])
            for j in range(len(z1)):
                handle.write(f"{zk},{_fmt(z1[j])},{_fmt(mu1[0, j, k])},{_fmt(mu2[0, j, k])}\n")
    return ["m.csv", "v.csv", "mu1.csv", "mu2.csv", "r1.csv", "control_sections.csv"]


def read_field_csv(path: str | Path, shape: tuple[int, ...]) -> np.ndarray:
    """Read a long-format field CSV back into (n_nodes, *space_shape)."""
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return table[:, -1].reshape(shape)


def read_series_csv(path: str | Path) -> np.ndarray:
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return table[:, 1]
