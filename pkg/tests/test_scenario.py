"""Scenario documents: validation, overrides, hashing, and run exports."""

import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from evmfg import (
    ScenarioError,
    apply_overrides,
    build_problem,
    bundled_scenarios,
    canonical_yaml,
    ev_purchases,
    integrate,
    load_scenario,
    mean_rate,
    read_field_csv,
    read_series_csv,
    scenario_hash,
    validate_config,
    write_scenario,
)
from evmfg.scenario import SCHEMA_TEXT, ScenarioConfig


def _minimal_ev(**tweaks):
    doc = {
        "schema_version": 1,
        "model": "ev",
        "horizon": 0.2,
        "time_steps": 12,
        "space": {"cells": 20},
        "series": {"g": 0.4, "d": 0.8, "sigma": 0.1, "H": 2.0},
        "costs": {
            "f": {"kind": "quadratic_shortage", "weight": 1.0, "target": 1.0},
            "kappa": {"kind": "quadratic_shortage", "weight": 1.0, "target": 1.0},
        },
        "initial_density": {"kind": "triangle", "center": 0.5, "halfwidth": 0.2},
    }
    doc.update(tweaks)
    return doc


def _minimal_phev(**tweaks):
    doc = {
        "schema_version": 1,
        "model": "phev",
        "horizon": 0.2,
        "time_steps": 8,
        "space": {"cells": [8, 8]},
        "series": {"g": 0.2, "Q1": 125.0, "Q2": 125.0},
        "costs": {
            "s": {"kind": "quadratic_shortage", "weight": 20.0, "target": 2.0},
            "xi": {"kind": "quadratic_shortage", "weight": 10.0, "target": 2.0},
        },
        "price": {"r2": 0.7},
        "initial_density": {"kind": "truncated_gaussian", "mean": [0.4, 0.6], "variance": 0.02},
    }
    doc.update(tweaks)
    return doc


# ---------------------------------------------------------------------------
# bundled scenarios


def test_bundled_scenario_names():
    assert bundled_scenarios() == ["ev_weekend", "phev_flat"]


def test_ev_weekend_contents():
    cfg = load_scenario("ev_weekend")
    d = cfg.data
    assert d["model"] == "ev"
    assert d["horizon"] == pytest.approx(0.2)
    assert d["time_steps"] == 143
    assert d["space"]["cells"] == 100
    assert d["price"] == {"exponent": 2.0, "coupled": True}
    assert d["initial_density"] == {"kind": "triangle", "center": 0.5, "halfwidth": 0.2}
    assert d["costs"]["f"] == {"kind": "quadratic_shortage", "weight": 1.0, "target": 1.0}
    assert d["series"]["sigma"] == pytest.approx(0.1)
    assert d["series"]["H"] == pytest.approx(30.0)
    # tabulated weekend series resample onto the fine grid
    assert isinstance(d["series"]["g"], dict) and "times" in d["series"]["g"]
    assert isinstance(d["series"]["d"], dict) and "times" in d["series"]["d"]


def test_phev_flat_contents():
    cfg = load_scenario("phev_flat")
    d = cfg.data
    assert d["model"] == "phev"
    assert d["horizon"] == pytest.approx(0.2)
    assert d["time_steps"] == 11
    assert d["space"]["cells"] == [16, 16]
    assert d["price"] == {"offset": 0.5, "r2": 0.7}
    assert d["series"]["g"] == pytest.approx(0.2)
    assert d["series"]["Q1"] == pytest.approx(125.0)
    assert d["initial_density"]["kind"] == "truncated_gaussian"
    assert d["initial_density"]["mean"] == [0.4, 0.6]
    assert d["initial_density"]["variance"] == pytest.approx(0.02)


def test_load_missing_scenario_raises():
    with pytest.raises(ScenarioError, match="not found"):
        load_scenario("no_such_scenario")


# ---------------------------------------------------------------------------
# round trip and hashing


def test_round_trip_preserves_document(tmp_path):
    cfg = load_scenario("ev_weekend")
    out = tmp_path / "copy.yaml"
    write_scenario(cfg, out)
    again = load_scenario(out)
    assert again.data == cfg.data
    assert scenario_hash(again.data) == scenario_hash(cfg.data)


def test_scenario_hash_ignores_key_order():
    a = validate_config(_minimal_ev())
    shuffled = dict(reversed(list(_minimal_ev().items())))
    b = validate_config(shuffled)
    assert scenario_hash(a) == scenario_hash(b)


def test_scenario_hash_tracks_values():
    a = validate_config(_minimal_ev())
    b = validate_config(_minimal_ev(horizon=0.3))
    assert scenario_hash(a) != scenario_hash(b)


def test_canonical_yaml_is_sorted_and_parseable():
    data = validate_config(_minimal_ev())
    text = canonical_yaml(data)
    assert yaml.safe_load(text) == data
    keys = [line.split(":")[0] for line in text.splitlines() if line and not line[0].isspace()]
    assert keys == sorted(keys)


# ---------------------------------------------------------------------------
# validation errors name the offending field


@pytest.mark.parametrize(
    "mutate, field_fragment",
    [
        (lambda d: d.pop("horizon"), "horizon"),
        (lambda d: d.update(horizon=-1.0), "horizon"),
        (lambda d: d.update(schema_version=2), "schema_version"),
        (lambda d: d.update(model="diesel"), "model"),
        (lambda d: d.update(time_steps=1), "time_steps"),
        (lambda d: d["space"].update(cells=2), "space.cells"),
        (lambda d: d.update(unexpected=1), "unexpected"),
        (lambda d: d["series"].pop("sigma"), "series.sigma"),
        (lambda d: d["series"].update(g=True), "series.g"),
        (lambda d: d["costs"]["f"].update(kind="cubic"), "costs.f.kind"),
        (lambda d: d["costs"]["f"].update(weight=-1.0), "costs.f.weight"),
        (lambda d: d["initial_density"].update(center=0.9), "initial_density"),
        (lambda d: d["initial_density"].update(halfwidth=0.0), "halfwidth"),
        (lambda d: d.update(solver={"damping": 0.0}), "solver.damping"),
        (lambda d: d.update(solver={"tol": -1.0}), "solver.tol"),
        (lambda d: d.update(price={"exponent": 2.0, "r2": 0.7}), "r2"),
    ],
)
def test_invalid_ev_documents(mutate, field_fragment):
    doc = _minimal_ev()
    mutate(doc)
    with pytest.raises(ScenarioError) as err:
        validate_config(doc)
    assert field_fragment in str(err.value)


def test_triangle_support_message_names_interval():
    doc = _minimal_ev(initial_density={"kind": "triangle", "center": 0.95, "halfwidth": 0.2})
    with pytest.raises(ScenarioError, match="not within"):
        validate_config(doc)


@pytest.mark.parametrize(
    "mutate, field_fragment",
    [
        (lambda d: d["space"].update(cells=16), "space.cells"),
        (lambda d: d["price"].pop("r2"), "price.r2"),
        (lambda d: d["price"].update(offset=-0.1), "price.offset"),
        (lambda d: d["initial_density"].update(mean=0.4), "initial_density.mean"),
        (lambda d: d["initial_density"].update(variance=0.0), "variance"),
        (lambda d: d.update(initial_density={"kind": "triangle", "center": 0.5, "halfwidth": 0.2}), "kind"),
    ],
)
def test_invalid_phev_documents(mutate, field_fragment):
    doc = _minimal_phev()
    mutate(doc)
    with pytest.raises(ScenarioError) as err:
        validate_config(doc)
    assert field_fragment in str(err.value)


def test_series_list_must_match_node_count(tmp_path):
    doc = _minimal_ev()
    doc["series"]["g"] = [0.4] * 5  # needs time_steps + 1 = 13
    cfg = ScenarioConfig(data=validate_config(doc), base_dir=tmp_path)
    with pytest.raises(ScenarioError, match="series.g"):
        build_problem(cfg)


def test_series_positivity_checks(tmp_path):
    doc = _minimal_ev()
    doc["series"]["H"] = 0.0
    cfg = ScenarioConfig(data=validate_config(doc), base_dir=tmp_path)
    with pytest.raises(ScenarioError, match="series.H"):
        build_problem(cfg)
    doc = _minimal_ev()
    doc["series"]["sigma"] = -0.1
    cfg = ScenarioConfig(data=validate_config(doc), base_dir=tmp_path)
    with pytest.raises(ScenarioError, match="series.sigma"):
        build_problem(cfg)


# ---------------------------------------------------------------------------
# series forms


def test_series_forms_materialize(tmp_path):
    csv_path = tmp_path / "d.csv"
    csv_path.write_text("t,value\n0.0,0.5\n0.2,0.9\n")
    doc = _minimal_ev(
        series={
            "g": 0.4,
            "d": {"csv": "d.csv"},
            "sigma": [0.1] * 13,
            "H": {"times": [0.0, 0.1, 0.2], "values": [2.0, 3.0, 2.0]},
        }
    )
    cfg = ScenarioConfig(data=validate_config(doc), base_dir=tmp_path)
    problem, options, resampled = build_problem(cfg)
    n = problem.tgrid.n_nodes
    np.testing.assert_allclose(problem.params.g, 0.4)
    np.testing.assert_allclose(problem.params.sigma, 0.1)
    np.testing.assert_allclose(problem.params.d, np.linspace(0.5, 0.9, n), atol=1e-12)
    assert problem.params.H[0] == pytest.approx(2.0)
    assert problem.params.H.max() == pytest.approx(3.0)
    # scalar and exact-length series are not resampled; csv and times are
    assert sorted(resampled) == ["H", "d"]
    assert options.max_iters == 200 and options.damping == 0.5


def test_initial_density_normalized(tmp_path):
    for doc in (_minimal_ev(), _minimal_phev()):
        cfg = ScenarioConfig(data=validate_config(doc), base_dir=tmp_path)
        problem, _, _ = build_problem(cfg)
        assert integrate(problem.m0, problem.sgrid) == pytest.approx(1.0, abs=1e-12)
        assert np.all(problem.m0 >= 0.0)


def test_histogram_density_from_csv(tmp_path):
    (tmp_path / "m0.csv").write_text("\n".join(["1.0"] * 10 + ["3.0"] * 10) + "\n")
    doc = _minimal_ev(initial_density={"kind": "histogram", "csv": "m0.csv"})
    cfg = ScenarioConfig(data=validate_config(doc), base_dir=tmp_path)
    problem, _, _ = build_problem(cfg)
    assert integrate(problem.m0, problem.sgrid) == pytest.approx(1.0, abs=1e-12)
    assert problem.m0[-1] == pytest.approx(3.0 * problem.m0[0])


# ---------------------------------------------------------------------------
# overrides


def test_apply_overrides_dotted_and_bare():
    cfg = load_scenario("ev_weekend")
    new = apply_overrides(cfg, ["solver.max_iters=7", "damping=1.0", "price.coupled=false"])
    assert new.data["solver"]["max_iters"] == 7
    assert new.data["solver"]["damping"] == 1.0
    assert new.data["price"]["coupled"] is False
    # the source config is untouched
    assert cfg.data["solver"]["max_iters"] == 200
    assert cfg.data["price"]["coupled"] is True


def test_apply_overrides_rejects_unknown_path():
    cfg = load_scenario("ev_weekend")
    with pytest.raises(ScenarioError, match="no such scenario field"):
        apply_overrides(cfg, ["nonexistent.key=1"])


def test_apply_overrides_rejects_bad_syntax():
    cfg = load_scenario("ev_weekend")
    with pytest.raises(ScenarioError, match="key=value"):
        apply_overrides(cfg, ["max_iters"])


def test_apply_overrides_revalidates():
    cfg = load_scenario("ev_weekend")
    with pytest.raises(ScenarioError, match="damping"):
        apply_overrides(cfg, ["damping=2.0"])


def test_schema_text_documents_the_keys():
    for key in ("schema_version", "model", "horizon", "time_steps", "space",
                "series", "costs", "price", "initial_density", "solver"):
        assert key in SCHEMA_TEXT
    assert "--set" in SCHEMA_TEXT


# ---------------------------------------------------------------------------
# exports


EV_FILES = {"m.csv", "v.csv", "alpha.csv", "price.csv", "purchases.csv",
            "total_consumption.csv", "manifest.json"}
PHEV_FILES = {"m.csv", "v.csv", "mu1.csv", "mu2.csv", "r1.csv",
              "control_sections.csv", "manifest.json"}


def test_ev_export_file_set(ev_run_dir):
    assert {p.name for p in Path(ev_run_dir).iterdir()} == EV_FILES


def test_phev_export_file_set(phev_run_dir):
    assert {p.name for p in Path(phev_run_dir).iterdir()} == PHEV_FILES


def test_ev_manifest_contents(ev_run, ev_run_dir):
    manifest = json.loads((Path(ev_run_dir) / "manifest.json").read_text())
    assert manifest["model"] == "ev"
    assert manifest["scenario"] == ev_run["config"].data
    assert manifest["scenario_hash"] == scenario_hash(ev_run["config"].data)
    assert manifest["grid"] == {"time_steps": 143, "space_cells": [100]}
    assert manifest["convergence"]["converged"] is True
    assert manifest["convergence"]["tol"] == pytest.approx(1e-6)
    assert len(manifest["convergence"]["residuals"]) == manifest["convergence"]["iterations"]
    assert manifest["resampled_series"] == ["d", "g"]
    assert manifest["wall_time_s"] > 0.0


def test_phev_manifest_contents(phev_run, phev_run_dir):
    manifest = json.loads((Path(phev_run_dir) / "manifest.json").read_text())
    assert manifest["model"] == "phev"
    assert manifest["grid"] == {"time_steps": 11, "space_cells": [16, 16]}
    assert manifest["convergence"]["converged"] is True
    assert manifest["scenario_hash"] == scenario_hash(phev_run["config"].data)


def test_ev_csv_round_trip(ev_run, ev_run_dir):
    sol = ev_run["solution"]
    shape = sol.m.shape
    out = Path(ev_run_dir)
    np.testing.assert_array_equal(read_field_csv(out / "m.csv", shape), sol.m)
    np.testing.assert_array_equal(read_field_csv(out / "v.csv", shape), sol.v)
    np.testing.assert_array_equal(read_field_csv(out / "alpha.csv", shape), sol.alpha)
    np.testing.assert_array_equal(read_series_csv(out / "price.csv"), sol.p)


def test_phev_csv_round_trip(phev_run, phev_run_dir):
    sol = phev_run["solution"]
    shape = sol.m.shape
    out = Path(phev_run_dir)
    np.testing.assert_array_equal(read_field_csv(out / "m.csv", shape), sol.m)
    np.testing.assert_array_equal(read_field_csv(out / "mu1.csv", shape), sol.alpha[0])
    np.testing.assert_array_equal(read_series_csv(out / "r1.csv"), sol.p.r1)


def test_purchases_series_definition(ev_run, ev_run_dir):
    sol = ev_run["solution"]
    problem = ev_run["problem"]
    purchases = read_series_csv(Path(ev_run_dir) / "purchases.csv")
    assert purchases.shape == (144,)
    expected = problem.params.g + mean_rate(sol.m, problem.sgrid, problem.tgrid)
    np.testing.assert_array_equal(purchases, ev_purchases(sol.m, problem))
    np.testing.assert_allclose(purchases, expected, atol=1e-12)


def test_total_consumption_columns(ev_run, ev_run_dir):
    lines = (Path(ev_run_dir) / "total_consumption.csv").read_text().splitlines()
    assert lines[0] == "t,regulated,baseline"
    assert len(lines) == 1 + 144
    table = np.loadtxt(Path(ev_run_dir) / "total_consumption.csv", delimiter=",", skiprows=1)
    problem = ev_run["problem"]
    purchases = ev_purchases(ev_run["solution"].m, problem)
    np.testing.assert_allclose(table[:, 1], purchases + problem.params.d, atol=1e-12)
    np.testing.assert_allclose(table[:, 2], purchases.mean() + problem.params.d, atol=1e-12)


def test_control_sections_rows(phev_run, phev_run_dir):
    lines = (Path(phev_run_dir) / "control_sections.csv").read_text().splitlines()
    assert lines[0] == "z2,z1,mu1,mu2"
    n1 = phev_run["problem"].sgrid.n1
    assert len(lines) == 1 + 2 * n1  # sections at z2 near 0.5 and 0.9


def test_export_is_deterministic(ev_run, tmp_path):
    from evmfg import export_results

    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        export_results(
            ev_run["solution"], ev_run["problem"], ev_run["config"], out,
            wall_time=1.0, resampled=ev_run["resampled"],
        )
    for name in sorted(EV_FILES):
        assert (a / name).read_bytes() == (b / name).read_bytes()
