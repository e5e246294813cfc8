"""Scenario configuration, suite orchestration, and report persistence.

Configs are TOML: a [suite] table plus one [[scenario]] table per case.
Each scenario names a grid, two catalog problems, a horizon with report
times, the p values and regions of the verification matrix, quadrature and
step controls, and optionally a parameter sweep. `load_suite` validates
everything against the catalog and documented ranges; `run_suite` executes
scenarios (optionally in parallel, with a deterministic merge) and writes
one JSON report per scenario plus a flat CSV across the whole suite.

Outputs contain no wall-clock data except a single created_at field in the
JSON documents, so byte-identical reruns are the expected behavior.
"""

from __future__ import annotations

import csv
import json
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__ as _pkg_version
from .catalog import family_names, make_problem
from .errors import ParseError, RangeError, UnknownCatalogId
from .estimate import (PairComputation, StabilityReport, fit_constant,
                       prepare_pair, report_from_pair)
from .grid import Grid, Region, ScalarField, disk, full_region, interval, lp_norm, rectangle
from .homotopy import QuadratureRule
from .problems import build_sample_boxes, measure_bounds, sup_coeff_diffs
from .solver import StepControl, solve

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SUITE_CSV_COLUMNS = [
    "scenario_id", "n", "p", "E_measure", "t", "lhs", "curve_length",
    "diff_a", "diff_divf", "diff_fu", "diff_h", "rhs_shape", "fitted_C",
]


@dataclass(frozen=True)
class RegionSpec:
    shape: str
    measure: float
    center: tuple[float, ...]

    def build(self, grid: Grid) -> Region:
        if self.shape == "full":
            return full_region(grid)
        if self.shape == "interval":
            return interval(grid, self.center[0], self.measure)
        if self.shape == "disk":
            return disk(grid, (self.center[0], self.center[1]), self.measure)
        if self.shape == "rectangle":
            return rectangle(grid, (self.center[0], self.center[1]), self.measure)
        raise ParseError(f"unknown region shape {self.shape!r}")


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple[float, ...]
    p: float = 2.0


@dataclass(frozen=True)
class Scenario:
    id: str
    dim: int
    extent: float
    cells: int
    T: float
    p_values: tuple[float, ...]
    times: tuple[float, ...]
    problem_u: dict
    problem_v: dict
    regions: tuple[RegionSpec, ...]
    quad_nodes: int = 8
    quad_check_nodes: int = 4
    refine_check: bool = True
    cfl: float = 0.4
    dt_max: float = float("inf")
    store_every: int = 1
    samples: int = 4096
    sweep: Optional[SweepSpec] = None

    def grid(self, refine: int = 1) -> Grid:
        return Grid(self.dim, self.extent, self.cells * refine)

    def control(self, store_every: Optional[int] = None) -> StepControl:
        return StepControl(cfl_fraction=self.cfl, dt_max=self.dt_max,
                           store_every=store_every or self.store_every)


@dataclass
class ScenarioResult:
    scenario: Scenario
    reports: list[StabilityReport]
    c1_fitted: float
    K1: float
    K2: float
    phi_psi_sup: float

    @property
    def fitted_C(self) -> float:
        return fit_constant(self.reports)


@dataclass
class SuiteResult:
    suite_id: str
    results: list[ScenarioResult]
    seed: int
    threads: int

    @property
    def global_C(self) -> float:
        return max((r.fitted_C for r in self.results), default=0.0)


def _require(cond: bool, message: str, exc=RangeError) -> None:
    if not cond:
        raise exc(message)


def _as_float_tuple(value, name: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError) as err:
        raise ParseError(f"{name} must be a list of numbers") from err


def _validate_problem(spec, scenario_id: str, key: str) -> dict:
    if not isinstance(spec, dict):
        raise ParseError(f"scenario {scenario_id!r}: {key} must be a table")
    family = spec.get("family")
    if family not in family_names():
        raise UnknownCatalogId(
            f"scenario {scenario_id!r}: {key} references unknown family {family!r}"
        )
    return dict(spec)


def _parse_region(raw, scenario_id: str, dim: int) -> RegionSpec:
    if not isinstance(raw, dict) or "shape" not in raw:
        raise ParseError(f"scenario {scenario_id!r}: each region needs a shape")
    shape = raw["shape"]
    allowed = {1: {"interval", "full"}, 2: {"disk", "rectangle", "full"}}[dim]
    _require(shape in allowed,
             f"scenario {scenario_id!r}: region shape {shape!r} not valid in {dim}D",
             ParseError)
    measure = float(raw.get("measure", 0.0)) if shape != "full" else 0.0
    if shape != "full":
        _require(measure > 0, f"scenario {scenario_id!r}: region measure must be positive")
    center = raw.get("center", 0.5)
    center_t = tuple(float(c) for c in (center if isinstance(center, (list, tuple)) else [center] * dim))
    _require(len(center_t) == dim,
             f"scenario {scenario_id!r}: region center needs {dim} coordinates",
             ParseError)
    return RegionSpec(shape=shape, measure=measure, center=center_t)


def _parse_scenario(raw: dict) -> Scenario:
    sid = raw.get("id")
    if not isinstance(sid, str) or not sid:
        raise ParseError("every scenario needs a nonempty string id")
    dim = int(raw.get("dim", 1))
    _require(dim in (1, 2), f"scenario {sid!r}: dim must be 1 or 2")
    extent = float(raw.get("extent", 1.0))
    _require(extent > 0, f"scenario {sid!r}: extent must be positive")
    cells = int(raw.get("cells", 64))
    _require(cells >= 8, f"scenario {sid!r}: cells must be at least 8")
    T = float(raw.get("T", 0.0))
    _require(T > 0, f"scenario {sid!r}: T must be positive")
    p_values = _as_float_tuple(raw.get("p", [2.0]), f"scenario {sid!r}: p")
    _require(all(p >= 1 for p in p_values), f"scenario {sid!r}: every p must be >= 1")
    times = _as_float_tuple(raw.get("times", [T]), f"scenario {sid!r}: times")
    _require(all(0 < t <= T * (1 + 1e-12) for t in times),
             f"scenario {sid!r}: report times must lie in (0, T]")
    problem_u = _validate_problem(raw.get("problem_u"), sid, "problem_u")
    problem_v = _validate_problem(raw.get("problem_v"), sid, "problem_v")
    regions_raw = raw.get("region", [])
    if not regions_raw:
        raise ParseError(f"scenario {sid!r}: at least one region is required")
    regions = tuple(_parse_region(r, sid, dim) for r in regions_raw)
    quad = raw.get("quadrature", {})
    nodes = int(quad.get("nodes", 8))
    check_nodes = int(quad.get("check_nodes", 4))
    _require(nodes >= 2 and check_nodes >= 2,
             f"scenario {sid!r}: quadrature nodes must be at least 2")
    refine_check = bool(quad.get("refine_check", True))
    step = raw.get("step", {})
    cfl = float(step.get("cfl", 0.4))
    _require(0 < cfl <= 1, f"scenario {sid!r}: cfl must be in (0, 1]")
    dt_max = float(step.get("dt_max", float("inf")))
    store_every = int(step.get("store_every", 1))
    _require(store_every >= 1, f"scenario {sid!r}: store_every must be >= 1")
    samples = int(raw.get("samples", 4096))
    _require(samples >= 1000, f"scenario {sid!r}: samples must be >= 1000")
    sweep = None
    if "sweep" in raw:
        sw = raw["sweep"]
        parameter = sw.get("parameter")
        if not isinstance(parameter, str) or parameter.count(".") != 1:
            raise ParseError(
                f"scenario {sid!r}: sweep parameter must look like 'problem_v.a0'"
            )
        target, _ = parameter.split(".")
        _require(target in ("problem_u", "problem_v"),
                 f"scenario {sid!r}: sweep parameter must target problem_u or problem_v",
                 ParseError)
        values = _as_float_tuple(sw.get("values", []), f"scenario {sid!r}: sweep values")
        _require(len(values) >= 2, f"scenario {sid!r}: sweep needs at least 2 values")
        sweep = SweepSpec(parameter=parameter, values=values, p=float(sw.get("p", 2.0)))
    return Scenario(
        id=sid, dim=dim, extent=extent, cells=cells, T=T, p_values=p_values,
        times=times, problem_u=problem_u, problem_v=problem_v, regions=regions,
        quad_nodes=nodes, quad_check_nodes=check_nodes, refine_check=refine_check,
        cfl=cfl, dt_max=dt_max, store_every=store_every, samples=samples,
        sweep=sweep,
    )


def load_suite_dict(config: dict) -> tuple[str, list[Scenario]]:
    suite_id = str(config.get("suite", {}).get("id", "suite"))
    raw_scenarios = config.get("scenario", [])
    if not isinstance(raw_scenarios, list):
        raise ParseError("scenario must be an array of tables")
    scenarios = [_parse_scenario(raw) for raw in raw_scenarios]
    seen = set()
    for s in scenarios:
        if s.id in seen:
            raise ParseError(f"duplicate scenario id {s.id!r}")
        seen.add(s.id)
    return suite_id, scenarios


def load_suite(path: str | Path) -> tuple[str, list[Scenario]]:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            config = tomllib.load(fh)
    except FileNotFoundError as err:
        raise ParseError(f"config file not found: {path}") from err
    except tomllib.TOMLDecodeError as err:
        raise ParseError(f"invalid TOML in {path}: {err}") from err
    return load_suite_dict(config)


def scenario_to_dict(s: Scenario) -> dict:
    """Canonical mapping form of a resolved scenario (defaults filled)."""
    out = {
        "id": s.id, "dim": s.dim, "extent": s.extent, "cells": s.cells,
        "T": s.T, "p": list(s.p_values), "times": list(s.times),
        "problem_u": s.problem_u, "problem_v": s.problem_v,
        "region": [
            {"shape": r.shape, "measure": r.measure, "center": list(r.center)}
            for r in s.regions
        ],
        "quadrature": {"nodes": s.quad_nodes, "check_nodes": s.quad_check_nodes,
                       "refine_check": s.refine_check},
        "step": {"cfl": s.cfl, "dt_max": s.dt_max, "store_every": s.store_every},
        "samples": s.samples,
    }
    if s.sweep is not None:
        out["sweep"] = {"parameter": s.sweep.parameter,
                        "values": list(s.sweep.values), "p": s.sweep.p}
    return out


def serialize_suite(suite_id: str, scenarios: list[Scenario]) -> dict:
    return {"suite": {"id": suite_id},
            "scenario": [scenario_to_dict(s) for s in scenarios]}


def normalize_config(config: dict) -> dict:
    """The canonical form a config reduces to after validation."""
    return serialize_suite(*load_suite_dict(config))


def build_pair(scenario: Scenario, refine: int = 1,
               store_every: Optional[int] = None, threads: int = 1,
               with_check_rule: Optional[bool] = None) -> PairComputation:
    grid = scenario.grid(refine)
    P = make_problem(grid, scenario.problem_u)
    Q = make_problem(grid, scenario.problem_v)
    use_check = scenario.refine_check if with_check_rule is None else with_check_rule
    check_rule = QuadratureRule.gauss_legendre(scenario.quad_check_nodes) if use_check else None
    return prepare_pair(
        P, Q, grid, scenario.T, scenario.control(store_every),
        rule=QuadratureRule.gauss_legendre(scenario.quad_nodes),
        check_rule=check_rule, threads=threads,
    )


def run_scenario(scenario: Scenario, refine: int = 1, threads: int = 1) -> ScenarioResult:
    """Execute the full verification matrix of one scenario."""
    grid = scenario.grid(refine)
    pair = build_pair(scenario, refine=refine, threads=threads)
    reports = []
    for p in scenario.p_values:
        for region_spec in scenario.regions:
            region = region_spec.build(grid)
            reports.append(report_from_pair(
                pair, region, p, scenario.times, scenario.id, scenario.samples))
    return ScenarioResult(
        scenario=scenario, reports=reports, c1_fitted=pair.c1_fitted,
        K1=pair.K1, K2=pair.K2, phi_psi_sup=pair.phi_psi_sup,
    )


def run_sweep(scenario: Scenario, threads: int = 1) -> dict:
    """Solve the pair across the sweep values and fit the log-log slope of
    the endpoint gap against the summed coefficient differences."""
    if scenario.sweep is None:
        raise ParseError(f"scenario {scenario.id!r} has no sweep table")
    sweep = scenario.sweep
    target, key = sweep.parameter.split(".")
    grid = scenario.grid()
    control = scenario.control(store_every=max(scenario.store_every, 16))
    region = scenario.regions[0].build(grid)
    base_u = make_problem(grid, scenario.problem_u)
    u_traj = solve(base_u, grid, scenario.T, control)
    rows = []
    for value in sweep.values:
        spec = dict(scenario.problem_u if target == "problem_u" else scenario.problem_v)
        spec[key] = value
        swapped = {"problem_u": spec} if target == "problem_u" else {"problem_v": spec}
        spec_u = swapped.get("problem_u", scenario.problem_u)
        spec_v = swapped.get("problem_v", scenario.problem_v)
        P = make_problem(grid, spec_u)
        Q = make_problem(grid, spec_v)
        up = solve(P, grid, scenario.T, control) if target == "problem_u" else u_traj
        vp = solve(Q, grid, scenario.T, control)
        K1 = max(measure_bounds(P, up).K1, measure_bounds(Q, vp).K1)
        K2 = max(measure_bounds(P, up).K2, measure_bounds(Q, vp).K2)
        flux_box, grad_box = build_sample_boxes(scenario.T, region, K1, K2)
        diffs = sup_coeff_diffs(P, Q, flux_box, grad_box, scenario.samples)
        gap = lp_norm(ScalarField(grid, up.at(scenario.T) - vp.at(scenario.T)),
                      region, sweep.p)
        rows.append({"value": float(value), "diffs_sum": diffs.total, "lhs": gap})
    xs = np.log([r["diffs_sum"] for r in rows])
    ys = np.log([max(r["lhs"], 1e-300) for r in rows])
    slope = float(np.polyfit(xs, ys, 1)[0])
    return {"scenario_id": scenario.id, "parameter": sweep.parameter,
            "p": sweep.p, "rows": rows, "slope": slope}


def _fingerprint(seed: int, threads: int) -> dict:
    import scipy
    return {
        "package": _pkg_version,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "seed": seed,
        "threads": threads,
    }


def report_to_dict(r: StabilityReport) -> dict:
    return {
        "scenario_id": r.scenario_id, "p": r.p, "n": r.n,
        "E_measure": r.E_measure, "times": list(r.times),
        "lhs": list(r.lhs), "curve_len": list(r.curve_len),
        "curve_tol": r.curve_tol,
        "coeff_diffs": {"a": r.coeff_diffs.a, "div_f": r.coeff_diffs.div_f,
                        "f_u": r.coeff_diffs.f_u, "h": r.coeff_diffs.h},
        "phi_psi_sup": r.phi_psi_sup, "rhs_shape": list(r.rhs),
        "fitted_C": r.fitted_C,
    }


def scenario_result_to_dict(res: ScenarioResult, seed: int, threads: int,
                            timestamp: str) -> dict:
    return {
        "created_at": timestamp,
        "scenario": scenario_to_dict(res.scenario),
        "environment": _fingerprint(seed, threads),
        "measured": {"K1": res.K1, "K2": res.K2, "phi_psi_sup": res.phi_psi_sup,
                     "c1_fitted": res.c1_fitted},
        "reports": [report_to_dict(r) for r in res.reports],
        "fitted_C": res.fitted_C,
    }


def _fmt(x: float) -> str:
    return repr(float(x))


def suite_csv_rows(results: list[ScenarioResult]) -> list[list[str]]:
    rows = []
    for res in results:
        for r in res.reports:
            for t, lhs, length, shape in zip(r.times, r.lhs, r.curve_len, r.rhs):
                rows.append([
                    r.scenario_id, str(r.n), _fmt(r.p), _fmt(r.E_measure),
                    _fmt(t), _fmt(lhs), _fmt(length),
                    _fmt(r.coeff_diffs.a), _fmt(r.coeff_diffs.div_f),
                    _fmt(r.coeff_diffs.f_u), _fmt(r.coeff_diffs.h),
                    _fmt(shape), _fmt(r.fitted_C),
                ])
    return rows


def write_suite_outputs(result: SuiteResult, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    timestamp = datetime.now(timezone.utc).isoformat()
    for res in result.results:
        doc = scenario_result_to_dict(res, result.seed, result.threads, timestamp)
        path = out / f"scenario_{res.scenario.id}.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    with open(out / "suite.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUITE_CSV_COLUMNS)
        writer.writerows(suite_csv_rows(result.results))
    summary = {
        "created_at": timestamp,
        "suite_id": result.suite_id,
        "environment": _fingerprint(result.seed, result.threads),
        "global_C": result.global_C,
        "scenarios": [
            {"id": res.scenario.id, "fitted_C": res.fitted_C,
             "c1_fitted": res.c1_fitted}
            for res in result.results
        ],
    }
    (out / "suite.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def run_suite(scenarios: list[Scenario], out_dir: Optional[str | Path] = None,
              suite_id: str = "suite", seed: int = 0, threads: int = 1) -> SuiteResult:
    """Run every scenario and optionally persist reports.

    Scenario-level parallelism with a merge in input order; a single thread
    reproduces byte-identical outputs.
    """
    if threads > 1 and len(scenarios) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda s: run_scenario(s, threads=1), scenarios))
    else:
        results = [run_scenario(s, threads=threads) for s in scenarios]
    result = SuiteResult(suite_id=suite_id, results=results, seed=seed, threads=threads)
    if out_dir is not None:
        write_suite_outputs(result, out_dir)
    return result
