"""Command-line interface.

Subcommands: solve (one problem to a snapshot CSV), homotopy (sensitivity
diagnostics for one pair), verify (full stability report for one scenario),
sweep (parameter sweep with slope fit), poincare (covering-constant study),
and suite (every scenario plus the suite CSV). All numeric output goes to
files under --out; stdout carries a short human-readable summary.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ParastabError
from .grid import ScalarField, lp_norm
from .homotopy import QuadratureRule, sensitivity_runs
from .poincare import estimate_lambda0
from .scenarios import (Scenario, load_suite, run_scenario, run_suite,
                        run_sweep, scenario_result_to_dict, suite_csv_rows,
                        SUITE_CSV_COLUMNS, _fingerprint, _fmt)
from .solver import solve
from .catalog import make_problem


def _common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", required=True, help="TOML suite configuration")
    sub.add_argument("--out", default="out", help="output directory")
    sub.add_argument("--seed", type=int, default=0, help="base random seed")
    sub.add_argument("--threads", type=int, default=1, help="worker threads")
    sub.add_argument("--store-every", type=int, default=None,
                     help="override snapshot stride")


def _pick_scenario(scenarios: list[Scenario], wanted: str | None) -> Scenario:
    if wanted is None:
        if len(scenarios) == 1:
            return scenarios[0]
        raise ParastabError(
            f"--scenario required; config defines {[s.id for s in scenarios]}"
        )
    for s in scenarios:
        if s.id == wanted:
            return s
    raise ParastabError(f"no scenario {wanted!r} in config")


def _scenario_with_overrides(scenario: Scenario, args) -> Scenario:
    if args.store_every is not None:
        import dataclasses
        scenario = dataclasses.replace(scenario, store_every=args.store_every)
    return scenario


def _write_snapshot_csv(path: Path, traj, grid) -> None:
    coords = [np.broadcast_to(c, grid.shape) for c in grid.coords()]
    headers = ["t"] + [f"x{i + 1}" for i in range(grid.dim)] + ["value"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(headers)
        for t, snap in zip(traj.times, traj.values):
            flat = [c.ravel() for c in coords] + [snap.ravel()]
            for row in zip(*flat):
                writer.writerow([_fmt(t)] + [_fmt(v) for v in row])


def cmd_solve(args) -> int:
    _, scenarios = load_suite(args.config)
    scenario = _scenario_with_overrides(_pick_scenario(scenarios, args.scenario), args)
    grid = scenario.grid()
    spec = scenario.problem_u if args.which == "u" else scenario.problem_v
    problem = make_problem(grid, spec)
    traj = solve(problem, grid, scenario.T, scenario.control())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"solve_{scenario.id}_{args.which}.csv"
    _write_snapshot_csv(path, traj, grid)
    print(f"solved {scenario.id}/{args.which}: {len(traj.times)} snapshots -> {path}")
    return 0


def cmd_homotopy(args) -> int:
    _, scenarios = load_suite(args.config)
    scenario = _scenario_with_overrides(_pick_scenario(scenarios, args.scenario), args)
    grid = scenario.grid()
    P = make_problem(grid, scenario.problem_u)
    Q = make_problem(grid, scenario.problem_v)
    rule = QuadratureRule.gauss_legendre(scenario.quad_nodes)
    runs = sensitivity_runs(P, Q, grid, scenario.T, scenario.control(),
                            rule, threads=args.threads)
    z0_sup = float(np.max(np.abs(P.initial_values(grid) - Q.initial_values(grid))))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"homotopy_{scenario.id}.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta", "t", "z_sup", "z_l2"])
        from .grid import full_region
        whole = full_region(grid)
        for run in runs:
            zt = run.z_trajectory
            for i, t in enumerate(zt.times):
                fld = ScalarField(grid, zt.values[i])
                writer.writerow([_fmt(run.theta), _fmt(t),
                                 _fmt(fld.sup_norm()), _fmt(lp_norm(fld, whole, 2.0))])
    from .homotopy import fitted_growth_constant
    c1 = fitted_growth_constant(runs, z0_sup)
    doc = {
        "created_at": datetime.now(timezone.utc).isoformat(),
        "scenario_id": scenario.id,
        "theta_nodes": list(rule.nodes),
        "z0_sup": z0_sup,
        "c1_fitted": c1,
        "environment": _fingerprint(args.seed, args.threads),
    }
    json_path = out / f"homotopy_{scenario.id}.json"
    json_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"homotopy {scenario.id}: c1_fitted={c1:.6g} -> {csv_path}, {json_path}")
    return 0


def cmd_verify(args) -> int:
    _, scenarios = load_suite(args.config)
    scenario = _scenario_with_overrides(_pick_scenario(scenarios, args.scenario), args)
    result = run_scenario(scenario, threads=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    timestamp = datetime.now(timezone.utc).isoformat()
    doc = scenario_result_to_dict(result, args.seed, args.threads, timestamp)
    json_path = out / f"scenario_{scenario.id}.json"
    json_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    csv_path = out / f"verify_{scenario.id}.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUITE_CSV_COLUMNS)
        writer.writerows(suite_csv_rows([result]))
    print(f"verify {scenario.id}: fitted_C={result.fitted_C:.6g}, "
          f"c1_fitted={result.c1_fitted:.6g} -> {json_path}")
    return 0


def cmd_sweep(args) -> int:
    _, scenarios = load_suite(args.config)
    scenario = _scenario_with_overrides(_pick_scenario(scenarios, args.scenario), args)
    result = run_sweep(scenario, threads=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"sweep_{scenario.id}.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "diffs_sum", "lhs"])
        for row in result["rows"]:
            writer.writerow([_fmt(row["value"]), _fmt(row["diffs_sum"]), _fmt(row["lhs"])])
    doc = dict(result)
    doc["created_at"] = datetime.now(timezone.utc).isoformat()
    doc["environment"] = _fingerprint(args.seed, args.threads)
    json_path = out / f"sweep_{scenario.id}.json"
    json_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"sweep {scenario.id}: slope={result['slope']:.4f} -> {csv_path}")
    return 0


def cmd_poincare(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dims = [args.dim] if args.dim else [1, 2]
    docs = {}
    for n in dims:
        result = estimate_lambda0(
            n, test_functions=args.functions, seed=args.seed)
        csv_path = out / f"poincare_n{n}.csv"
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["ball_measure", "max_ratio"])
            for m, r in zip(result.ball_measures, result.ratios):
                writer.writerow([_fmt(m), _fmt(r)])
        docs[f"n{n}"] = {
            "ball_measures": list(result.ball_measures),
            "ratios": list(result.ratios),
            "lambda0_estimate": result.lambda0_estimate,
        }
        print(f"poincare n={n}: lambda0={result.lambda0_estimate:.6g} -> {csv_path}")
    doc = {
        "created_at": datetime.now(timezone.utc).isoformat(),
        "environment": _fingerprint(args.seed, args.threads),
        **docs,
    }
    (out / "poincare.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_suite(args) -> int:
    suite_id, scenarios = load_suite(args.config)
    if args.store_every is not None:
        import dataclasses
        scenarios = [dataclasses.replace(s, store_every=args.store_every)
                     for s in scenarios]
    result = run_suite(scenarios, args.out, suite_id=suite_id,
                       seed=args.seed, threads=args.threads)
    print(f"suite {suite_id}: {len(result.results)} scenarios, "
          f"global_C={result.global_C:.6g} -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parastab",
        description="Solve pairs of quasilinear parabolic problems and "
                    "verify L^p stability bounds on desk-scale grids.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one problem, write snapshots")
    _common_flags(p_solve)
    p_solve.add_argument("--scenario", default=None)
    p_solve.add_argument("--which", choices=["u", "v"], default="u")
    p_solve.set_defaults(fn=cmd_solve)

    p_hom = sub.add_parser("homotopy", help="sensitivity diagnostics for one pair")
    _common_flags(p_hom)
    p_hom.add_argument("--scenario", default=None)
    p_hom.set_defaults(fn=cmd_homotopy)

    p_verify = sub.add_parser("verify", help="stability report for one scenario")
    _common_flags(p_verify)
    p_verify.add_argument("--scenario", default=None)
    p_verify.set_defaults(fn=cmd_verify)

    p_sweep = sub.add_parser("sweep", help="parameter sweep with slope fit")
    _common_flags(p_sweep)
    p_sweep.add_argument("--scenario", default=None)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_poin = sub.add_parser("poincare", help="covering-constant study")
    p_poin.add_argument("--out", default="out")
    p_poin.add_argument("--seed", type=int, default=0)
    p_poin.add_argument("--threads", type=int, default=1)
    p_poin.add_argument("--dim", type=int, choices=[1, 2], default=None)
    p_poin.add_argument("--functions", type=int, default=40)
    p_poin.set_defaults(fn=cmd_poincare)

    p_suite = sub.add_parser("suite", help="run every scenario in the config")
    _common_flags(p_suite)
    p_suite.set_defaults(fn=cmd_suite)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ParastabError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
