"""Evaluation of the L^p stability bound.

The bound compares ||u(t) - v(t)||_{L^p(E)} against

    A_E(t) ||phi - psi||_inf^{2 rho_p}
    + B(t) (diff_a + diff_divf + diff_fu + diff_h)^{rho_p} |E|^{eta_p}

with p- and dimension-dependent exponents

    rho_p = 1/2            eta_p = (2-p)/(2p) + 1/(2n)   for 1 <= p <= 2
    rho_p = 1/p            eta_p = 1/(np)                for p > 2

and envelopes (written here with their constant factored out)

    A_E(t) = C (|E|^eta_p + |E|^{1/p})                    for p <= 2
    A_E(t) = C (1 + t^{(p-2)/p})(|E|^eta_p + |E|^{1/p})   for p > 2
    B(t)   = C t            for p <= 2,      C (t + t^{2/p})  for p > 2.

No closed-form constant is available, so verification fits the smallest C
making the bound hold on each scenario and then studies the stability of
the fitted constant across grids and scenario sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import BadP, EmptyList, RangeError
from .grid import Region, ScalarField, lp_norm
from .homotopy import (HomotopyRun, QuadratureRule, curve_length_from_runs,
                       fitted_growth_constant, sensitivity_runs,
                       sensitivity_initial)
from .problems import (CoeffDiffs, ParabolicProblem, build_sample_boxes,
                       check_derivatives, check_ellipticity, measure_bounds,
                       sup_coeff_diffs)
from .solver import StepControl, Trajectory, solve

# Relative allowance for the accumulated discretization error of the
# sensitivity field entering a curve length (calibrated against the
# finite-difference cross-check, which observes relative gaps below 1e-4
# on catalog pairs at the default step control).
SENSITIVITY_BUDGET = 1e-4


@dataclass(frozen=True)
class Exponents:
    """The powers governing perturbation size and region measure."""

    rho_p: float
    eta_p: float
    p: float
    n: int


def exponents(p: float, n: int) -> Exponents:
    """Closed-form exponents; the two branches agree at p = 2."""
    if not p >= 1:
        raise BadP(f"p must be >= 1, got {p}")
    if n not in (1, 2):
        raise RangeError(f"n must be 1 or 2, got {n}")
    if p <= 2:
        rho = 0.5
        eta = (2.0 - p) / (2.0 * p) + 1.0 / (2.0 * n)
    else:
        rho = 1.0 / p
        eta = 1.0 / (n * p)
    return Exponents(rho_p=rho, eta_p=eta, p=p, n=n)


def a_envelope_shape(expo: Exponents, E_measure: float, t: float) -> float:
    """A_E(t) with C = 1."""
    base = E_measure ** expo.eta_p + E_measure ** (1.0 / expo.p)
    if expo.p <= 2:
        return base
    return (1.0 + t ** ((expo.p - 2.0) / expo.p)) * base


def b_envelope_shape(expo: Exponents, t: float) -> float:
    """B(t) with C = 1."""
    if expo.p <= 2:
        return t
    return t + t ** (2.0 / expo.p)


@dataclass(frozen=True)
class Envelope:
    """The two fitted envelopes of the bound for one (p, n, |E|)."""

    expo: Exponents
    E_measure: float
    C: float

    def A_E(self, t: float) -> float:
        return self.C * a_envelope_shape(self.expo, self.E_measure, t)

    def B(self, t: float) -> float:
        return self.C * b_envelope_shape(self.expo, t)


def rhs_shape(expo: Exponents, E_measure: float, t: float,
              phi_psi_sup: float, diffs_sum: float) -> float:
    """The right-hand side of the bound with C = 1."""
    if min(E_measure, t, phi_psi_sup, diffs_sum) < 0:
        raise RangeError("rhs_shape needs nonnegative inputs")
    return (
        a_envelope_shape(expo, E_measure, t) * phi_psi_sup ** (2.0 * expo.rho_p)
        + b_envelope_shape(expo, t) * diffs_sum ** expo.rho_p * E_measure ** expo.eta_p
    )


@dataclass(frozen=True)
class StabilityReport:
    """Measured left-hand sides, curve lengths, and the fitted constant for
    one (scenario, p, region)."""

    scenario_id: str
    p: float
    n: int
    E_measure: float
    times: tuple[float, ...]
    lhs: tuple[float, ...]
    curve_len: tuple[float, ...]
    curve_tol: float
    coeff_diffs: CoeffDiffs
    phi_psi_sup: float
    rhs: tuple[float, ...]
    fitted_C: float

    def envelope(self) -> Envelope:
        return Envelope(exponents(self.p, self.n), self.E_measure, self.fitted_C)


@dataclass
class PairComputation:
    """Everything solved once per problem pair and reused across every
    (p, region, t) of a scenario."""

    P: ParabolicProblem
    Q: ParabolicProblem
    u_traj: Trajectory
    v_traj: Trajectory
    runs: list[HomotopyRun]
    check_runs: Optional[list[HomotopyRun]]
    rule: QuadratureRule
    check_rule: Optional[QuadratureRule]
    K1: float
    K2: float
    phi_psi_sup: float
    c1_fitted: float


def prepare_pair(
    P: ParabolicProblem,
    Q: ParabolicProblem,
    grid,
    T: float,
    control: StepControl = StepControl(),
    rule: QuadratureRule = QuadratureRule.gauss_legendre(8),
    check_rule: Optional[QuadratureRule] = None,
    threads: int = 1,
    self_test: bool = True,
) -> PairComputation:
    """Solve both problems and the sensitivity family once for a scenario.

    When check_rule is given, an independent set of sensitivity runs at its
    nodes feeds the reported quadrature error budget.
    """
    if self_test:
        for prob in (P, Q):
            check_derivatives(prob)
            check_ellipticity(prob, T=max(T, 1.0))
    u_traj = solve(P, grid, T, control)
    v_traj = solve(Q, grid, T, control)
    bounds_u = measure_bounds(P, u_traj)
    bounds_v = measure_bounds(Q, v_traj)
    runs = sensitivity_runs(P, Q, grid, T, control, rule, threads)
    check_runs = None
    if check_rule is not None:
        check_runs = sensitivity_runs(P, Q, grid, T, control, check_rule, threads)
    z0 = sensitivity_initial(P, Q, grid)
    return PairComputation(
        P=P, Q=Q, u_traj=u_traj, v_traj=v_traj,
        runs=runs, check_runs=check_runs, rule=rule, check_rule=check_rule,
        K1=max(bounds_u.K1, bounds_v.K1),
        K2=max(bounds_u.K2, bounds_v.K2),
        phi_psi_sup=z0.sup_norm(),
        c1_fitted=fitted_growth_constant(runs, z0.sup_norm()),
    )


def report_from_pair(
    pair: PairComputation, E: Region, p: float, times: Sequence[float],
    scenario_id: str = "", samples: int = 4096,
) -> StabilityReport:
    """Assemble the stability report for one (p, region) from precomputed
    trajectories and sensitivity runs."""
    grid = E.grid
    expo = exponents(p, grid.dim)
    T = pair.u_traj.T
    flux_box, grad_box = build_sample_boxes(T, E, pair.K1, pair.K2)
    diffs = sup_coeff_diffs(pair.P, pair.Q, flux_box, grad_box, samples)
    lhs = []
    lengths = []
    quad_gap = 0.0
    for t in times:
        diff_field = ScalarField(grid, pair.u_traj.at(t) - pair.v_traj.at(t))
        lhs.append(lp_norm(diff_field, E, p))
        length = curve_length_from_runs(pair.runs, pair.rule, E, p, t)
        lengths.append(length)
        if pair.check_runs is not None:
            refined = curve_length_from_runs(pair.check_runs, pair.check_rule, E, p, t)
            quad_gap = max(quad_gap, abs(refined - length))
    curve_tol = 2.0 * quad_gap + SENSITIVITY_BUDGET * max(
        (a + b) for a, b in zip(lhs, lengths)
    ) + 1e-12
    shapes = [
        rhs_shape(expo, E.measure, t, pair.phi_psi_sup, diffs.total) for t in times
    ]
    fitted = fit_report_constant(lhs, shapes)
    return StabilityReport(
        scenario_id=scenario_id, p=p, n=grid.dim, E_measure=E.measure,
        times=tuple(float(t) for t in times),
        lhs=tuple(lhs), curve_len=tuple(lengths), curve_tol=float(curve_tol),
        coeff_diffs=diffs, phi_psi_sup=pair.phi_psi_sup,
        rhs=tuple(shapes), fitted_C=fitted,
    )


def fit_report_constant(lhs: Sequence[float], shapes: Sequence[float]) -> float:
    """Smallest C with lhs <= C * shape at every recorded time.

    A vanishing shape with vanishing lhs contributes nothing; a vanishing
    shape against a nonzero lhs would make the bound unsatisfiable and is
    reported as infinity.
    """
    c = 0.0
    for left, shape in zip(lhs, shapes):
        if shape > 0.0:
            c = max(c, left / shape)
        elif left > 1e-14:
            return math.inf
    return c


def verify(
    P: ParabolicProblem,
    Q: ParabolicProblem,
    E: Region,
    p: float,
    times: Sequence[float],
    control: StepControl = StepControl(),
    rule: QuadratureRule = QuadratureRule.gauss_legendre(8),
    scenario_id: str = "",
    pair: Optional[PairComputation] = None,
    threads: int = 1,
) -> StabilityReport:
    """Full pipeline for one scenario slice: solve the pair, measure the
    bound ingredients, and fit the constant.

    Passing a precomputed PairComputation skips the solves; scenario runners
    use this to share one pair across many (p, region) combinations.
    """
    if not times or max(times) <= 0:
        raise RangeError("need at least one positive report time")
    if pair is None:
        pair = prepare_pair(P, Q, E.grid, max(times), control, rule, threads=threads)
    return report_from_pair(pair, E, p, times, scenario_id)


def fit_constant(reports: Sequence[StabilityReport]) -> float:
    """One constant serving every report: the max of the per-report fits."""
    if not reports:
        raise EmptyList("fit_constant needs at least one report")
    return max(r.fitted_C for r in reports)
