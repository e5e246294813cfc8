"""Stability verification toolkit for pairs of quasilinear parabolic problems."""

from .errors import (BadP, BlowUp, DimMismatch, EmptyList, EmptyRegion,
                     HypothesisViolation, NonFinite, ParastabError, ParseError,
                     RangeError, UnknownCatalogId, ZeroDenominator)
from .grid import (INF, Grid, Region, ScalarField, VectorField, disk,
                   full_region, gradient, interval, laplacian, lp_norm,
                   rectangle)
from .problems import (CoeffDiffs, CoefficientSet, FieldBounds,
                       ParabolicProblem, SampleBox, build_sample_boxes,
                       check_derivatives, check_ellipticity, measure_bounds,
                       sup_coeff_diffs)
from .catalog import family_names, finite_difference_partials, make_problem
from .solver import (StepControl, TimeField, TimeVectorField, Trajectory,
                     rhs, solve, solve_linear)
from .homotopy import (HomotopyRun, LinearizedCoefficients, QuadratureRule,
                       assemble_linearized, blend, curve_length,
                       curve_length_from_runs, fd_sensitivity,
                       fitted_growth_constant, sensitivity_runs,
                       solve_sensitivity)
from .estimate import (Envelope, Exponents, StabilityReport, exponents,
                       fit_constant, prepare_pair, report_from_pair,
                       rhs_shape, verify)
from .poincare import PoincareResult, estimate_lambda0, make_ball, poincare_ratio

__version__ = "0.1.0"
