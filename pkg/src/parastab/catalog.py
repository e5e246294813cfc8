"""Built-in problem families and initial-data shapes.

Every family is periodic in x with the period of the grid it is built on,
keeps the diffusion coefficient strictly positive, and hand-codes all the
partial derivatives entering the linearized equation. `make_problem` is the
registry entry point used by scenario configs; `finite_difference_partials`
wraps user-supplied coefficient callables with numerically differentiated
partials for experiments outside the catalog.

Families
    heat                constant diffusion, no flux, no source
    advection_reaction  constant diffusion, flux linear+quadratic in u,
                        affine source
    trig_coefficients   diffusion modulated in x (and optionally t), flux
                        and source with explicit x dependence
    poly_diffusion      diffusion a0 + eps u^2, linear flux and source
    gradient_diffusion  diffusion and source depending on |grad u|^2
                        through the bounded map r -> r/(1+r)
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import RangeError, UnknownCatalogId
from .grid import Grid, gradient_values
from .problems import CoefficientSet, FieldBounds, ParabolicProblem, second_derivative_sup

TWO_PI = 2.0 * math.pi


def _zero_scalar(t, x, u, q=None):
    return 0.0


def _vector_of(dim: int, value: float = 0.0):
    def fn(t, x, u, q=None):
        return (value,) * dim
    return fn


def _axis_list(value, dim: int, name: str) -> list[float]:
    if np.isscalar(value):
        return [float(value)] * dim
    vals = [float(v) for v in value]
    if len(vals) != dim:
        raise RangeError(f"{name} needs {dim} entries, got {len(vals)}")
    return vals


def _saturating(r):
    """Bounded smooth map r -> r/(1+r) used for gradient dependence."""
    return r / (1.0 + r)


def _saturating_prime(r):
    return 1.0 / (1.0 + r) ** 2


# Initial-data shapes. Each builder returns (callable, analytic C2 bound
# or None to fall back on a measured bound).

def _initial_constant(grid: Grid, value: float = 0.0, **_):
    return (lambda *x: np.full(np.broadcast(*x).shape, value)), abs(value)


def _initial_sine(grid: Grid, amplitude: float = 1.0, mode: int = 1, **_):
    w = TWO_PI * mode / grid.extent

    def fn(*x):
        out = amplitude * np.sin(w * x[0])
        for c in x[1:]:
            out = out * np.sin(w * c)
        return out

    return fn, abs(amplitude) * max(1.0, w, grid.dim * w * w)


def _initial_cosine(grid: Grid, amplitude: float = 1.0, mode: int = 1, **_):
    w = TWO_PI * mode / grid.extent

    def fn(*x):
        out = amplitude * np.cos(w * x[0])
        for c in x[1:]:
            out = out * np.cos(w * c)
        return out

    return fn, abs(amplitude) * max(1.0, w, grid.dim * w * w)


def _initial_bump(grid: Grid, amplitude: float = 1.0, center=0.5, kappa: float = 4.0, **_):
    w = TWO_PI / grid.extent
    centers = _axis_list(center, grid.dim, "center")

    def fn(*x):
        out = np.asarray(amplitude, float)
        for c, c0 in zip(x, centers):
            out = out * np.exp(kappa * (np.cos(w * (c - c0)) - 1.0))
        return out

    return fn, None


def _initial_two_mode(grid: Grid, a1: float = 1.0, k1: int = 1, a2: float = 0.5, k2: int = 2, **_):
    w = TWO_PI / grid.extent

    def fn(*x):
        return a1 * np.sin(w * k1 * x[0]) + a2 * np.cos(w * k2 * x[-1])

    wmax = w * max(abs(k1), abs(k2))
    return fn, (abs(a1) + abs(a2)) * max(1.0, wmax, wmax * wmax)


_INITIAL_KINDS = {
    "constant": _initial_constant,
    "sine": _initial_sine,
    "cosine": _initial_cosine,
    "bump": _initial_bump,
    "two_mode": _initial_two_mode,
}


def make_initial(grid: Grid, spec: dict):
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in _INITIAL_KINDS:
        raise UnknownCatalogId(f"unknown initial-data kind {kind!r}")
    fn, c2_bound = _INITIAL_KINDS[kind](grid, **spec)
    if c2_bound is None:
        vals = np.broadcast_to(np.asarray(fn(*grid.coords()), float), grid.shape)
        c2_bound = max(
            float(np.max(np.abs(vals))),
            max(float(np.max(np.abs(g))) for g in gradient_values(vals, grid.dx)),
            second_derivative_sup(vals, grid.dx),
        ) * 1.05
    return fn, max(c2_bound, 1e-12)


def _measure_initial(grid: Grid, fn) -> tuple[float, float]:
    vals = np.broadcast_to(np.asarray(fn(*grid.coords()), float), grid.shape)
    sup = float(np.max(np.abs(vals)))
    grad_sup = max(float(np.max(np.abs(g))) for g in gradient_values(vals, grid.dx))
    return sup, grad_sup


def _state_box(grid: Grid, fn) -> tuple[float, float]:
    """Hypothesis box half-widths: 1.5x the initial sups, floored away from 0."""
    sup, grad_sup = _measure_initial(grid, fn)
    return max(1.5 * sup, 0.5), max(1.5 * grad_sup, 0.5)


def _sampled_k2(coeffs: CoefficientSet, u_box: float, q_box: float) -> float:
    """Crude sampled bound on the flux/source derivative sups, recorded as
    hypothesis metadata."""
    rng = np.random.default_rng(7)
    n = 256
    t = rng.uniform(0.0, 1.0, n)
    x = tuple(rng.uniform(0.0, 1.0, n) for _ in range(coeffs.dim))
    u = rng.uniform(-u_box, u_box, n)
    q = tuple(rng.uniform(-q_box, q_box, n) for _ in range(coeffs.dim))
    sup = 0.0
    for comp in (coeffs.f_u(t, x, u), coeffs.f_uu(t, x, u), coeffs.h_q(t, x, u, q)):
        for arr in comp:
            sup = max(sup, float(np.max(np.abs(np.asarray(arr, float)))))
    for arr in (coeffs.div_x_f(t, x, u), coeffs.h_u(t, x, u, q)):
        sup = max(sup, float(np.max(np.abs(np.asarray(arr, float)))))
    return max(sup, 1e-12) * 1.05


def _finish(grid, coeffs, initial, c2_bound, a_star, a_sup, k1, label) -> ParabolicProblem:
    u_box, q_box = _state_box(grid, initial)
    k2 = _sampled_k2(coeffs, u_box, q_box)
    bounds = FieldBounds(a_star=a_star, a_sup=a_sup, k1=max(k1, 1e-12) * 1.05,
                         k2=k2, k3=c2_bound * 1.05)
    return ParabolicProblem(coeffs, initial, bounds, u_box, q_box, label)


def _build_heat(grid: Grid, a0: float = 1.0, **kw):
    if a0 <= 0:
        raise RangeError(f"heat: a0 must be positive, got {a0}")
    dim = grid.dim

    def a(t, x, u, q):
        return a0

    coeffs = CoefficientSet(
        dim=dim,
        a=a, a_u=_zero_scalar, a_q=_vector_of(dim),
        f=_vector_of(dim), f_u=_vector_of(dim), f_uu=_vector_of(dim),
        div_x_f=lambda t, x, u: 0.0, div_x_f_u=lambda t, x, u: 0.0,
        h=_zero_scalar, h_u=_zero_scalar, h_q=_vector_of(dim),
        zero_flux=True, zero_source=True,
    )
    return coeffs, a0, a0, a0


def _build_advection_reaction(grid: Grid, a0: float = 1.0, c=0.5, e=0.0,
                              r0: float = 0.0, r1: float = 0.0, **kw):
    if a0 <= 0:
        raise RangeError(f"advection_reaction: a0 must be positive, got {a0}")
    dim = grid.dim
    cs = _axis_list(c, dim, "c")
    es = _axis_list(e, dim, "e")

    coeffs = CoefficientSet(
        dim=dim,
        a=lambda t, x, u, q: a0,
        a_u=_zero_scalar, a_q=_vector_of(dim),
        f=lambda t, x, u: tuple(cj * u + ej * u * u for cj, ej in zip(cs, es)),
        f_u=lambda t, x, u: tuple(cj + 2.0 * ej * u for cj, ej in zip(cs, es)),
        f_uu=lambda t, x, u: tuple(2.0 * ej for ej in es),
        div_x_f=lambda t, x, u: 0.0,
        div_x_f_u=lambda t, x, u: 0.0,
        h=lambda t, x, u, q: r0 + r1 * u,
        h_u=lambda t, x, u, q: r1,
        h_q=_vector_of(dim),
        zero_flux=all(v == 0 for v in cs + es),
        zero_source=(r0 == 0 and r1 == 0),
    )
    return coeffs, a0, a0, a0


def _build_trig_coefficients(grid: Grid, a0: float = 1.0, eps_a: float = 0.2,
                             t_amp: float = 0.0, c=0.3, d=0.0,
                             r0: float = 0.0, r1: float = 0.0, **kw):
    dim = grid.dim
    w = TWO_PI / grid.extent
    amp = abs(eps_a) * (1.0 + abs(t_amp))
    if amp >= a0:
        raise RangeError(
            f"trig_coefficients: |eps_a|*(1+|t_amp|) = {amp} must stay below a0 = {a0}"
        )
    cs = _axis_list(c, dim, "c")
    ds = _axis_list(d, dim, "d")

    def shape(x):
        s = np.sin(w * x[0])
        if dim == 2:
            s = s * np.cos(w * x[1])
        return s

    def a(t, x, u, q):
        return a0 + eps_a * (1.0 + t_amp * np.sin(t)) * shape(x)

    coeffs = CoefficientSet(
        dim=dim,
        a=a, a_u=_zero_scalar, a_q=_vector_of(dim),
        f=lambda t, x, u: tuple(
            cj * np.cos(w * xj) * u + dj * np.sin(w * xj)
            for cj, dj, xj in zip(cs, ds, x)
        ),
        f_u=lambda t, x, u: tuple(cj * np.cos(w * xj) for cj, xj in zip(cs, x)),
        f_uu=lambda t, x, u: (0.0,) * dim,
        div_x_f=lambda t, x, u: sum(
            -cj * w * np.sin(w * xj) * u + dj * w * np.cos(w * xj)
            for cj, dj, xj in zip(cs, ds, x)
        ),
        div_x_f_u=lambda t, x, u: sum(
            -cj * w * np.sin(w * xj) for cj, xj in zip(cs, x)
        ),
        h=lambda t, x, u, q: r0 * np.sin(w * x[0]) + r1 * u,
        h_u=lambda t, x, u, q: r1,
        h_q=_vector_of(dim),
        zero_flux=all(v == 0 for v in cs + ds),
        zero_source=(r0 == 0 and r1 == 0),
    )
    return coeffs, a0 - amp, a0 + amp, a0 + amp


def _build_poly_diffusion(grid: Grid, a0: float = 1.0, eps: float = 0.2,
                          c=0.0, r1: float = 0.0, **kw):
    if a0 <= 0 or eps < 0:
        raise RangeError(f"poly_diffusion: need a0 > 0 and eps >= 0, got {a0}, {eps}")
    dim = grid.dim
    cs = _axis_list(c, dim, "c")

    coeffs = CoefficientSet(
        dim=dim,
        a=lambda t, x, u, q: a0 + eps * u * u,
        a_u=lambda t, x, u, q: 2.0 * eps * u,
        a_q=_vector_of(dim),
        f=lambda t, x, u: tuple(cj * u for cj in cs),
        f_u=lambda t, x, u: tuple(cs),
        f_uu=lambda t, x, u: (0.0,) * dim,
        div_x_f=lambda t, x, u: 0.0,
        div_x_f_u=lambda t, x, u: 0.0,
        h=lambda t, x, u, q: r1 * u,
        h_u=lambda t, x, u, q: r1,
        h_q=_vector_of(dim),
        zero_flux=all(v == 0 for v in cs),
        zero_source=(r1 == 0),
    )
    return coeffs, a0, None, None  # a_sup depends on the state box


def _build_gradient_diffusion(grid: Grid, a0: float = 1.0, eps: float = 0.2,
                              r1: float = 0.0, r2: float = 0.0, **kw):
    if a0 <= 0 or eps < 0:
        raise RangeError(f"gradient_diffusion: need a0 > 0 and eps >= 0, got {a0}, {eps}")
    dim = grid.dim

    def qsq(q):
        return sum(qj * qj for qj in q)

    coeffs = CoefficientSet(
        dim=dim,
        a=lambda t, x, u, q: a0 + eps * _saturating(qsq(q)),
        a_u=_zero_scalar,
        a_q=lambda t, x, u, q: tuple(
            eps * _saturating_prime(qsq(q)) * 2.0 * qj for qj in q
        ),
        f=_vector_of(dim), f_u=_vector_of(dim), f_uu=_vector_of(dim),
        div_x_f=lambda t, x, u: 0.0,
        div_x_f_u=lambda t, x, u: 0.0,
        h=lambda t, x, u, q: r1 * u + r2 * _saturating(qsq(q)),
        h_u=lambda t, x, u, q: r1,
        h_q=lambda t, x, u, q: tuple(
            r2 * _saturating_prime(qsq(q)) * 2.0 * qj for qj in q
        ),
        zero_flux=True,
        zero_source=(r1 == 0 and r2 == 0),
    )
    return coeffs, a0, a0 + eps, a0 + eps


_FAMILIES = {
    "heat": _build_heat,
    "advection_reaction": _build_advection_reaction,
    "trig_coefficients": _build_trig_coefficients,
    "poly_diffusion": _build_poly_diffusion,
    "gradient_diffusion": _build_gradient_diffusion,
}


def family_names() -> list[str]:
    return sorted(_FAMILIES)


def make_problem(grid: Grid, spec: dict) -> ParabolicProblem:
    """Build a catalog problem from a config mapping.

    The mapping holds a `family` name, family parameters, and an `initial`
    sub-mapping with a `kind` plus shape parameters.
    """
    spec = dict(spec)
    family = spec.pop("family", None)
    if family not in _FAMILIES:
        raise UnknownCatalogId(f"unknown problem family {family!r}")
    initial_spec = spec.pop("initial", {"kind": "sine"})
    initial, c2_bound = make_initial(grid, initial_spec)
    coeffs, a_star, a_sup, k1 = _FAMILIES[family](grid, **spec)
    if a_sup is None:
        # state-dependent upper bound: evaluate on the declared state box
        u_box, _ = _state_box(grid, initial)
        eps = float(spec.get("eps", 0.2))
        a0 = float(spec.get("a0", 1.0))
        a_sup = a0 + eps * u_box * u_box
        k1 = a_sup
    label = f"{family}({', '.join(f'{k}={v}' for k, v in sorted(spec.items()))})"
    return _finish(grid, coeffs, initial, c2_bound, a_star, a_sup, k1, label)


def finite_difference_partials(
    dim: int,
    a: Callable,
    f: Callable | None = None,
    h: Callable | None = None,
    step: float = 1e-6,
) -> CoefficientSet:
    """Wrap user coefficient callables with centered-difference partials.

    For experiments outside the catalog; the partials carry an O(step^2)
    consistency error, so prefer hand-coded derivatives for anything that
    feeds the linearized solver at tight tolerances.
    """
    zero_flux = f is None
    zero_source = h is None
    f = f or (lambda t, x, u: (0.0,) * dim)
    h = h or (lambda t, x, u, q: 0.0)
    e = step

    def bump(arrs, ax, delta):
        return tuple(v + delta if i == ax else v for i, v in enumerate(arrs))

    def a_u(t, x, u, q):
        return (a(t, x, u + e, q) - a(t, x, u - e, q)) / (2 * e)

    def a_q(t, x, u, q):
        return tuple(
            (a(t, x, u, bump(q, j, e)) - a(t, x, u, bump(q, j, -e))) / (2 * e)
            for j in range(dim)
        )

    def f_u(t, x, u):
        fp, fm = f(t, x, u + e), f(t, x, u - e)
        return tuple((fp[j] - fm[j]) / (2 * e) for j in range(dim))

    def f_uu(t, x, u):
        fp, f0, fm = f(t, x, u + e), f(t, x, u), f(t, x, u - e)
        return tuple((fp[j] - 2.0 * f0[j] + fm[j]) / (e * e) for j in range(dim))

    def div_x_f(t, x, u):
        return sum(
            (f(t, bump(x, j, e), u)[j] - f(t, bump(x, j, -e), u)[j]) / (2 * e)
            for j in range(dim)
        )

    def div_x_f_u(t, x, u):
        return sum(
            (f_u(t, bump(x, j, e), u)[j] - f_u(t, bump(x, j, -e), u)[j]) / (2 * e)
            for j in range(dim)
        )

    def h_u(t, x, u, q):
        return (h(t, x, u + e, q) - h(t, x, u - e, q)) / (2 * e)

    def h_q(t, x, u, q):
        return tuple(
            (h(t, x, u, bump(q, j, e)) - h(t, x, u, bump(q, j, -e))) / (2 * e)
            for j in range(dim)
        )

    return CoefficientSet(
        dim=dim, a=a, a_u=a_u, a_q=a_q,
        f=f, f_u=f_u, f_uu=f_uu, div_x_f=div_x_f, div_x_f_u=div_x_f_u,
        h=h, h_u=h_u, h_q=h_q,
        zero_flux=zero_flux, zero_source=zero_source,
    )
