"""Monotone steady profiles by first-integral quadrature.

A steady state of the saturating-diffusion law satisfies

    eps * h(U') = f(U) + C

for some integration constant ``C``, so with y(u) = f(u) + C the profile is
the inverse of the strictly monotone map

    x(u) = -ell + integral_{u_minus}^{u} sqrt(eps^2 - y^2) / y  ds.

The total length Phi(C) = x(u_plus) + ell is strictly monotone in ``C`` on
its admissible open interval and diverges at one end, so matching
``Phi(C) = 2*ell`` is a bracketing root solve.  Near the divergent end the
root distance ``delta`` from the interval edge is exponentially small in
``1/eps``; all solves therefore work in ``log(delta)`` where the problem is
well scaled.

The same machinery with ``eps / y`` in place of the square root produces
reference profiles for the classical linear-diffusion equation, used by the
time-stepper diagnostics when it runs in linear mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from . import core
from .core import Grid, GridField, ProblemSpec, INCREASING, DECREASING
from .errors import GapViolation, NoRoot, OutOfRange
from .quadrature import integrate


@dataclass(frozen=True)
class SteadyState:
    """A reconstructed steady profile with its closed-form slope field."""

    spec: ProblemSpec
    direction: str
    c_const: float
    profile: GridField
    slope: GridField


def _interior_critical_points(spec: ProblemSpec) -> list[float]:
    """Interior extrema of the flux, used as quadrature grade points."""
    lo, hi = spec.u_interval()
    u = np.linspace(lo, hi, 4097)
    dfu = np.asarray(spec.flux.deriv(u), dtype=float)
    sign = np.sign(dfu)
    out = []
    for i in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
        a, b = u[i], u[i + 1]
        fa = float(spec.flux.deriv(np.array([a]))[0])
        while b - a > 1e-12:
            mid = 0.5 * (a + b)
            fm = float(spec.flux.deriv(np.array([mid]))[0])
            if fa * fm <= 0.0:
                b = mid
            else:
                a, fa = mid, fm
        out.append(0.5 * (a + b))
    return out


def admissible_c_interval(spec: ProblemSpec) -> tuple[float, float]:
    """Open interval of integration constants compatible with monotonicity.

    Monotone profiles need 0 < |f + C| < eps along the whole path, which
    pins C to ``(-m, eps - M)`` for increasing data and ``(-eps - m, -M)``
    for decreasing data, with ``m, M`` the flux extrema between the
    boundary values.
    """
    m, M = core.flux_extrema(spec)
    if spec.direction == INCREASING:
        return (-m, spec.epsilon - M)
    return (-spec.epsilon - m, -M)


def phi(c_const: float, spec: ProblemSpec, *, abs_tol: float = 1e-11) -> float:
    """Total x-extent of the steady profile with constant ``c_const``.

    Always positive; strictly decreasing in ``c_const`` for increasing
    data and strictly increasing for decreasing data (equivalently,
    decreasing in ``kappa = -c_const``).  Raises ``OutOfRange`` outside
    the open admissible interval.
    """
    lo, hi = admissible_c_interval(spec)
    if not (lo < c_const < hi):
        raise OutOfRange(
            f"c_const {c_const!r} outside admissible open interval "
            f"({lo!r}, {hi!r})")
    eps = spec.epsilon

    def integrand(u):
        y = np.asarray(spec.flux.eval(u), dtype=float) + c_const
        arg = np.maximum((eps - y) * (eps + y), 0.0)
        return np.sqrt(arg) / y

    cuts = _interior_critical_points(spec)
    return integrate(integrand, spec.u_minus, spec.u_plus,
                     abs_tol=abs_tol, break_points=cuts)


def threshold(spec: ProblemSpec, direction: str) -> float:
    """Limiting admissible interval length (the infimum of ``phi``).

    Evaluates ``phi`` at the closed end of the constant's interval, where
    the saturating flux reaches its bound at the flux extremum.  Raises
    ``GapViolation`` when ``M - m >= eps`` (no constant is admissible) and
    ``DirectionMismatch`` via the existence conventions when the boundary
    ordering disagrees with ``direction``.
    """
    if direction != spec.direction:
        from .errors import DirectionMismatch
        raise DirectionMismatch(
            f"boundary data ordering supports {spec.direction!r}, "
            f"not {direction!r}")
    m, M = core.flux_extrema(spec)
    eps = spec.epsilon
    if M - m >= eps:
        raise GapViolation(
            f"flux oscillation {M - m!r} >= epsilon {eps!r}")
    c_limit = (eps - M) if direction == INCREASING else (-eps - m)

    def integrand(u):
        y = np.asarray(spec.flux.eval(u), dtype=float) + c_limit
        arg = np.maximum((eps - y) * (eps + y), 0.0)
        return np.sqrt(arg) / y

    cuts = _interior_critical_points(spec)
    return integrate(integrand, spec.u_minus, spec.u_plus,
                     abs_tol=1e-11, break_points=cuts)


def solve_integration_constant(spec: ProblemSpec, direction: str) -> float:
    """Root of ``phi(C) = 2*ell`` in the admissible interval.

    The root is sought in the logarithm of the distance ``delta`` from the
    divergent end of the interval, because near equilibrium that distance
    is exponentially small in ``1/eps``.  Raises ``NoRoot`` when the
    existence gate fails (the target length is at or below the threshold).
    """
    report = core.check_existence(spec, direction)
    if not report.exists:
        raise NoRoot(
            f"no admissible constant: gap_ok={report.gap_ok}, "
            f"c_threshold={report.c_threshold!r}, 2*ell={2 * spec.ell!r}")
    lo, hi = admissible_c_interval(spec)
    width = hi - lo
    target = 2.0 * spec.ell

    if spec.direction == INCREASING:
        # Divergent end at C -> lo+; phi decreasing in C.
        def c_of(delta):
            return lo + delta
    else:
        # Divergent end at C -> hi- (kappa -> M+); phi increasing in C.
        def c_of(delta):
            return hi - delta

    def g(t):
        return phi(c_of(math.exp(t)), spec, abs_tol=1e-12) - target

    t_hi = math.log(width) + math.log1p(-1e-9)
    g_hi = g(t_hi)
    if g_hi >= 0.0:
        raise NoRoot("profile longer than target even at the threshold end")
    t_lo = t_hi - 2.0
    g_lo = g(t_lo)
    while g_lo < 0.0:
        t_hi, g_hi = t_lo, g_lo
        t_lo -= 4.0
        if t_lo < -750.0:
            raise NoRoot("no sign change down to delta ~ 1e-326")
        g_lo = g(t_lo)
    t_root = brentq(g, t_lo, t_hi, xtol=1e-13, rtol=8.9e-16)
    c_root = c_of(math.exp(t_root))
    residual = abs(phi(c_root, spec, abs_tol=1e-12) - target)
    if residual > 1e-10 * max(1.0, target):
        raise NoRoot(f"root polish stalled with |phi - 2*ell| = {residual:.3e}")
    return c_root


def admissible_speed(spec: ProblemSpec) -> float:
    """Rankine-Hugoniot speed of the boundary-state jump, ``[f]/[u]``."""
    fm = float(spec.flux.eval(np.array([spec.u_minus]))[0])
    fp = float(spec.flux.eval(np.array([spec.u_plus]))[0])
    return (fp - fm) / (spec.u_plus - spec.u_minus)


def _tabulate_inverse(spec: ProblemSpec, c_const: float, grid: Grid,
                      kind: str) -> tuple[np.ndarray, np.ndarray]:
    """Tabulate the map x(u) finely enough to invert onto grid nodes.

    ``kind`` selects the slope law: "saturating" for the mean-curvature
    operator, "linear" for classical diffusion.  The u-mesh starts from a
    uniform core plus geometric boundary grading and is then refined until
    no tabulated x-step exceeds a quarter of the grid spacing, so the
    monotone interpolant that inverts the table resolves both the interior
    interface and the exponentially flat tails.
    """
    eps = spec.epsilon

    def dxdu(u):
        y = np.asarray(spec.flux.eval(u), dtype=float) + c_const
        if kind == "saturating":
            arg = np.maximum((eps - y) * (eps + y), 0.0)
            return np.sqrt(arg) / y
        return eps / y

    ua, ub = spec.u_minus, spec.u_plus
    span = ub - ua
    rel = np.unique(np.concatenate([
        np.linspace(0.0, 1.0, 257),
        2.0 ** -np.arange(1.0, 41.0),
        1.0 - 2.0 ** -np.arange(1.0, 41.0),
    ]))
    mesh = list(ua + rel * span)
    mesh[0], mesh[-1] = ua, ub

    seg_tol = 1e-14 * max(1.0, 2.0 * spec.ell)
    seg_x = [integrate(dxdu, mesh[j], mesh[j + 1], abs_tol=seg_tol)
             for j in range(len(mesh) - 1)]

    x_cap = 0.25 * grid.spacing
    for _ in range(64):
        du_floor = 64.0 * np.finfo(float).eps * max(abs(ua), abs(ub), 1e-3)
        worst = [j for j in range(len(seg_x))
                 if seg_x[j] > x_cap and abs(mesh[j + 1] - mesh[j]) > du_floor]
        if not worst:
            break
        for j in reversed(worst):
            mid = 0.5 * (mesh[j] + mesh[j + 1])
            left = integrate(dxdu, mesh[j], mid, abs_tol=seg_tol)
            right = integrate(dxdu, mid, mesh[j + 1], abs_tol=seg_tol)
            mesh.insert(j + 1, mid)
            seg_x[j] = left
            seg_x.insert(j + 1, right)

    x = -spec.ell + np.concatenate([[0.0], np.cumsum(seg_x)])
    return x, np.array(mesh)


def _invert_onto_grid(spec: ProblemSpec, grid: Grid, x_mesh: np.ndarray,
                      u_mesh: np.ndarray) -> np.ndarray:
    length_err = abs(x_mesh[-1] - spec.ell)
    if length_err > 1e-6 * max(1.0, spec.ell):
        raise OutOfRange(
            f"constant does not close the boundary value problem; profile "
            f"length misses 2*ell by {length_err:.3e}")
    # Monotone interpolation keeps the inverted profile monotone between
    # the tabulated samples and exact at them.
    interp = PchipInterpolator(x_mesh, u_mesh, extrapolate=True)
    values = interp(grid.nodes)
    values[0] = spec.u_minus
    values[-1] = spec.u_plus
    return values


def reconstruct(spec: ProblemSpec, c_const: float, grid: Grid) -> SteadyState:
    """Evaluate the steady profile for ``c_const`` on ``grid`` nodes.

    The profile is the monotone inverse of the quadrature map x(u); its
    slope field is filled in from the closed form
    ``u' = y / sqrt(eps^2 - y^2)`` rather than by differencing, so it is
    exact given the nodal values.  ``c_const`` must solve the length
    equation to about single precision or the inversion refuses.
    """
    lo, hi = admissible_c_interval(spec)
    if not (lo < c_const < hi):
        raise OutOfRange(
            f"c_const {c_const!r} outside admissible open interval "
            f"({lo!r}, {hi!r})")
    x_mesh, u_mesh = _tabulate_inverse(spec, c_const, grid, "saturating")
    values = _invert_onto_grid(spec, grid, x_mesh, u_mesh)
    y = np.asarray(spec.flux.eval(values), dtype=float) + c_const
    arg = np.maximum((spec.epsilon - y) * (spec.epsilon + y), 0.0)
    slope = y / np.sqrt(arg)
    return SteadyState(
        spec=spec,
        direction=spec.direction,
        c_const=c_const,
        profile=GridField(grid=grid, values=values, time=math.inf),
        slope=GridField(grid=grid, values=slope, time=math.inf),
    )


def linear_diffusion_constant(spec: ProblemSpec) -> float:
    """Integration constant for the classical linear-diffusion profile.

    Solves ``integral eps / (f + C) du = 2*ell``.  Unlike the saturating
    case the admissible interval is a half line, so existence never fails;
    the root solve still walks ``log(delta)`` because near-equilibrium
    constants sit exponentially close to the flux extremum.
    """
    m, M = core.flux_extrema(spec)
    eps = spec.epsilon
    target = 2.0 * spec.ell
    increasing = spec.direction == INCREASING

    def c_of(delta):
        return (-m + delta) if increasing else (-M - delta)

    def phi_lin(c):
        def integrand(u):
            return eps / (np.asarray(spec.flux.eval(u), dtype=float) + c)
        return integrate(integrand, spec.u_minus, spec.u_plus,
                         abs_tol=1e-12,
                         break_points=_interior_critical_points(spec))

    def g(t):
        return phi_lin(c_of(math.exp(t))) - target

    t_lo, t_hi = math.log(eps) - 2.0, math.log(eps) + 2.0
    while g(t_hi) > 0.0:
        t_hi += 4.0
        if t_hi > 700.0:
            raise NoRoot("linear-diffusion length equation has no root")
    while g(t_lo) < 0.0:
        t_lo -= 4.0
        if t_lo < -750.0:
            raise NoRoot("linear-diffusion length equation has no root")
    t_root = brentq(g, t_lo, t_hi, xtol=1e-13, rtol=8.9e-16)
    return c_of(math.exp(t_root))


def linear_diffusion_reconstruct(spec: ProblemSpec, c_const: float,
                                 grid: Grid) -> SteadyState:
    """Steady profile of the linear-diffusion equation on ``grid`` nodes."""
    x_mesh, u_mesh = _tabulate_inverse(spec, c_const, grid, "linear")
    values = _invert_onto_grid(spec, grid, x_mesh, u_mesh)
    y = np.asarray(spec.flux.eval(values), dtype=float) + c_const
    slope = y / spec.epsilon
    return SteadyState(
        spec=spec,
        direction=spec.direction,
        c_const=c_const,
        profile=GridField(grid=grid, values=values, time=math.inf),
        slope=GridField(grid=grid, values=slope, time=math.inf),
    )
