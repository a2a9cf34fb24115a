"""Sturm-Liouville analysis of the interface linearization.

Linearizing the evolution around a family element U gives a second-order
operator  L v = p v'' + q v' + r v  with

    p = eps / (1 + Ux^2)^{3/2},
    q = -3 eps Uxx Ux / (1 + Ux^2)^{5/2} - f'(U),
    r = -d/dx f'(U),

which becomes formally self-adjoint after multiplying by the weight
rho = exp(-(1/eps) * int_0^x f'(U)(1 + Ux^2)^{3/2}):

    rho L v = d/dx (rho p v') + rho r v,    eigenproblem  rho L v = lambda rho v.

The discrete eigenproblem mirrors this structure exactly: a flux-form
three-point stencil with harmonic-mean face coefficients, symmetrized by
the similarity transform v = w / sqrt(rho).  All weight ratios enter
through neighbor differences of log(rho), so the assembly never forms the
exponentially large or small weight values themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .core import GridField, ProblemSpec
from .errors import (ConvergenceFailure, DomainError, NonSmoothProfile,
                     UnsupportedConfiguration)


@dataclass(frozen=True)
class LinearizedCoefficients:
    """Coefficient fields of the linearized operator around one profile."""

    p: GridField
    q: GridField
    r: GridField
    rho: GridField
    a_field: GridField
    log_rho: np.ndarray
    xi: float
    spec: ProblemSpec


@dataclass(frozen=True)
class SpectralReport:
    """Leading eigenpairs plus the closed-form predictors."""

    eigenvalues: np.ndarray
    eigenfunctions: tuple[GridField, ...]
    lambda1_predicted: float
    lambda2_bound: float
    xi: float
    all_negative: bool


def _symmetric_burgers_ustar(spec: ProblemSpec) -> float:
    if spec.flux.label != "burgers":
        raise UnsupportedConfiguration(
            f"closed-form predictors need the quadratic flux, got "
            f"{spec.flux.label!r}")
    if abs(spec.u_minus + spec.u_plus) > 1e-12 * max(1.0, abs(spec.u_minus)):
        raise UnsupportedConfiguration(
            "closed-form predictors need symmetric boundary values")
    if spec.u_minus <= 0.0:
        raise UnsupportedConfiguration(
            "closed-form predictors need the decreasing orientation")
    return spec.u_minus


def assemble(element, spec: ProblemSpec) -> LinearizedCoefficients:
    """Coefficient fields of the linearization around ``element``.

    ``element`` is a family element (its profile must be smoothed:
    ``smoothing_width > 0``), or any object carrying a ``profile``
    GridField, or a GridField itself.  Derivatives are second-order
    differences; the weight is integrated by the trapezoid rule and
    anchored to 1 at x=0.
    """
    width = getattr(element, "smoothing_width", None)
    if width is not None and width == 0.0:
        raise NonSmoothProfile(
            "linearization needs a smoothed profile, got a kinked glue")
    profile: GridField = getattr(element, "profile", element)
    grid = profile.grid
    u = profile.values
    dx = grid.spacing
    eps = spec.epsilon

    ux = np.gradient(u, dx, edge_order=2)
    uxx = np.gradient(ux, dx, edge_order=2)
    one = 1.0 + ux * ux
    fp = np.asarray(spec.flux.deriv(u), dtype=float)
    fpp = np.asarray(spec.flux.second_deriv(u), dtype=float)

    p = eps * one ** -1.5
    q = -3.0 * eps * uxx * ux * one ** -2.5 - fp
    r = -fpp * ux
    a_vals = fp * one ** 1.5

    cum = np.concatenate([[0.0],
                          np.cumsum(0.5 * (a_vals[1:] + a_vals[:-1]) * dx)])
    anchor = float(np.interp(0.0, grid.nodes, cum))
    log_rho = -(cum - anchor) / eps
    rho = np.exp(log_rho)

    def field(vals):
        return GridField(grid=grid, values=vals, time=profile.time)

    return LinearizedCoefficients(
        p=field(p), q=field(q), r=field(r), rho=field(rho),
        a_field=field(a_vals), log_rho=log_rho,
        xi=float(getattr(element, "xi", math.nan)), spec=spec)


def eigenpairs(coeffs: LinearizedCoefficients, k: int = 6) -> SpectralReport:
    """Largest ``k`` eigenpairs of the weighted eigenproblem.

    Discretizes d/dx(rho p dv/dx) + rho r v = lambda rho v with Dirichlet
    walls on the interior nodes, symmetrizes with v = w/sqrt(rho), and
    solves the tridiagonal problem by Sturm bisection plus inverse
    iteration.  Eigenfunctions come back rho-orthonormal with the sign
    fixed so the extremal node is positive.
    """
    grid = coeffs.p.grid
    n_int = grid.n_cells - 1
    if k < 1:
        raise ValueError("k must be positive")
    if k > grid.n_cells // 4:
        raise ValueError(
            f"k={k} too large for n_cells={grid.n_cells}; need k <= n/4")
    dx = grid.spacing
    p = coeffs.p.values
    r = coeffs.r.values
    s = coeffs.log_rho

    # Face coefficient of the symmetrized operator between nodes j, j+1:
    # harmonic mean of rho*p expressed through the log-weight difference,
    # divided by the geometric mean of the node weights.
    ds = s[:-1] - s[1:]
    pa, pb = p[:-1], p[1:]
    face_sym = 2.0 * pa * pb / (pa * np.exp(0.5 * ds) + pb * np.exp(-0.5 * ds))
    # Same face value normalized by the left / right node weight instead.
    face_left = 2.0 * pa * pb / (pa * np.exp(ds) + pb)
    face_right = 2.0 * pa * pb / (pa + pb * np.exp(-ds))

    inv_h2 = 1.0 / (dx * dx)
    diag = (-(face_right[:-1] + face_left[1:]) * inv_h2 + r[1:-1])
    off = face_sym[1:-1] * inv_h2

    lo = max(n_int - k, 0)
    try:
        vals, vecs = eigh_tridiagonal(diag, off, select="i",
                                      select_range=(lo, n_int - 1))
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(
            f"tridiagonal eigensolve failed for k={k}, n={grid.n_cells}: "
            f"{exc}") from exc

    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]

    funcs = []
    # Undo the similarity transform: v = w / sqrt(rho * dx).
    scale = np.exp(-0.5 * s[1:-1]) / math.sqrt(dx)
    for j in range(vals.size):
        v = np.zeros(grid.n_cells + 1)
        v[1:-1] = vecs[:, j] * scale
        peak = int(np.argmax(np.abs(v)))
        if v[peak] < 0.0:
            v = -v
        funcs.append(GridField(grid=grid, values=v, time=math.inf))

    try:
        lam1_pred = lambda1_asymptotic(coeffs.xi, coeffs.spec) \
            if math.isfinite(coeffs.xi) else math.nan
    except UnsupportedConfiguration:
        lam1_pred = math.nan
    try:
        lam2_bnd = lambda2_bound(coeffs.spec)
    except UnsupportedConfiguration:
        lam2_bnd = math.nan

    return SpectralReport(
        eigenvalues=vals, eigenfunctions=tuple(funcs),
        lambda1_predicted=lam1_pred, lambda2_bound=lam2_bnd,
        xi=coeffs.xi, all_negative=bool(np.all(vals < 0.0)))


def lambda1_asymptotic(xi: float, spec: ProblemSpec) -> float:
    """Closed-form leading eigenvalue scale for the symmetric case.

    The prefactor is an order-of-magnitude statement only; the exponent
    carries the wall-distance asymptotics.
    """
    u_star = _symmetric_burgers_ustar(spec)
    eps = spec.epsilon
    return -(u_star ** 3 / eps) * math.exp(
        -u_star * (spec.ell - abs(xi)) / eps)


def lambda2_bound(spec: ProblemSpec) -> float:
    """Upper bound on the second eigenvalue in the symmetric case."""
    u_star = _symmetric_burgers_ustar(spec)
    return -u_star * u_star / (4.0 * spec.epsilon)


def hyperbolic_eigenfunctions(x, xi: float, spec: ProblemSpec,
                              which: str = "psi1",
                              lambda2: float | None = None):
    """Closed-form adjoint modes of the sharp-interface limit operator.

    ``psi1`` is the zero-eigenvalue mode (two boundary-correction
    factors); ``psi2`` the oscillatory second mode, which exists only
    while -4*eps*lambda2 - u*^2 >= 0, otherwise ``DomainError``.  The
    matching constants are chosen so both modes are continuous at ``xi``.
    """
    u_star = _symmetric_burgers_ustar(spec)
    eps = spec.epsilon
    ell = spec.ell
    x = np.asarray(x, dtype=float)
    left = x < xi
    if which == "psi1":
        out = np.where(
            left,
            (1.0 - math.exp(-u_star * (ell - xi) / eps))
            * (1.0 - np.exp(-u_star * (ell + x) / eps)),
            (1.0 - math.exp(-u_star * (ell + xi) / eps))
            * (1.0 - np.exp(-u_star * (ell - x) / eps)))
        return out if out.ndim else float(out)
    if which != "psi2":
        raise ValueError(f"unknown eigenfunction kind {which!r}")
    if lambda2 is None:
        raise ValueError("psi2 needs the lambda2 value")
    disc = -4.0 * eps * lambda2 - u_star * u_star
    if disc < 0.0:
        raise DomainError(
            f"second mode undefined: -4*eps*lambda2 - u*^2 = {disc:.3e} < 0")
    mu = math.sqrt(disc)
    # Cross-matched amplitudes make the two branches agree at x=xi.
    c_minus = math.exp(u_star * (xi - ell) / (2 * eps)) \
        * math.sin(mu * (xi - ell) / (2 * eps))
    c_plus = math.exp(-u_star * (xi + ell) / (2 * eps)) \
        * math.sin(mu * (xi + ell) / (2 * eps))
    out = np.where(
        left,
        c_minus * np.exp(-u_star * (x + ell) / (2 * eps))
        * np.sin(mu * (x + ell) / (2 * eps)),
        c_plus * np.exp(u_star * (x - ell) / (2 * eps))
        * np.sin(mu * (x - ell) / (2 * eps)))
    return out if out.ndim else float(out)


def linear_reference_lambda1(xi: float, spec: ProblemSpec) -> float:
    """Leading eigenvalue of the constant-diffusion comparison problem."""
    eps = spec.epsilon
    ell = spec.ell
    fpm = float(spec.flux.deriv(np.array([spec.u_minus]))[0])
    fpp = float(spec.flux.deriv(np.array([spec.u_plus]))[0])
    if fpm <= 0.0 or fpp >= 0.0:
        raise UnsupportedConfiguration(
            "linear reference needs inward characteristics at both walls")
    pref = 1.0 / (1.0 / fpm - 1.0 / fpp)
    return -(pref / eps) * (-fpp * math.exp(fpp * (ell - xi) / eps)
                            + fpm * math.exp(-fpm * (ell + xi) / eps))
