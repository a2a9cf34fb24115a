"""Conservative finite-volume evolution and its run diagnostics.

Space discretization, on the node-centered uniform grid, writes the right
hand side as a flux difference

    P_i = ( F_{i+1/2} - F_{i-1/2} ) / dx,
    F = eps * h(face slope) - fhat,

so that summing ``P_i * dx`` over the interior telescopes to the boundary
flux difference exactly.  The convective face value ``fhat`` is a local
Lax-Friedrichs (Rusanov) flux evaluated on slope-limited reconstructed
states; the limited reconstruction keeps the scheme second-order accurate
on the smooth monotone profiles this package cares about while staying
robust when data steepen into an actual shock.  At the two faces touching
the boundary the one-sided difference replaces the missing limiter
argument, which preserves second-order consistency there.

Time integration is explicit RK4 under a CFL cap for transients, and BDF1
with a damped Newton solve for the long metastable plateaus.  The Newton
matrix is the pentadiagonal Jacobian of the full reconstruction stencil,
recovered exactly (to differencing accuracy) from five colored directional
differences of the right-hand side; step-size control halves on failure
and regrows geometrically after success.

The z-diagnostic ``z = eps*h(u_x) - f(u)`` has a sup norm that never
increases along solutions, and equals the steady integration constant on a
steady profile.  Both facts are monitored rather than assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from . import steady as steady_mod
from .core import (Grid, GridField, ProblemSpec, saturating_flux,
                   saturating_flux_inverse)
from .errors import (ExplicitCFLViolation, MultipleCrossings, NewtonDivergence,
                     NoCrossing)

DEFAULT_SLOPE_GAUGE = saturating_flux_inverse(0.75)

SCHEMES = ("explicit_rk4", "implicit_bdf1")
DIFFUSIONS = ("mean_curvature", "linear")


@dataclass(frozen=True)
class SmallnessReport:
    """Initial-data smallness gate for the contraction argument.

    ``lhs`` is ``eps*sup|h(u0_x)| + 2*sup|f(u0)|`` and the gate passes when
    it stays strictly below ``eps``.  ``c0_bound`` inverts the saturating
    flux at ``lhs/eps`` to give the implied uniform slope bound (infinite
    when the gate fails).
    """

    lhs: float
    alpha_ratio: float
    passes: bool
    c0_bound: float


@dataclass(frozen=True)
class StabilityRateReport:
    """Exponential decay rate certificate for small boundary data."""

    a_const: float
    b_const: float
    sup_fprime: float
    k_rate: float
    positive: bool


@dataclass
class Diagnostics:
    """Per-step scalar monitors of one evolution run."""

    time: np.ndarray
    sup_norm_u: np.ndarray
    sup_norm_z: np.ndarray
    l2_dist_to_steady: np.ndarray
    min_slope_sign: np.ndarray
    xi: np.ndarray
    dt: np.ndarray


@dataclass
class Trajectory:
    spec: ProblemSpec
    scheme: str
    diffusion: str
    snapshots: tuple[GridField, ...]
    interface_track: np.ndarray          # columns (time, xi), xi nan if none
    diagnostics: Diagnostics
    final_state: GridField
    steady_reference: object | None = None
    stopped_early: bool = False


def sup_norm(values: np.ndarray) -> float:
    return float(np.max(np.abs(values)))


def l2_norm(values: np.ndarray, dx: float) -> float:
    w = np.full(values.shape, dx)
    w[0] = w[-1] = 0.5 * dx
    return math.sqrt(float(np.sum(w * values * values)))


def _limited_slope(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Van Leer harmonic limiter, ``2ab/(a+b)`` on same-sign arguments.

    Chosen over minmod because it is differentiable wherever the two
    one-sided differences agree in sign, which is exactly the situation on
    the smooth monotone profiles the implicit stepper lingers on; a
    non-smooth limiter would put Jacobian kinks at the solution itself.
    """
    prod = a * b
    denom = a + b
    safe = np.where(np.abs(denom) > 0.0, denom, 1.0)
    return np.where(prod > 0.0, 2.0 * prod / safe, 0.0)


def _rhs(u: np.ndarray, spec: ProblemSpec, dx: float, diffusion: str) -> np.ndarray:
    f = spec.flux.eval
    fp = spec.flux.deriv
    d = np.diff(u)
    s = d / dx
    if diffusion == "mean_curvature":
        hface = s / np.sqrt(1.0 + s * s)
    else:
        hface = s
    dl = np.concatenate([d[:1], d])
    dr = np.concatenate([d, d[-1:]])
    lim = _limited_slope(dl, dr)
    u_left = u[:-1] + 0.5 * lim[:-1]
    u_right = u[1:] - 0.5 * lim[1:]
    # Smooth dominating wave speed: sqrt(fL'^2 + fR'^2) >= max(|fL'|, |fR'|).
    # A plain max would kink exactly at the odd-symmetric states the
    # implicit solver sits on, wrecking Newton convergence.
    fpl = np.asarray(fp(u_left), dtype=float)
    fpr = np.asarray(fp(u_right), dtype=float)
    a = np.sqrt(fpl * fpl + fpr * fpr)
    fhat = 0.5 * (f(u_left) + f(u_right)) - 0.5 * a * (u_right - u_left)
    flux = spec.epsilon * hface - fhat
    out = np.zeros_like(u)
    out[1:-1] = np.diff(flux) / dx
    return out


def _jacobian_banded(u: np.ndarray, spec: ProblemSpec, dx: float,
                     diffusion: str) -> np.ndarray:
    """Analytic pentadiagonal Jacobian of the operator.

    Written out by the chain rule through the limited reconstruction
    rather than recovered by differencing: the profile tails carry nodal
    differences many orders below any workable finite-difference probe, so
    a numerical Jacobian is badly wrong exactly where the slow dynamics
    live.  The limiter partials are smooth rationals and evaluate cleanly
    on those tiny differences.  Entry layout follows
    ``scipy.linalg.solve_banded`` with bandwidths (2, 2):
    ``ab[2 + i - j, j] = dP_i/du_j``; boundary rows are zero.
    """
    n = u.shape[0]
    nf = n - 1                      # number of faces
    fp = spec.flux.deriv
    fpp = spec.flux.second_deriv

    d = np.diff(u)
    s = d / dx
    if diffusion == "mean_curvature":
        hgrad = spec.epsilon * (1.0 + s * s) ** -1.5 / dx
    else:
        hgrad = np.full(nf, spec.epsilon / dx)

    # Van Leer partials per node: lim_j = phi(dl_j, dr_j).
    dl = np.concatenate([d[:1], d])
    dr = np.concatenate([d, d[-1:]])
    same = dl * dr > 0.0
    denom = np.where(same, dl + dr, 1.0)
    pa = np.where(same, 2.0 * dr * dr / (denom * denom), 0.0)
    pb = np.where(same, 2.0 * dl * dl / (denom * denom), 0.0)
    # d(lim_j)/d(u_{j-1}, u_j, u_{j+1}); edge nodes fold the duplicated
    # one-sided difference into the surviving neighbor.
    cm = -pa
    cc = pa - pb
    cp = pb.copy()
    cm[0] = 0.0
    cc[0] = -(pa[0] + pb[0])
    cp[0] = pa[0] + pb[0]
    cm[-1] = -(pa[-1] + pb[-1])
    cc[-1] = pa[-1] + pb[-1]
    cp[-1] = 0.0

    lim = _limited_slope(dl, dr)
    u_left = u[:-1] + 0.5 * lim[:-1]
    u_right = u[1:] - 0.5 * lim[1:]
    fpl = np.asarray(fp(u_left), dtype=float)
    fpr = np.asarray(fp(u_right), dtype=float)
    a = np.sqrt(fpl * fpl + fpr * fpr)
    jump = u_right - u_left
    safe_a = np.where(a > 0.0, a, 1.0)
    da_term_l = np.where(a > 0.0,
                         fpl * np.asarray(fpp(u_left), dtype=float) / safe_a,
                         0.0)
    da_term_r = np.where(a > 0.0,
                         fpr * np.asarray(fpp(u_right), dtype=float) / safe_a,
                         0.0)
    dfhat_dul = 0.5 * fpl + 0.5 * a - 0.5 * da_term_l * jump
    dfhat_dur = 0.5 * fpr - 0.5 * a - 0.5 * da_term_r * jump

    # d(uL_k)/du over m = k-1, k, k+1 and d(uR_k)/du over m = k, k+1, k+2.
    dul_m1 = 0.5 * cm[:-1]
    dul_0 = 1.0 + 0.5 * cc[:-1]
    dul_p1 = 0.5 * cp[:-1]
    dur_0 = -0.5 * cm[1:]
    dur_p1 = 1.0 - 0.5 * cc[1:]
    dur_p2 = -0.5 * cp[1:]

    # Face flux partials dF_k/du_m over m = k-1 .. k+2.
    g_m1 = -dfhat_dul * dul_m1
    g_0 = -hgrad - dfhat_dul * dul_0 - dfhat_dur * dur_0
    g_p1 = hgrad - dfhat_dul * dul_p1 - dfhat_dur * dur_p1
    g_p2 = -dfhat_dur * dur_p2

    # Row i of dP/du combines faces i and i-1; edge offsets whose column
    # falls off the grid carry zero coefficients and are simply skipped.
    ab = np.zeros((5, n))
    i = np.arange(1, n - 1)
    ok = i - 2 >= 0
    ab[4, i[ok] - 2] = -g_m1[i[ok] - 1] / dx
    ab[3, i - 1] = (g_m1[i] - g_0[i - 1]) / dx
    ab[2, i] = (g_0[i] - g_p1[i - 1]) / dx
    ab[1, i + 1] = (g_p1[i] - g_p2[i - 1]) / dx
    ok = i + 2 <= n - 1
    ab[0, i[ok] + 2] = g_p2[i[ok]] / dx
    return ab


def _explicit_cap(u: np.ndarray, spec: ProblemSpec, dx: float,
                  diffusion: str) -> float:
    amax = float(np.max(np.abs(spec.flux.deriv(u))))
    cap_conv = dx / amax if amax > 0.0 else math.inf
    cap_diff = dx * dx / spec.epsilon
    return 0.4 * min(cap_diff, cap_conv)


def _rk4_step(u: np.ndarray, spec: ProblemSpec, dx: float, dt: float,
              diffusion: str) -> np.ndarray:
    k1 = _rhs(u, spec, dx, diffusion)
    k2 = _rhs(u + 0.5 * dt * k1, spec, dx, diffusion)
    k3 = _rhs(u + 0.5 * dt * k2, spec, dx, diffusion)
    k4 = _rhs(u + dt * k3, spec, dx, diffusion)
    return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _bdf1_step(u_prev: np.ndarray, spec: ProblemSpec, dx: float, dt: float,
               diffusion: str, newton_tol: float = 1e-10,
               max_iter: int = 60) -> np.ndarray:
    """One backward Euler step solved by damped Newton on the full residual."""
    u = u_prev.copy()

    def residual(v):
        return v - u_prev - dt * _rhs(v, spec, dx, diffusion)

    r = residual(u)
    norm = sup_norm(r)
    for _ in range(max_iter):
        if norm <= newton_tol:
            return u
        ab = -dt * _jacobian_banded(u, spec, dx, diffusion)
        ab[2, :] += 1.0
        delta = solve_banded((2, 2), ab, -r)
        lam = 1.0
        while True:
            trial = u + lam * delta
            r_trial = residual(trial)
            norm_trial = sup_norm(r_trial)
            if norm_trial < norm * (1.0 - 1e-4 * lam) or norm_trial <= newton_tol:
                u, r, norm = trial, r_trial, norm_trial
                break
            lam *= 0.5
            if lam < 1.0 / 1024.0:
                raise NewtonDivergence(
                    f"no descent at dt={dt:.3e}, residual {norm:.3e}")
    if norm <= newton_tol:
        return u
    raise NewtonDivergence(
        f"residual {norm:.3e} above tolerance {newton_tol:.3e} "
        f"after {max_iter} iterations at dt={dt:.3e}")


def spatial_operator(field: GridField, spec: ProblemSpec,
                     diffusion: str = "mean_curvature") -> GridField:
    """Discrete right-hand side of the evolution on the field's grid.

    Zero on the two boundary nodes, where Dirichlet data pin the solution.
    Summing the interior values times dx telescopes to the difference of
    the two boundary face fluxes; tests rely on this conservation identity.
    """
    if diffusion not in DIFFUSIONS:
        raise ValueError(f"unknown diffusion {diffusion!r}")
    rhs = _rhs(field.values, spec, field.grid.spacing, diffusion)
    return GridField(grid=field.grid, values=rhs, time=field.time)


def advance(state: GridField, spec: ProblemSpec, dt: float,
            scheme: str = "implicit_bdf1",
            diffusion: str = "mean_curvature") -> GridField:
    """Take a single step of size ``dt`` from ``state``.

    Explicit RK4 refuses steps above its stability cap with
    ``ExplicitCFLViolation``; the implicit BDF1 solve raises
    ``NewtonDivergence`` when its damped iteration cannot meet tolerance.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    dx = state.grid.spacing
    if scheme == "explicit_rk4":
        cap = _explicit_cap(state.values, spec, dx, diffusion)
        if dt > cap * (1.0 + 1e-9):
            raise ExplicitCFLViolation(
                f"dt {dt:.3e} exceeds explicit cap {cap:.3e}")
        new = _rk4_step(state.values, spec, dx, dt, diffusion)
    else:
        new = _bdf1_step(state.values, spec, dx, dt, diffusion)
    return GridField(grid=state.grid, values=new, time=state.time + dt)


def z_values(field: GridField, spec: ProblemSpec) -> np.ndarray:
    """Face-centered values of ``z = eps*h(u_x) - f(u)``."""
    u = field.values
    s = np.diff(u) / field.grid.spacing
    u_face = 0.5 * (u[:-1] + u[1:])
    return (spec.epsilon * saturating_flux(s)
            - np.asarray(spec.flux.eval(u_face), dtype=float))


def z_monitor(field: GridField, spec: ProblemSpec) -> float:
    """Sup norm of the z-diagnostic; non-increasing along solutions."""
    return sup_norm(z_values(field, spec))


def check_smallness(u0: GridField, spec: ProblemSpec) -> SmallnessReport:
    s = np.diff(u0.values) / u0.grid.spacing
    lhs = (spec.epsilon * float(np.max(np.abs(saturating_flux(s))))
           + 2.0 * float(np.max(np.abs(spec.flux.eval(u0.values)))))
    alpha = lhs / spec.epsilon
    passes = alpha < 1.0
    c0 = saturating_flux_inverse(alpha) if passes else math.inf
    return SmallnessReport(lhs=lhs, alpha_ratio=alpha, passes=passes,
                           c0_bound=c0)


def stability_rate(spec: ProblemSpec, steady_state,
                   slope_gauge: float | None = None) -> StabilityRateReport:
    """Decay-rate certificate ``k = eps/B - (2*ell/pi)^2 * sup|f'|``.

    ``B = A^3`` where A bounds ``sqrt(1 + slope^2)`` both for the evolving
    solution (through the a-priori slope gauge, by default the inverse
    saturating flux at 3/4) and for the steady profile itself.  For fluxes
    with identically vanishing curvature the convective correction drops
    and the rate is ``eps/B`` outright.
    """
    gauge = DEFAULT_SLOPE_GAUGE if slope_gauge is None else slope_gauge
    slope_max = float(np.max(np.abs(steady_state.slope.values)))
    a_const = max(math.sqrt(1.0 + gauge * gauge),
                  math.sqrt(1.0 + slope_max * slope_max))
    b_const = a_const ** 3
    lo, hi = spec.u_interval()
    u = np.linspace(lo, hi, 8193)
    sup_fprime = float(np.max(np.abs(spec.flux.deriv(u))))
    curvature = float(np.max(np.abs(spec.flux.second_deriv(u))))
    if curvature <= 1e-12 * (1.0 + sup_fprime):
        k = spec.epsilon / b_const
    else:
        k = (spec.epsilon / b_const
             - (2.0 * spec.ell / math.pi) ** 2 * sup_fprime)
    return StabilityRateReport(a_const=a_const, b_const=b_const,
                               sup_fprime=sup_fprime, k_rate=k,
                               positive=k > 0.0)


def interface_position(field: GridField, policy: str = "strict") -> float:
    """Location of the sign change of the field.

    ``strict`` demands exactly one crossing and raises ``NoCrossing`` or
    ``MultipleCrossings`` otherwise; ``steepest`` breaks ties by local
    slope magnitude, which is what the long-run tracker wants while
    transient oscillations are still dying out.
    """
    if policy not in ("strict", "steepest"):
        raise ValueError(f"unknown policy {policy!r}")
    v = field.values
    x = field.grid.nodes
    crossings: list[tuple[float, float]] = []   # (position, |slope|)
    idx = np.nonzero(v != 0.0)[0]
    if idx.size == 0:
        raise NoCrossing("field vanishes identically")
    for k in range(idx.size - 1):
        i, j = idx[k], idx[k + 1]
        if v[i] * v[j] < 0.0:
            # Zero runs between i and j collapse to one crossing.
            if j == i + 1:
                pos = x[i] - v[i] * (x[j] - x[i]) / (v[j] - v[i])
            else:
                pos = 0.5 * (x[i + 1] + x[j - 1])
            slope = abs((v[j] - v[i]) / (x[j] - x[i]))
            crossings.append((float(pos), float(slope)))
    if not crossings:
        raise NoCrossing("field does not change sign")
    if policy == "strict":
        if len(crossings) > 1:
            raise MultipleCrossings(
                f"{len(crossings)} sign changes", count=len(crossings))
        return crossings[0][0]
    return max(crossings, key=lambda c: c[1])[0]


def _steady_reference(spec: ProblemSpec, grid: Grid, diffusion: str):
    from .errors import MetashockError
    try:
        if diffusion == "mean_curvature":
            c = steady_mod.solve_integration_constant(spec, spec.direction)
            return steady_mod.reconstruct(spec, c, grid)
        c = steady_mod.linear_diffusion_constant(spec)
        return steady_mod.linear_diffusion_reconstruct(spec, c, grid)
    except MetashockError:
        return None


def _slope_sign(v: np.ndarray) -> int:
    d = np.diff(v)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(v))))
    if np.all(d >= -tol):
        return 1
    if np.all(d <= tol):
        return -1
    return 0


def evolve(spec: ProblemSpec, u0: GridField, t_end: float,
           output_times=(), *, scheme: str = "implicit_bdf1",
           diffusion: str = "mean_curvature", warmup_time: float | None = None,
           dt_max: float | None = None, dt_time_fraction: float | None = 0.02,
           stop_threshold: float | None = None,
           newton_tol: float = 1e-10, steady_reference: bool = True) -> Trajectory:
    """Run the initial value problem to ``t_end`` with snapshot output.

    ``output_times`` are hit exactly (steps are clamped to land on them).
    With the implicit scheme the run starts with an explicit warm-up to
    ``warmup_time`` (default ``min(1, t_end/10)``) before BDF1 takes over
    with geometric step growth capped at ``dt_max`` (default
    ``t_end/500``) and, when ``dt_time_fraction`` is set, at that fraction
    of the elapsed time.  The proportional cap makes the steps log-uniform
    in t, which is what slow interface drift needs: the drift speed decays
    roughly like 1/t along the plateau, so a fixed fraction of t keeps the
    per-step position error bounded while still reaching t=1e6 in a few
    hundred steps.  ``stop_threshold`` ends the run early once the tracked
    interface modulus falls to it or below.  On an unrecoverable Newton
    failure the partially completed trajectory is attached to the raised
    ``NewtonDivergence``.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if diffusion not in DIFFUSIONS:
        raise ValueError(f"unknown diffusion {diffusion!r}")
    if t_end <= 0.0:
        raise ValueError("t_end must be positive")
    grid = u0.grid
    dx = grid.spacing
    scale = max(abs(spec.u_minus), abs(spec.u_plus), 1e-12)
    if (abs(u0.values[0] - spec.u_minus) > 1e-8 * scale
            or abs(u0.values[-1] - spec.u_plus) > 1e-8 * scale):
        raise ValueError("initial data do not match the boundary values")

    events = sorted(set(float(t) for t in output_times))
    for t in events:
        if t < 0.0 or t > t_end * (1.0 + 1e-12):
            raise ValueError(f"output time {t!r} outside [0, t_end]")

    ref = _steady_reference(spec, grid, diffusion) if steady_reference else None
    ref_values = ref.profile.values if ref is not None else None

    rows: list[tuple] = []
    track: list[tuple[float, float]] = []
    snapshots: list[GridField] = []

    def xi_of(values) -> float:
        try:
            return interface_position(GridField(grid=grid, values=values),
                                      policy="steepest")
        except NoCrossing:
            return math.nan

    def record(t: float, values: np.ndarray, dt_used: float):
        xi = xi_of(values)
        if ref_values is not None:
            dist = l2_norm(values - ref_values, dx)
        else:
            dist = math.nan
        rows.append((t, sup_norm(values),
                     z_monitor(GridField(grid=grid, values=values), spec),
                     dist, _slope_sign(values), xi, dt_used))
        track.append((t, xi))
        return xi

    u = np.array(u0.values, dtype=float)
    t = 0.0
    record(0.0, u, 0.0)
    if events and events[0] == 0.0:
        snapshots.append(GridField(grid=grid, values=u, time=0.0))
        events = events[1:]

    tiny = 1e-12 * max(1.0, t_end)
    stopped = False

    def next_event(now: float) -> float:
        for ev in events:
            if ev > now + tiny:
                return ev
        return t_end

    def at_event(now: float) -> bool:
        return any(abs(now - ev) <= tiny for ev in events)

    def maybe_stop(xi: float) -> bool:
        return (stop_threshold is not None and math.isfinite(xi)
                and abs(xi) <= stop_threshold)

    # Explicit phase: the whole run for explicit_rk4, else the warm-up.
    if scheme == "explicit_rk4":
        t_explicit_end = t_end
    else:
        t_explicit_end = min(t_end,
                             0.1 * t_end if warmup_time is None else warmup_time)
        if warmup_time is None:
            t_explicit_end = min(1.0, t_explicit_end)

    while t < t_explicit_end - tiny and not stopped:
        cap = _explicit_cap(u, spec, dx, diffusion)
        dt = min(cap, next_event(t) - t, t_explicit_end - t)
        u = _rk4_step(u, spec, dx, dt, diffusion)
        t += dt
        xi = record(t, u, dt)
        if at_event(t):
            ev = min(events, key=lambda e: abs(e - t))
            snapshots.append(GridField(grid=grid, values=u, time=ev))
            t = ev
        stopped = maybe_stop(xi)

    if scheme == "implicit_bdf1" and not stopped:
        cap = _explicit_cap(u, spec, dx, diffusion)
        dt_cap = t_end / 500.0 if dt_max is None else dt_max
        dt_sched = min(2.0 * cap, dt_cap)
        failures = 0

        def cap_now(now: float) -> float:
            if dt_time_fraction is None:
                return dt_cap
            return min(dt_cap, max(dt_time_fraction * now, 2.0 * cap))

        while t < t_end - tiny and not stopped:
            dt = min(dt_sched, cap_now(t), next_event(t) - t, t_end - t)
            try:
                u_new = _bdf1_step(u, spec, dx, dt, diffusion,
                                   newton_tol=newton_tol)
            except NewtonDivergence as exc:
                failures += 1
                dt_sched = 0.5 * dt
                if failures > 40 or dt_sched < tiny:
                    partial = _finish(spec, scheme, diffusion, grid, snapshots,
                                      track, rows, u, t, ref, stopped)
                    raise NewtonDivergence(
                        f"step size collapsed at t={t:.6g}: {exc}",
                        partial_trajectory=partial) from exc
                continue
            failures = 0
            u = u_new
            t += dt
            xi = record(t, u, dt)
            if at_event(t):
                ev = min(events, key=lambda e: abs(e - t))
                snapshots.append(GridField(grid=grid, values=u, time=ev))
                t = ev
            dt_sched = min(dt * 1.2, cap_now(t))
            stopped = maybe_stop(xi)

    return _finish(spec, scheme, diffusion, grid, snapshots, track, rows,
                   u, t, ref, stopped)


def _finish(spec, scheme, diffusion, grid, snapshots, track, rows, u, t,
            ref, stopped) -> Trajectory:
    arr = np.array(rows, dtype=float)
    diag = Diagnostics(
        time=arr[:, 0], sup_norm_u=arr[:, 1], sup_norm_z=arr[:, 2],
        l2_dist_to_steady=arr[:, 3], min_slope_sign=arr[:, 4],
        xi=arr[:, 5], dt=arr[:, 6])
    return Trajectory(
        spec=spec, scheme=scheme, diffusion=diffusion,
        snapshots=tuple(snapshots),
        interface_track=np.column_stack([arr[:, 0], arr[:, 5]]),
        diagnostics=diag,
        final_state=GridField(grid=grid, values=u, time=t),
        steady_reference=ref,
        stopped_early=stopped,
    )


def discrete_steady_state(spec: ProblemSpec, grid: Grid,
                          diffusion: str = "mean_curvature",
                          tol: float = 1e-13, max_iter: int = 200) -> GridField:
    """Newton-polish the quadrature profile into an exact discrete fixed point.

    The continuum profile carries an O(dx^2) residual under the discrete
    operator; this helper drives that residual to roundoff so that
    fixed-point properties of the implicit stepper can be tested without
    conflating them with truncation error.
    """
    if diffusion == "mean_curvature":
        c = steady_mod.solve_integration_constant(spec, spec.direction)
        u = steady_mod.reconstruct(spec, c, grid).profile.values.copy()
    else:
        c = steady_mod.linear_diffusion_constant(spec)
        u = steady_mod.linear_diffusion_reconstruct(spec, c, grid).profile.values.copy()
    dx = grid.spacing
    norm = sup_norm(_rhs(u, spec, dx, diffusion))
    for _ in range(max_iter):
        if norm <= tol:
            break
        r = _rhs(u, spec, dx, diffusion)
        ab = _jacobian_banded(u, spec, dx, diffusion)
        ab[2, 0] = ab[2, -1] = 1.0
        delta = solve_banded((2, 2), ab, -r)
        lam = 1.0
        while lam >= 1.0 / 1024.0:
            trial = u + lam * delta
            norm_trial = sup_norm(_rhs(trial, spec, dx, diffusion))
            if norm_trial < norm:
                u, norm = trial, norm_trial
                break
            lam *= 0.5
        else:
            break
    if norm > 100.0 * tol:
        raise NewtonDivergence(
            f"discrete steady residual stalled at {norm:.3e}")
    return GridField(grid=grid, values=u, time=math.inf)
