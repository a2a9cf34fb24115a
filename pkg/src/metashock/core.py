"""Problem data shared by all solver components.

The object of study is the scalar conservation law with saturating
diffusion on a symmetric interval ``(-ell, ell)``:

    u_t = eps * d/dx( h(u_x) ) - d/dx( f(u) ),     h(s) = s / sqrt(1 + s^2)

with Dirichlet boundary values ``u(-ell) = u_minus`` and
``u(+ell) = u_plus``.  The diffusive flux ``h`` is bounded by 1, so the
flux balance inside steady profiles only closes when the convective flux
``f`` oscillates by less than ``eps`` between the boundary states.  The
existence gate in this module checks that, together with the companion
requirement that the interval is long enough to accommodate the limiting
profile.

Everything downstream (steady profiles, time stepping, the interface
family, spectra) consumes the immutable types defined here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DirectionMismatch

DEFAULT_N_CELLS = 400

INCREASING = "increasing"
DECREASING = "decreasing"


def saturating_flux(s):
    """Bounded diffusion nonlinearity ``h(s) = s / sqrt(1 + s^2)``."""
    s = np.asarray(s, dtype=float)
    out = s / np.sqrt(1.0 + s * s)
    return float(out) if out.ndim == 0 else out


def saturating_flux_derivative(s):
    """``h'(s) = (1 + s^2)**(-3/2)``, everywhere in (0, 1]."""
    s = np.asarray(s, dtype=float)
    out = (1.0 + s * s) ** -1.5
    return float(out) if out.ndim == 0 else out


def saturating_flux_inverse(y):
    """Inverse of ``h`` on (-1, 1): ``y / sqrt(1 - y^2)``."""
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(y) >= 1.0):
        raise ValueError("saturating flux only takes values in (-1, 1)")
    out = y / np.sqrt(1.0 - y * y)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Flux:
    """Convective flux with the derivatives the solvers need.

    ``eval``, ``deriv`` and ``second_deriv`` are vectorized callables.
    ``convexity_floor`` is a known lower bound for ``f''`` (``None`` when
    the flux is not uniformly convex).  ``params`` records constructor
    arguments so a flux can be serialized into a config file.

    ``pair_diff(a, b)`` evaluates ``f(b) - f(a)`` without subtracting two
    nearly equal flux values.  The branch integrals divide by exactly such
    differences at points where they are ten or more orders of magnitude
    below ``f`` itself, so the factored form keeps their relative error at
    machine level where ``f(b) - f(a)`` computed literally would retain
    only the rounding noise of ``f``.  ``None`` means no stable form is
    known and callers fall back to the literal difference.
    """

    eval: object
    deriv: object
    second_deriv: object
    convexity_floor: float | None
    label: str
    params: tuple[tuple[str, float], ...] = ()
    pair_diff: object | None = None

    def __call__(self, u):
        return self.eval(u)


def burgers_flux() -> Flux:
    return Flux(
        eval=lambda u: 0.5 * np.square(u),
        deriv=lambda u: np.asarray(u, dtype=float) + 0.0,
        second_deriv=lambda u: np.ones_like(np.asarray(u, dtype=float)),
        convexity_floor=1.0,
        label="burgers",
        pair_diff=lambda a, b: 0.5 * (np.asarray(b, dtype=float) - a) * (np.asarray(b, dtype=float) + a),
    )


def zero_flux() -> Flux:
    return Flux(
        eval=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        deriv=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        second_deriv=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        convexity_floor=0.0,
        label="zero",
        pair_diff=lambda a, b: np.zeros_like(np.asarray(b, dtype=float)),
    )


def linear_flux(slope: float = 1.0) -> Flux:
    return Flux(
        eval=lambda u: slope * np.asarray(u, dtype=float),
        deriv=lambda u: np.full_like(np.asarray(u, dtype=float), slope),
        second_deriv=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        convexity_floor=0.0,
        label="linear",
        params=(("slope", float(slope)),),
        pair_diff=lambda a, b: slope * (np.asarray(b, dtype=float) - a),
    )


def tilted_burgers_flux(shift: float) -> Flux:
    """Quadratic flux with a linear tilt, ``f(u) = u^2/2 + shift*u``.

    Equivalent to evaluating the plain quadratic at ``u + shift`` up to an
    additive constant, which the steady-state integration constant absorbs;
    keeping ``f(0) = 0`` preserves the normalization the rest of the
    package relies on.
    """
    return Flux(
        eval=lambda u: 0.5 * np.square(u) + shift * np.asarray(u, dtype=float),
        deriv=lambda u: np.asarray(u, dtype=float) + shift,
        second_deriv=lambda u: np.ones_like(np.asarray(u, dtype=float)),
        convexity_floor=1.0,
        label="tilted_burgers",
        params=(("shift", float(shift)),),
        pair_diff=lambda a, b: (np.asarray(b, dtype=float) - a)
                               * (0.5 * (np.asarray(b, dtype=float) + a) + shift),
    )


_FLUX_FACTORIES = {
    "burgers": burgers_flux,
    "zero": zero_flux,
    "linear": linear_flux,
    "tilted_burgers": tilted_burgers_flux,
}


@dataclass(frozen=True)
class ProblemSpec:
    """Full description of one boundary value problem."""

    epsilon: float
    ell: float
    u_minus: float
    u_plus: float
    flux: Flux

    def __post_init__(self):
        if not (self.epsilon > 0.0):
            raise ValueError("epsilon must be positive")
        if not (self.ell > 0.0):
            raise ValueError("ell must be positive")

    @property
    def direction(self) -> str:
        if self.u_minus == self.u_plus:
            raise DirectionMismatch(
                "equal boundary values give a constant state, not a front")
        return INCREASING if self.u_minus < self.u_plus else DECREASING

    def u_interval(self) -> tuple[float, float]:
        return (min(self.u_minus, self.u_plus), max(self.u_minus, self.u_plus))


@dataclass(frozen=True)
class Grid:
    """Uniform node-centered grid on ``[-ell, ell]`` with ``n_cells`` cells."""

    ell: float
    n_cells: int = DEFAULT_N_CELLS
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_cells < 4:
            raise ValueError("need at least 4 cells")
        nodes = np.linspace(-self.ell, self.ell, self.n_cells + 1)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def spacing(self) -> float:
        return 2.0 * self.ell / self.n_cells


@dataclass(frozen=True)
class GridField:
    """Nodal values of a scalar field at one instant."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.nodes.shape:
            raise ValueError(
                f"field has {values.shape[0]} values for "
                f"{self.grid.nodes.shape[0]} nodes")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ExistenceReport:
    """Outcome of the two-part steady existence gate.

    ``gap_ok`` records ``M - m < eps`` where ``m, M`` are the extrema of
    the flux between the boundary values.  ``c_threshold`` is the limiting
    admissible interval length (``inf`` when the gap check already failed)
    and ``length_ok`` records ``2*ell > c_threshold``.
    """

    m: float
    M: float
    gap_ok: bool
    c_threshold: float
    length_ok: bool
    direction: str

    @property
    def exists(self) -> bool:
        return self.gap_ok and self.length_ok


def flux_extrema(spec: ProblemSpec) -> tuple[float, float]:
    """Extrema ``(m, M)`` of the flux over the closed boundary interval.

    Dense sampling (4096 cells) locates sign changes of ``f'``; each one is
    refined by bisection to width 1e-12 before the extrema are read off.
    The boundary values themselves always participate.
    """
    lo, hi = spec.u_interval()
    u = np.linspace(lo, hi, 4097)
    dfu = np.asarray(spec.flux.deriv(u), dtype=float)
    candidates = [lo, hi]
    sign = np.sign(dfu)
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
        candidates.append(0.5 * (a + b))
    # Flat stretches of f' (zero on a sample) are extrema candidates too.
    candidates.extend(u[sign == 0.0].tolist())
    fc = np.asarray(spec.flux.eval(np.array(candidates)), dtype=float)
    return float(fc.min()), float(fc.max())


def check_existence(spec: ProblemSpec, direction: str) -> ExistenceReport:
    """Run the existence gate for a monotone profile in ``direction``.

    Raises ``DirectionMismatch`` when the boundary ordering contradicts the
    requested monotonicity; a profile connecting ``u_minus`` to ``u_plus``
    can only be increasing when ``u_minus < u_plus``.
    """
    if direction not in (INCREASING, DECREASING):
        raise ValueError(f"unknown direction {direction!r}")
    if direction != spec.direction:
        raise DirectionMismatch(
            f"boundary data {spec.u_minus} -> {spec.u_plus} cannot support "
            f"an {direction} profile")
    m, M = flux_extrema(spec)
    gap_ok = (M - m) < spec.epsilon
    if gap_ok:
        from . import steady
        c = steady.threshold(spec, direction)
    else:
        c = math.inf
    length_ok = 2.0 * spec.ell > c
    return ExistenceReport(m=m, M=M, gap_ok=gap_ok, c_threshold=c,
                           length_ok=length_ok, direction=direction)


# ---------------------------------------------------------------------------
# Config grammar: flat "key = value" lines, '#' comments, optional [section]
# headers that are ignored.  Duplicate keys are an error so that a config
# file never silently shadows itself.
# ---------------------------------------------------------------------------

def parse_config(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value in {raw!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _parse_float(cfg: dict[str, str], key: str, default=None) -> float | None:
    if key not in cfg:
        return default
    try:
        return float(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: {cfg[key]!r} is not a number") from exc


def parse_scale(expr: str, epsilon: float) -> float:
    """Evaluate a boundary-amplitude expression.

    Accepted forms: a float literal, ``sqrt_eps``, ``eps``, ``eps/2``, or
    ``<float>*sqrt_eps`` / ``<float>*eps``.
    """
    expr = expr.strip()
    table = {
        "sqrt_eps": math.sqrt(epsilon),
        "eps": epsilon,
        "eps/2": 0.5 * epsilon,
    }
    if expr in table:
        return table[expr]
    if "*" in expr:
        factor, _, base = expr.partition("*")
        base = base.strip()
        if base not in ("sqrt_eps", "eps"):
            raise ConfigError(f"unknown scale base {base!r} in {expr!r}")
        try:
            return float(factor) * (math.sqrt(epsilon) if base == "sqrt_eps" else epsilon)
        except ValueError as exc:
            raise ConfigError(f"bad scale factor in {expr!r}") from exc
    try:
        return float(expr)
    except ValueError as exc:
        raise ConfigError(f"cannot parse amplitude expression {expr!r}") from exc


def flux_from_config(cfg: dict[str, str], epsilon: float) -> Flux:
    name = cfg.get("flux", "burgers")
    if name not in _FLUX_FACTORIES:
        raise ConfigError(f"unknown flux {name!r}; choices: "
                          + ", ".join(sorted(_FLUX_FACTORIES)))
    if name == "linear":
        return linear_flux(_parse_float(cfg, "flux_slope", 1.0))
    if name == "tilted_burgers":
        if "flux_shift" in cfg:
            return tilted_burgers_flux(_parse_float(cfg, "flux_shift"))
        if "flux_tilt" in cfg:
            return tilted_burgers_flux(_parse_float(cfg, "flux_tilt")
                                       * math.sqrt(epsilon))
        raise ConfigError("tilted_burgers flux needs flux_shift or flux_tilt")
    return _FLUX_FACTORIES[name]()


def spec_from_config(cfg: dict[str, str]) -> ProblemSpec:
    if "epsilon" not in cfg:
        raise ConfigError("config must set epsilon")
    epsilon = _parse_float(cfg, "epsilon")
    ell = _parse_float(cfg, "ell", 1.0)
    flux = flux_from_config(cfg, epsilon)

    has_star = "u_star" in cfg
    has_pair = "u_minus" in cfg or "u_plus" in cfg
    if has_star and has_pair:
        raise ConfigError("give either u_star or u_minus/u_plus, not both")
    if has_star:
        u_star = parse_scale(cfg["u_star"], epsilon)
        if u_star <= 0.0:
            raise ConfigError("u_star must be positive")
        direction = cfg.get("direction", DECREASING)
        if direction == DECREASING:
            u_minus, u_plus = u_star, -u_star
        elif direction == INCREASING:
            u_minus, u_plus = -u_star, u_star
        else:
            raise ConfigError(f"unknown direction {direction!r}")
    elif has_pair:
        if "u_minus" not in cfg or "u_plus" not in cfg:
            raise ConfigError("u_minus and u_plus must be given together")
        u_minus = _parse_float(cfg, "u_minus")
        u_plus = _parse_float(cfg, "u_plus")
        if "direction" in cfg:
            want = cfg["direction"]
            have = INCREASING if u_minus < u_plus else DECREASING
            if want != have:
                raise ConfigError(
                    f"direction {want!r} contradicts u_minus/u_plus ordering")
    else:
        raise ConfigError("config must set u_star or u_minus/u_plus")
    return ProblemSpec(epsilon=epsilon, ell=ell, u_minus=u_minus,
                       u_plus=u_plus, flux=flux)


def spec_to_config(spec: ProblemSpec) -> str:
    """Serialize a spec back into the flat config grammar (round-trippable)."""
    lines = [
        f"epsilon = {spec.epsilon!r}",
        f"ell = {spec.ell!r}",
        f"flux = {spec.flux.label}",
    ]
    for key, value in spec.flux.params:
        lines.append(f"flux_{key} = {value!r}")
    lines.append(f"u_minus = {spec.u_minus!r}")
    lines.append(f"u_plus = {spec.u_plus!r}")
    return "\n".join(lines) + "\n"
