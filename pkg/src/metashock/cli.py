"""Batch command line runner writing delimited experiment output.

Seven subcommands map onto the library modules: ``steady``, ``evolve``,
``family``, ``spectrum`` and ``reduce`` are thin wrappers over single
operations, while ``tables`` and ``figures`` drive the canned experiment
sets behind the summary tables and profile figures.  Every invocation
owns one output directory and leaves behind exactly one ``manifest.json``
that indexes each artifact file with a sha256 checksum.

Configs are flat ``key = value`` text, '#' starts a comment, optional
``[section]`` headers are decorative.  Numeric output is CSV with a
mandatory header row, comma separated, 17 significant digits, so reruns
of the same config produce byte-identical bodies.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 rejection
by the steady existence gate.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import shutil
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .core import (DECREASING, Grid, GridField, ProblemSpec, check_existence,
                   parse_config, spec_from_config)
from .errors import (ConfigError, DirectionMismatch, GapViolation,
                     MetashockError, UnsupportedConfiguration, XiOutOfRange)
from . import evolve as evolve_mod
from . import family as family_mod
from . import spectral as spectral_mod
from . import steady as steady_mod

TABLE_TIMES = (1e1, 1e2, 1e3, 5e3, 1e4, 5e4, 1e5, 1e6)
TABLE_EPSILONS = (0.03, 0.01, 0.005)
DEFAULT_GRID_N = 400

_PROBLEM_KEYS = frozenset({
    "epsilon", "ell", "u_star", "u_minus", "u_plus", "direction",
    "flux", "flux_slope", "flux_shift", "flux_tilt",
})
_RUN_KEYS = frozenset({
    "grid", "t_end", "output_times", "initial", "initial_amp",
    "initial_waves", "initial_x0", "scheme", "diffusion", "dt_max",
    "stop_threshold", "warmup_time", "xi", "xi_count", "xi_min", "xi_max",
    "theta_mode", "n_eigen", "epsilon_list", "xi0", "rtol", "table",
    "figure", "a_list", "t_transient",
})


# ---------------------------------------------------------------------------
# serialization helpers

def _fmt(value) -> str:
    return format(float(value), ".17g")


def _time_tag(t: float) -> str:
    if float(t) == int(t) and abs(t) < 1e15:
        return str(int(t))
    return format(float(t), "g")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _spec_payload(spec: ProblemSpec) -> dict:
    params = spec.flux.params
    return {
        "epsilon": spec.epsilon,
        "ell": spec.ell,
        "u_minus": spec.u_minus,
        "u_plus": spec.u_plus,
        "flux": spec.flux.label,
        "flux_params": dict(params) if params else {},
    }


class RunWriter:
    """Artifact sink for one output directory tree.

    Tracks the relative path and checksum of every file written so the
    closing manifest can index the full set.
    """

    def __init__(self, root: Path):
        self.root = root
        self.files: dict[str, str] = {}

    def _register(self, path: Path) -> None:
        rel = path.relative_to(self.root).as_posix()
        self.files[rel] = _sha256(path)

    def csv(self, rel: str, header, rows) -> Path:
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(_fmt(v) for v in row))
        path.write_text("\n".join(lines) + "\n")
        self._register(path)
        return path

    def json(self, rel: str, payload) -> Path:
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        self._register(path)
        return path

    def adopt(self, files: dict[str, str]) -> None:
        """Merge the file index returned by a worker process."""
        self.files.update(files)

    def manifest(self, *, spec: ProblemSpec, command: str, grid: Grid,
                 scheme: str, wall_time: float) -> Path:
        payload = {
            "spec": _spec_payload(spec),
            "command": command,
            "grid": {"ell": grid.ell, "n_cells": grid.n_cells},
            "scheme": scheme,
            "output_dir": str(self.root),
            "tool_version": __version__,
            "wall_time": wall_time,
            "files": dict(sorted(self.files.items())),
        }
        path = self.root / "manifest.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return path


def _prepare_out(explicit: str | None, command: str) -> Path:
    """Resolve and clear the output directory for one invocation.

    A directory holding a previous manifest is recognized as ours and
    emptied, so reruns replace the old artifact set instead of mixing
    with it.  A nonempty directory without a manifest is refused.
    """
    env = os.environ.get("METASHOCK_OUT")
    chosen = env if env else explicit
    if chosen is None:
        chosen = os.path.join("runs", command)
    root = Path(chosen)
    if root.exists():
        entries = list(root.iterdir())
        if entries and not (root / "manifest.json").exists():
            raise ConfigError(
                f"output directory {root} is nonempty and holds no manifest")
        for entry in entries:
            if entry.is_dir():
                shutil.rmtree(entry)
            else:
                entry.unlink()
    root.mkdir(parents=True, exist_ok=True)
    return root


# ---------------------------------------------------------------------------
# config handling

def _load_config(args, required: bool) -> dict[str, str]:
    if args.config is None:
        if required:
            raise ConfigError(f"{args.command} needs --config")
        return {}
    text = Path(args.config).read_text()
    cfg = parse_config(text)
    known = _PROBLEM_KEYS | _RUN_KEYS
    for key in cfg:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
    return cfg


def _config_text(mapping: dict) -> str:
    return "\n".join(f"{k} = {v}" for k, v in mapping.items()) + "\n"


def _cfg_float(cfg: dict[str, str], key: str, default: float) -> float:
    if key not in cfg:
        return float(default)
    try:
        return float(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: {cfg[key]!r} is not a number") from exc


def _cfg_int(cfg: dict[str, str], key: str, default: int) -> int:
    if key not in cfg:
        return int(default)
    try:
        return int(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: {cfg[key]!r} is not an integer") from exc


def _cfg_floats(cfg: dict[str, str], key: str) -> list[float] | None:
    if key not in cfg:
        return None
    try:
        values = [float(tok) for tok in cfg[key].split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: expected comma separated numbers") from exc
    if not values:
        raise ConfigError(f"key {key!r} is empty")
    return values


def _grid_n(args, cfg: dict[str, str], default: int = DEFAULT_GRID_N) -> int:
    if getattr(args, "grid", None):
        return int(args.grid)
    return _cfg_int(cfg, "grid", default)


def _gate(spec: ProblemSpec, direction: str) -> None:
    report = check_existence(spec, direction)
    if not report.exists:
        raise GapViolation(
            f"no {direction} steady state: flux spread {report.M - report.m:.6g}"
            f" vs epsilon {spec.epsilon:.6g}, length threshold "
            f"{report.c_threshold:.6g} vs interval length {2 * spec.ell:.6g}")


# ---------------------------------------------------------------------------
# initial data

def initial_field(cfg: dict[str, str], spec: ProblemSpec, grid: Grid) -> GridField:
    """Build the initial datum named by ``initial`` on the given grid.

    All generators pin the first and last node to the boundary values
    exactly, which the evolution requires.
    """
    name = cfg.get("initial", "parabola")
    x = grid.nodes / spec.ell
    um, up = spec.u_minus, spec.u_plus
    scale = max(abs(um), abs(up), 1e-300)
    symmetric = abs(um + up) <= 1e-12 * scale
    parabola = 0.5 * x * x - x - 0.5

    if name == "parabola":
        if not symmetric:
            raise ConfigError("parabola initial data need u_plus = -u_minus")
        vals = um * parabola
    elif name == "wavy":
        if not symmetric:
            raise ConfigError("wavy initial data need u_plus = -u_minus")
        amp = _cfg_float(cfg, "initial_amp", 0.5)
        waves = _cfg_int(cfg, "initial_waves", 3)
        vals = um * (parabola + amp * np.sin(waves * math.pi * x))
    elif name == "zero_at":
        if "initial_x0" not in cfg:
            raise ConfigError("zero_at initial data need initial_x0")
        x0 = _cfg_float(cfg, "initial_x0", 0.0) / spec.ell
        if not -1.0 < x0 < 1.0:
            raise ConfigError("initial_x0 must lie inside the interval")
        vals = (um * (x - x0) * (x - 1.0) / ((-1.0 - x0) * (-2.0))
                + up * (x + 1.0) * (x - x0) / (2.0 * (1.0 - x0)))
    elif name == "step":
        x0 = _cfg_float(cfg, "initial_x0", 0.0) / spec.ell
        vals = np.where(x < x0, um, up).astype(float)
    elif name == "linear":
        vals = um + (up - um) * 0.5 * (x + 1.0)
    else:
        raise ConfigError(f"unknown initial data generator {name!r}")

    vals = np.array(vals, dtype=float)
    vals[0] = um
    vals[-1] = up
    return GridField(grid=grid, values=vals)


def _parse_times(cfg: dict[str, str], t_end: float) -> tuple[float, ...]:
    explicit = _cfg_floats(cfg, "output_times")
    if explicit is not None:
        return tuple(sorted(set(explicit)))
    times = [t for t in TABLE_TIMES if t < t_end * (1.0 - 1e-12)]
    times.append(t_end)
    return tuple([0.0] + times)


# ---------------------------------------------------------------------------
# evolve runs shared by the evolve, tables and figures commands

def _write_trajectory(writer: RunWriter, prefix: str, traj) -> None:
    d = traj.diagnostics
    rows = zip(d.time, d.xi, d.sup_norm_u, d.sup_norm_z,
               d.l2_dist_to_steady, d.dt)
    writer.csv(prefix + "trajectory.csv",
               ("t", "xi", "sup_u", "sup_z", "l2_dist", "dt"), rows)
    for snap in traj.snapshots:
        writer.csv(prefix + f"snap_t{_time_tag(snap.time)}.csv", ("x", "u"),
                   zip(snap.grid.nodes, snap.values))


def _xi_at(traj, t: float) -> float:
    track = traj.interface_track
    idx = int(np.argmin(np.abs(track[:, 0] - t)))
    if abs(track[idx, 0] - t) > 1e-6 * max(1.0, t):
        return float(np.interp(t, track[:, 0], track[:, 1]))
    return float(track[idx, 1])


def _evolve_job(payload: dict) -> dict:
    """Run one evolution in its own subdirectory.

    The payload is plain data (config text plus scalars) so the job can
    cross a process boundary; the worker rebuilds the spec, runs the
    scheme, writes its own files, and hands back the file index plus a
    summary of scalar outcomes for the parent to aggregate.
    """
    cfg = parse_config(payload["config_text"])
    spec = spec_from_config(cfg)
    root = Path(payload["root"])
    sub = payload.get("subdir", "")
    writer = RunWriter(root)
    prefix = sub + "/" if sub else ""

    grid = Grid(ell=spec.ell, n_cells=int(payload["grid_n"]))
    u0 = initial_field(cfg, spec, grid)
    t_end = float(payload["t_end"])
    output_times = tuple(payload["output_times"])
    stop = payload.get("stop_threshold")
    dt_max = payload.get("dt_max")

    traj = evolve_mod.evolve(
        spec, u0, t_end, output_times,
        scheme=payload.get("scheme", "implicit_bdf1"),
        diffusion=payload.get("diffusion", "mean_curvature"),
        dt_max=None if dt_max is None else float(dt_max),
        stop_threshold=None if stop is None else float(stop))
    _write_trajectory(writer, prefix, traj)

    summary: dict = {
        "t_final": float(traj.diagnostics.time[-1]),
        "xi_final": float(traj.diagnostics.xi[-1]),
        "stopped_early": bool(traj.stopped_early),
        "n_steps": int(traj.diagnostics.time.size - 1),
    }
    summary["xi_at"] = {
        _time_tag(t): _xi_at(traj, t) for t in output_times if t > 0.0}

    if payload.get("steady_distance"):
        ref = traj.steady_reference
        if ref is not None:
            gap = traj.final_state.values - ref.profile.values
            summary["sup_distance_to_steady"] = float(np.max(np.abs(gap)))
    if payload.get("slope_track"):
        slopes = []
        for snap in traj.snapshots:
            du = np.diff(snap.values) / grid.spacing
            slopes.append((float(snap.time), float(np.max(np.abs(du)))))
        writer.csv(prefix + "slopes.csv", ("t", "slope_max"), slopes)
        summary["slope_max"] = {_time_tag(t): s for t, s in slopes}
    if payload.get("monotone_watch"):
        sign = traj.diagnostics.min_slope_sign
        t_arr = traj.diagnostics.time
        target = -1 if spec.u_minus > spec.u_plus else 1
        good = sign == target
        bad = np.nonzero(~good)[0]
        idx = 0 if bad.size == 0 else int(bad[-1]) + 1
        summary["monotone_from"] = (
            None if idx >= good.size else float(t_arr[idx]))
    if payload.get("speed_window"):
        t_start, threshold = payload["speed_window"]
        track = traj.interface_track
        ok = np.isfinite(track[:, 1]) & (track[:, 0] >= float(t_start))
        i0 = int(np.nonzero(ok)[0][0])
        hit = np.nonzero(ok & (np.abs(track[:, 1]) <= float(threshold)))[0]
        hit = hit[hit > i0]
        if hit.size == 0:
            raise MetashockError(
                f"interface never reached {threshold} after t={t_start}")
        i1 = int(hit[0])
        summary["speed_segment"] = {
            "t0": float(track[i0, 0]), "x0": float(track[i0, 1]),
            "t1": float(track[i1, 0]), "x1": float(track[i1, 1]),
        }
    return {"files": writer.files, "summary": summary}


def _spectrum_job(payload: dict) -> dict:
    cfg = parse_config(payload["config_text"])
    spec = spec_from_config(cfg)
    root = Path(payload["root"])
    sub = payload.get("subdir", "")
    writer = RunWriter(root)
    prefix = sub + "/" if sub else ""

    eps = spec.epsilon
    if payload.get("grid_n"):
        n = int(payload["grid_n"])
    else:
        n = min(20000, max(DEFAULT_GRID_N, int(round(40.0 * spec.ell / eps))))
    grid = Grid(ell=spec.ell, n_cells=n)
    k = _cfg_int(cfg, "n_eigen", 6)

    constant_state = spec.u_minus == spec.u_plus
    if constant_state:
        xi = 0.0
        element = GridField(grid=grid, values=np.full(grid.nodes.shape,
                                                      spec.u_minus))
    else:
        _gate(spec, spec.direction)
        xi_raw = cfg.get("xi", "equilibrium")
        if xi_raw == "equilibrium":
            xi = family_mod.equilibrium_xi(spec)
        else:
            xi = float(xi_raw)
        element = family_mod.build_element(xi, spec, grid)

    coeffs = spectral_mod.assemble(element, spec)
    report = spectral_mod.eigenpairs(coeffs, k=k)

    def _try(fn, *fargs):
        try:
            return float(fn(*fargs))
        except (UnsupportedConfiguration, DirectionMismatch):
            return None

    lam1_pred = _try(spectral_mod.lambda1_asymptotic, xi, spec)
    lam2_bound = _try(spectral_mod.lambda2_bound, spec)

    writer.json(prefix + "spectrum.json", {
        "xi": xi,
        "epsilon": eps,
        "eigenvalues": [float(v) for v in report.eigenvalues],
        "lambda1_predicted": lam1_pred,
        "lambda2_bound": lam2_bound,
    })
    header = ("x",) + tuple(f"phi_{i + 1}" for i in range(len(report.eigenfunctions)))
    columns = [grid.nodes] + [f.values for f in report.eigenfunctions]
    writer.csv(prefix + "eigenfunctions.csv", header, zip(*columns))

    lam = report.eigenvalues
    row = {
        "epsilon": eps,
        "inv_sqrt_eps": 1.0 / math.sqrt(eps),
        "n_cells": n,
        "xi": xi,
        "lambda1": float(lam[0]),
        "lambda2": float(lam[1]) if lam.size > 1 else math.nan,
        "lambda1_predicted": lam1_pred if lam1_pred is not None else math.nan,
        "lambda2_bound": lam2_bound if lam2_bound is not None else math.nan,
    }
    return {"files": writer.files, "summary": row}


_JOB_KINDS = {"evolve": _evolve_job, "spectrum": _spectrum_job}


def _job_entry(payload: dict) -> dict:
    try:
        return _JOB_KINDS[payload["kind"]](payload)
    except MetashockError as exc:
        # Strip attachments (partial trajectories hold closures) so the
        # exception survives the trip back through the process pool.
        try:
            raise type(exc)(str(exc)) from None
        except TypeError:
            raise MetashockError(str(exc)) from None


def _run_jobs(payloads: list[dict], workers: int) -> list[dict]:
    if workers <= 1 or len(payloads) <= 1:
        return [_job_entry(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=min(workers, len(payloads))) as pool:
        futures = [pool.submit(_job_entry, p) for p in payloads]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# single-operation commands

def cmd_steady(args) -> int:
    t0 = time.monotonic()
    cfg = _load_config(args, required=True)
    spec = spec_from_config(cfg)
    direction = cfg.get("direction", spec.direction)
    report = check_existence(spec, direction)
    if not report.exists:
        print(f"metashock: existence gate rejected the {direction} profile: "
              f"flux spread {report.M - report.m:.6g} vs epsilon "
              f"{spec.epsilon:.6g}, threshold {report.c_threshold:.6g} vs "
              f"length {2 * spec.ell:.6g}", file=sys.stderr)
        return 4
    grid = Grid(ell=spec.ell, n_cells=_grid_n(args, cfg))
    diffusion = cfg.get("diffusion", "mean_curvature")
    if diffusion == "mean_curvature":
        c_const = steady_mod.solve_integration_constant(spec, direction)
        state = steady_mod.reconstruct(spec, c_const, grid)
    elif diffusion == "linear":
        c_const = steady_mod.linear_diffusion_constant(spec)
        state = steady_mod.linear_diffusion_reconstruct(spec, c_const, grid)
    else:
        raise ConfigError(f"unknown diffusion {diffusion!r}")

    out = _prepare_out(args.out, "steady")
    writer = RunWriter(out)
    writer.csv("steady.csv", ("x", "u", "slope"),
               zip(grid.nodes, state.profile.values, state.slope.values))
    writer.json("steady.json", {
        "epsilon": spec.epsilon,
        "ell": spec.ell,
        "C": c_const,
        "direction": direction,
        "c_threshold": report.c_threshold,
    })
    writer.manifest(spec=spec, command=_command_line(args), grid=grid,
                    scheme=f"flux_balance_{diffusion}",
                    wall_time=time.monotonic() - t0)
    return 0


def cmd_evolve(args) -> int:
    t0 = time.monotonic()
    cfg = _load_config(args, required=True)
    spec = spec_from_config(cfg)
    t_end = _cfg_float(cfg, "t_end", 1e3)
    out = _prepare_out(args.out, "evolve")
    payload = {
        "kind": "evolve",
        "config_text": _config_text(cfg),
        "root": str(out),
        "grid_n": _grid_n(args, cfg),
        "t_end": t_end,
        "output_times": _parse_times(cfg, t_end),
        "scheme": cfg.get("scheme", "implicit_bdf1"),
        "diffusion": cfg.get("diffusion", "mean_curvature"),
        "dt_max": cfg.get("dt_max"),
        "stop_threshold": cfg.get("stop_threshold"),
        "steady_distance": True,
    }
    result = _job_entry(payload)
    writer = RunWriter(out)
    writer.adopt(result["files"])
    writer.json("evolve.json", result["summary"])
    writer.manifest(spec=spec, command=_command_line(args),
                    grid=Grid(ell=spec.ell, n_cells=payload["grid_n"]),
                    scheme=payload["scheme"],
                    wall_time=time.monotonic() - t0)
    return 0


def cmd_family(args) -> int:
    t0 = time.monotonic()
    cfg = _load_config(args, required=True)
    spec = spec_from_config(cfg)
    _gate(spec, spec.direction)
    cm, cp = family_mod.xi_margins(spec)
    lo, hi = -spec.ell + cm, spec.ell + cp
    inset = 1e-3 * (hi - lo)
    xi_min = _cfg_float(cfg, "xi_min", lo + inset)
    xi_max = _cfg_float(cfg, "xi_max", hi - inset)
    count = _cfg_int(cfg, "xi_count", 41)
    if not (lo < xi_min <= xi_max < hi):
        raise XiOutOfRange(
            f"xi sweep [{xi_min:.6g}, {xi_max:.6g}] leaves the admissible "
            f"window ({lo:.6g}, {hi:.6g})")
    mode = cfg.get("theta_mode", "hyperbolic_closed_form")

    grid = Grid(ell=spec.ell, n_cells=_grid_n(args, cfg))
    rows = []
    for xi in np.linspace(xi_min, xi_max, count):
        km, kp = family_mod.solve_kappas(float(xi), spec)
        w = km - kp
        th = family_mod.theta(float(xi), spec, mode=mode, grid=grid)
        rows.append((xi, km, kp, w, th))

    out = _prepare_out(args.out, "family")
    writer = RunWriter(out)
    writer.csv("family.csv",
               ("xi", "kappa_minus", "kappa_plus", "omega", "theta"), rows)
    writer.json("family.json", {
        "equilibrium_xi": family_mod.equilibrium_xi(spec),
        "window": [lo, hi],
        "theta_mode": mode,
    })
    writer.manifest(spec=spec, command=_command_line(args), grid=grid,
                    scheme="branch_quadrature",
                    wall_time=time.monotonic() - t0)
    return 0


def cmd_reduce(args) -> int:
    t0 = time.monotonic()
    cfg = _load_config(args, required=True)
    spec = spec_from_config(cfg)
    _gate(spec, spec.direction)
    xi0 = _cfg_float(cfg, "xi0", (1.0 - math.sqrt(2.0)) * spec.ell)
    times = _cfg_floats(cfg, "output_times") or list(TABLE_TIMES)
    rtol = _cfg_float(cfg, "rtol", 1e-8)
    traj = family_mod.reduced_ode_solve(xi0, spec, times, rtol=rtol)

    out = _prepare_out(args.out, "reduce")
    writer = RunWriter(out)
    writer.csv("reduce.csv", ("t", "xi"),
               zip(traj.times, traj.xi_values))
    writer.json("reduce.json", {
        "xi0": xi0,
        "equilibrium": traj.equilibrium,
        "rtol": rtol,
    })
    writer.manifest(spec=spec, command=_command_line(args),
                    grid=Grid(ell=spec.ell, n_cells=_grid_n(args, cfg)),
                    scheme="reduced_rk4",
                    wall_time=time.monotonic() - t0)
    return 0


def cmd_spectrum(args) -> int:
    t0 = time.monotonic()
    cfg = _load_config(args, required=True)
    eps_list = _cfg_floats(cfg, "epsilon_list")
    out = _prepare_out(args.out, "spectrum")
    writer = RunWriter(out)
    grid_flag = args.grid if getattr(args, "grid", None) else _cfg_int(cfg, "grid", 0)

    if eps_list is None:
        spec = spec_from_config(cfg)
        payload = {
            "kind": "spectrum",
            "config_text": _config_text(cfg),
            "root": str(out),
            "grid_n": grid_flag or None,
        }
        result = _job_entry(payload)
        writer.adopt(result["files"])
        n_used = result["summary"]["n_cells"]
        writer.manifest(spec=spec, command=_command_line(args),
                        grid=Grid(ell=spec.ell, n_cells=n_used),
                        scheme="fv_symmetrized_eigensolver",
                        wall_time=time.monotonic() - t0)
        return 0

    payloads = []
    for eps in eps_list:
        sub_cfg = dict(cfg)
        sub_cfg["epsilon"] = _fmt(eps)
        sub_cfg.pop("epsilon_list", None)
        payloads.append({
            "kind": "spectrum",
            "config_text": _config_text(sub_cfg),
            "root": str(out),
            "subdir": _eps_dir(eps),
            "grid_n": grid_flag or None,
        })
    results = _run_jobs(payloads, args.workers)
    scaling_header = ("epsilon", "inv_sqrt_eps", "n_cells", "xi", "lambda1",
                      "lambda2", "lambda1_predicted", "lambda2_bound")
    scaling_rows = [[r["summary"][k] for k in scaling_header] for r in results]
    for r in results:
        writer.adopt(r["files"])
    writer.csv("scaling.csv", scaling_header, scaling_rows)
    writer.json("recipe_spectrum_scaling.json", {
        "kind": "spectrum_scaling",
        "inputs": ["scaling.csv"],
        "styling": {"title": "leading eigenvalue versus stiffness"},
    })
    first = spec_from_config(parse_config(payloads[0]["config_text"]))
    writer.manifest(spec=first, command=_command_line(args),
                    grid=Grid(ell=first.ell,
                              n_cells=results[0]["summary"]["n_cells"]),
                    scheme="fv_symmetrized_eigensolver",
                    wall_time=time.monotonic() - t0)
    return 0


# ---------------------------------------------------------------------------
# tables

def _table_base_cfg(cfg: dict[str, str]) -> dict[str, str]:
    base = {
        "u_star": cfg.get("u_star", "sqrt_eps"),
        "direction": cfg.get("direction", DECREASING),
        "flux": cfg.get("flux", "burgers"),
        "ell": cfg.get("ell", "1.0"),
        "initial": cfg.get("initial", "parabola"),
    }
    for key in ("flux_slope", "flux_shift", "flux_tilt", "initial_amp",
                "initial_waves", "initial_x0"):
        if key in cfg:
            base[key] = cfg[key]
    return base


def _eps_dir(eps: float) -> str:
    return f"eps_{format(eps, 'g')}"


def cmd_tables(args) -> int:
    t0 = time.monotonic()
    cfg = _load_config(args, required=False)
    table = args.table if args.table else _cfg_int(cfg, "table", 0)
    if table not in (1, 2, 3):
        raise ConfigError("choose a table with --table {1,2,3} or table = N")
    eps_list = _cfg_floats(cfg, "epsilon_list") or list(TABLE_EPSILONS)
    grid_n = _grid_n(args, cfg)
    out = _prepare_out(args.out, f"table{table}")
    writer = RunWriter(out)
    base = _table_base_cfg(cfg)
    diffusion = "linear" if table == 3 else "mean_curvature"

    payloads = []
    for eps in eps_list:
        run_cfg = dict(base)
        run_cfg["epsilon"] = _fmt(eps)
        payload = {
            "kind": "evolve",
            "config_text": _config_text(run_cfg),
            "root": str(out),
            "subdir": _eps_dir(eps),
            "grid_n": grid_n,
            "diffusion": diffusion,
        }
        if table == 2:
            payload.update({
                "t_end": _cfg_float(cfg, "t_end", 1e8),
                "output_times": (),
                "dt_max": _cfg_float(cfg, "dt_max", 1e4),
                "stop_threshold": _cfg_float(cfg, "stop_threshold", 5e-4),
                "speed_window": (_cfg_float(cfg, "t_transient", 100.0),
                                 _cfg_float(cfg, "stop_threshold", 5e-4)),
            })
        else:
            payload.update({
                "t_end": _cfg_float(cfg, "t_end", TABLE_TIMES[-1]),
                "output_times": (0.0,) + TABLE_TIMES,
            })
        payloads.append(payload)

    results = _run_jobs(payloads, args.workers)
    for r in results:
        writer.adopt(r["files"])

    spec0 = spec_from_config(parse_config(payloads[0]["config_text"]))
    if table in (1, 3):
        rows = []
        for eps, r in zip(eps_list, results):
            for t in TABLE_TIMES:
                rows.append((eps, t, r["summary"]["xi_at"][_time_tag(t)]))
        writer.csv(f"table{table}.csv", ("epsilon", "t", "xi"), rows)
        writer.json("recipe_interface_track.json", {
            "kind": "interface_track",
            "inputs": [f"{_eps_dir(e)}/trajectory.csv" for e in eps_list],
            "styling": {"labels": [f"epsilon={format(e, 'g')}" for e in eps_list],
                        "logx": True},
        })
        writer.json("recipe_profiles.json", {
            "kind": "profiles",
            "inputs": [f"{_eps_dir(eps_list[-1])}/snap_t{_time_tag(t)}.csv"
                       for t in (0.0,) + TABLE_TIMES],
            "styling": {"labels": [f"t={_time_tag(t)}"
                                   for t in (0.0,) + TABLE_TIMES]},
        })
    else:
        rows = []
        for eps, r in zip(eps_list, results):
            seg = r["summary"]["speed_segment"]
            dx = abs(seg["x1"] - seg["x0"])
            dt = seg["t1"] - seg["t0"]
            measured = dx / dt
            predicted = math.sqrt(eps) * math.exp(-1.0 / math.sqrt(eps))
            rows.append((eps, seg["t0"], seg["x0"], seg["t1"], seg["x1"],
                         dx, dt, measured, predicted, measured / predicted))
        writer.csv("table2.csv",
                   ("epsilon", "t_start", "xi_start", "t_stop", "xi_stop",
                    "delta_x", "delta_t", "measured_speed", "predicted_speed",
                    "ratio"), rows)
        writer.json("recipe_speed_comparison.json", {
            "kind": "speed_comparison",
            "inputs": ["table2.csv"],
            "styling": {"title": "measured versus predicted drift speed"},
        })

    writer.manifest(spec=spec0, command=_command_line(args),
                    grid=Grid(ell=spec0.ell, n_cells=grid_n),
                    scheme=f"implicit_bdf1_{diffusion}",
                    wall_time=time.monotonic() - t0)
    return 0


# ---------------------------------------------------------------------------
# figures

def _figure_recipe(writer: RunWriter, name: str, kind: str, inputs,
                   labels) -> None:
    writer.json(name, {
        "kind": kind,
        "inputs": list(inputs),
        "styling": {"labels": list(labels)},
    })


def _snap_names(sub: str, times) -> list[str]:
    return [f"{sub}/snap_t{_time_tag(t)}.csv" for t in times]


def cmd_figures(args) -> int:
    t0 = time.monotonic()
    cfg = _load_config(args, required=False)
    figure = args.figure if args.figure else _cfg_int(cfg, "figure", 0)
    if figure not in (3, 4, 5, 6, 7, 8):
        raise ConfigError("choose a figure with --figure {3..8} or figure = N")
    out = _prepare_out(args.out, f"figure{figure}")
    writer = RunWriter(out)
    grid_n = _grid_n(args, cfg)
    eps = _cfg_float(cfg, "epsilon", 0.005)
    handler = _FIGURES[figure]
    spec0, scheme = handler(cfg, writer, out, grid_n, eps, args.workers)
    writer.manifest(spec=spec0, command=_command_line(args),
                    grid=Grid(ell=spec0.ell, n_cells=grid_n),
                    scheme=scheme, wall_time=time.monotonic() - t0)
    return 0


def _fig_two_panel(cfg, writer, out, grid_n, eps, workers):
    """Increasing against decreasing data at matched times.

    The increasing run reaches its steady state quickly (the control),
    the decreasing one is still carrying a far-from-center interface at
    the same time.
    """
    times = (0.0, 1.0, 5.0, 10.0, 50.0, 100.0)
    runs = []
    # The control datum is the straight ramp: any increasing datum works,
    # and the ramp sheds its slow interior mode within t ~ 50 so the
    # reached-steady-state claim is visible with margin.
    for sub, direction, initial in (("increasing", "increasing", "linear"),
                                    ("decreasing", "decreasing", "parabola")):
        run_cfg = {"epsilon": _fmt(eps), "u_star": "sqrt_eps",
                   "direction": direction, "flux": "burgers",
                   "initial": initial}
        runs.append({
            "kind": "evolve", "config_text": _config_text(run_cfg),
            "root": str(out), "subdir": sub, "grid_n": grid_n,
            "t_end": times[-1], "output_times": times,
            "steady_distance": True,
        })
    results = _run_jobs(runs, workers)
    for r in results:
        writer.adopt(r["files"])
    summary = {
        "epsilon": eps,
        "increasing": results[0]["summary"],
        "decreasing": results[1]["summary"],
    }
    writer.json("figure3.json", summary)
    for sub in ("increasing", "decreasing"):
        _figure_recipe(writer, f"recipe_profiles_{sub}.json", "profiles",
                       _snap_names(sub, times),
                       [f"t={_time_tag(t)}" for t in times])
    spec0 = spec_from_config(parse_config(runs[1]["config_text"]))
    return spec0, "implicit_bdf1_mean_curvature"


def _fig_nonmonotone(cfg, writer, out, grid_n, eps, workers):
    """Two non-monotone data, one of them overshooting the boundary size."""
    times = (0.0, 1.0, 10.0, 100.0, 1000.0)
    variants = (("modest", 0.5, 3), ("tall", 1.5, 2))
    runs = []
    for sub, amp, waves in variants:
        run_cfg = {"epsilon": _fmt(eps), "u_star": "sqrt_eps",
                   "direction": DECREASING, "flux": "burgers",
                   "initial": "wavy",
                   "initial_amp": _cfg_float(cfg, "initial_amp", amp),
                   "initial_waves": waves}
        runs.append({
            "kind": "evolve", "config_text": _config_text(run_cfg),
            "root": str(out), "subdir": sub, "grid_n": grid_n,
            "t_end": times[-1], "output_times": times,
            "monotone_watch": True,
        })
    results = _run_jobs(runs, workers)
    for r in results:
        writer.adopt(r["files"])
    writer.json("figure4.json", {
        "epsilon": eps,
        "modest": results[0]["summary"],
        "tall": results[1]["summary"],
    })
    for sub, _, _ in variants:
        _figure_recipe(writer, f"recipe_profiles_{sub}.json", "profiles",
                       _snap_names(sub, times),
                       [f"t={_time_tag(t)}" for t in times])
    spec0 = spec_from_config(parse_config(runs[0]["config_text"]))
    return spec0, "implicit_bdf1_mean_curvature"


def _fig_epsilon_compare(cfg, writer, out, grid_n, eps, workers):
    """The same datum under two stiffness values, watched to t = 5e4."""
    eps_list = _cfg_floats(cfg, "epsilon_list") or [0.01, 0.005]
    times = (0.0, 10.0, 1e3, 1e4, 5e4)
    runs = []
    for e in eps_list:
        run_cfg = {"epsilon": _fmt(e), "u_star": "sqrt_eps",
                   "direction": DECREASING, "flux": "burgers",
                   "initial": "parabola"}
        runs.append({
            "kind": "evolve", "config_text": _config_text(run_cfg),
            "root": str(out), "subdir": _eps_dir(e), "grid_n": grid_n,
            "t_end": times[-1], "output_times": times,
        })
    results = _run_jobs(runs, workers)
    for r in results:
        writer.adopt(r["files"])
    writer.json("figure5.json", {
        _eps_dir(e): r["summary"] for e, r in zip(eps_list, results)})
    for e in eps_list:
        _figure_recipe(writer, f"recipe_profiles_{_eps_dir(e)}.json",
                       "profiles", _snap_names(_eps_dir(e), times),
                       [f"t={_time_tag(t)}" for t in times])
    _figure_recipe(writer, "recipe_interface_track.json", "interface_track",
                   [f"{_eps_dir(e)}/trajectory.csv" for e in eps_list],
                   [f"epsilon={format(e, 'g')}" for e in eps_list])
    spec0 = spec_from_config(parse_config(runs[0]["config_text"]))
    return spec0, "implicit_bdf1_mean_curvature"


def _fig_tilted_flux(cfg, writer, out, grid_n, eps, workers):
    """Unequal boundary fluxes kill the slow phase; two tilt sizes."""
    a_list = _cfg_floats(cfg, "a_list") or [0.25, 0.1]
    times = (0.0, 1.0, 10.0, 100.0, 1000.0)
    runs = []
    for a in a_list:
        run_cfg = {"epsilon": _fmt(eps), "u_star": "sqrt_eps",
                   "direction": DECREASING, "flux": "tilted_burgers",
                   "flux_tilt": _fmt(a), "initial": "parabola"}
        runs.append({
            "kind": "evolve", "config_text": _config_text(run_cfg),
            "root": str(out), "subdir": f"a_{format(a, 'g')}",
            "grid_n": grid_n, "t_end": times[-1], "output_times": times,
        })
    results = _run_jobs(runs, workers)
    summary = {"epsilon": eps}
    for a, run, result in zip(a_list, runs, results):
        writer.adopt(result["files"])
        spec = spec_from_config(parse_config(run["config_text"]))
        info = dict(result["summary"])
        info["equilibrium_xi"] = family_mod.equilibrium_xi(spec)
        summary[f"a_{format(a, 'g')}"] = info
    writer.json("figure6.json", summary)
    for a in a_list:
        sub = f"a_{format(a, 'g')}"
        _figure_recipe(writer, f"recipe_profiles_{sub}.json", "profiles",
                       _snap_names(sub, times),
                       [f"t={_time_tag(t)}" for t in times])
    spec0 = spec_from_config(parse_config(runs[0]["config_text"]))
    return spec0, "implicit_bdf1_mean_curvature"


def _fig_small_data(cfg, writer, out, grid_n, eps, workers):
    """Boundary size eps/2 equilibrates fast; sqrt(eps) is the contrast."""
    times = (0.0, 1.0, 10.0, 100.0, 1000.0)
    variants = (("small", cfg.get("u_star", "eps/2")), ("contrast", "sqrt_eps"))
    runs = []
    for sub, star in variants:
        run_cfg = {"epsilon": _fmt(eps), "u_star": star,
                   "direction": DECREASING, "flux": "burgers",
                   "initial": "parabola"}
        runs.append({
            "kind": "evolve", "config_text": _config_text(run_cfg),
            "root": str(out), "subdir": sub, "grid_n": grid_n,
            "t_end": times[-1], "output_times": times,
        })
    results = _run_jobs(runs, workers)
    for r in results:
        writer.adopt(r["files"])
    writer.json("figure7.json", {
        "epsilon": eps,
        "small": results[0]["summary"],
        "contrast": results[1]["summary"],
    })
    for sub, _ in variants:
        _figure_recipe(writer, f"recipe_profiles_{sub}.json", "profiles",
                       _snap_names(sub, times),
                       [f"t={_time_tag(t)}" for t in times])
    _figure_recipe(writer, "recipe_interface_track.json", "interface_track",
                   [f"{sub}/trajectory.csv" for sub, _ in variants],
                   [sub for sub, _ in variants])
    spec0 = spec_from_config(parse_config(runs[0]["config_text"]))
    return spec0, "implicit_bdf1_mean_curvature"


def _fig_large_data(cfg, writer, out, grid_n, eps, workers):
    """Data too large for a smooth steady state steepen into a jump.

    The run deliberately sits outside the existence gate; the point is
    that the scheme keeps marching while the layer sharpens toward the
    discontinuous rest state.
    """
    eps = _cfg_float(cfg, "epsilon", 0.01)
    factor = _cfg_float(cfg, "initial_amp", 1.8)
    times = (0.0, 1.0, 10.0, 100.0)
    run_cfg = {"epsilon": _fmt(eps), "u_star": f"{_fmt(factor)}*sqrt_eps",
               "direction": DECREASING, "flux": "burgers",
               "initial": "parabola"}
    spec = spec_from_config(parse_config(_config_text(run_cfg)))
    report = check_existence(spec, DECREASING)
    payload = {
        "kind": "evolve", "config_text": _config_text(run_cfg),
        "root": str(out), "subdir": "", "grid_n": grid_n,
        "t_end": times[-1], "output_times": times,
        "slope_track": True,
    }
    result = _job_entry(payload)
    writer.adopt(result["files"])
    slopes = result["summary"]["slope_max"]
    first = slopes[_time_tag(times[0])]
    last = slopes[_time_tag(times[-1])]
    writer.json("figure8.json", {
        "epsilon": eps,
        "boundary_factor": factor,
        "smooth_steady_exists": report.exists,
        "flux_spread": report.M - report.m,
        "slope_max": slopes,
        "steepening_ratio": last / first,
        "run": result["summary"],
    })
    _figure_recipe(writer, "recipe_profiles.json", "profiles",
                   [f"snap_t{_time_tag(t)}.csv" for t in times],
                   [f"t={_time_tag(t)}" for t in times])
    return spec, "implicit_bdf1_mean_curvature"


_FIGURES = {
    3: _fig_two_panel,
    4: _fig_nonmonotone,
    5: _fig_epsilon_compare,
    6: _fig_tilted_flux,
    7: _fig_small_data,
    8: _fig_large_data,
}


# ---------------------------------------------------------------------------
# argument parsing and dispatch

def _command_line(args) -> str:
    parts = ["metashock", args.command]
    if args.config:
        parts.append(f"--config {args.config}")
    if args.out:
        parts.append(f"--out {args.out}")
    if getattr(args, "grid", None):
        parts.append(f"--grid {args.grid}")
    if getattr(args, "workers", 1) != 1:
        parts.append(f"--workers {args.workers}")
    if getattr(args, "table", None):
        parts.append(f"--table {args.table}")
    if getattr(args, "figure", None):
        parts.append(f"--figure {args.figure}")
    return " ".join(parts)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metashock",
        description="reproducible experiment batches for slow shock layers")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "steady": "monotone steady profile and its integration constant",
        "evolve": "initial value run with trajectory and snapshots",
        "family": "interface family sweep (kappas, omega, theta)",
        "spectrum": "linearized spectrum, single run or epsilon sweep",
        "reduce": "reduced interface law integration",
        "tables": "summary tables of interface positions and speeds",
        "figures": "canned experiment sets behind the profile figures",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--out", help="output directory (METASHOCK_OUT wins)")
        p.add_argument("--grid", type=int, help="number of grid cells")
        p.add_argument("--workers", type=int, default=1,
                       help="worker processes for sweeps")
        if name == "tables":
            p.add_argument("--table", type=int, choices=(1, 2, 3))
        if name == "figures":
            p.add_argument("--figure", type=int, choices=(3, 4, 5, 6, 7, 8))
    return parser


_COMMANDS = {
    "steady": cmd_steady,
    "evolve": cmd_evolve,
    "family": cmd_family,
    "spectrum": cmd_spectrum,
    "reduce": cmd_reduce,
    "tables": cmd_tables,
    "figures": cmd_figures,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, DirectionMismatch, UnsupportedConfiguration,
            XiOutOfRange) as exc:
        print(f"metashock: config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"metashock: config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"metashock: config error: {exc}", file=sys.stderr)
        return 2
    except GapViolation as exc:
        print(f"metashock: existence gate: {exc}", file=sys.stderr)
        return 4
    except MetashockError as exc:
        print(f"metashock: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
