"""Recipe loading, CSV schema checks, and the four figure kinds.

A recipe is a small JSON object naming a figure ``kind``, the input CSV
files, and styling hints.  Inputs are resolved relative to the recipe
file so a recipe can ship inside the experiment output directory it
describes.  Rendering is deterministic: axis limits are computed from
the data (5 percent margins) unless pinned in the styling block, and
the figure geometry is fixed, so identical inputs give identical axis
ranges and image dimensions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("profiles", "interface_track", "spectrum_scaling", "speed_comparison")

FIG_SIZE = (6.4, 4.8)
DPI = 144
MARGIN = 0.05


class PlotkitError(Exception):
    pass


class SchemaMismatch(PlotkitError):
    """An input (or the recipe itself) does not match the documented schema."""


class EmptyInput(PlotkitError):
    """An input file carries no data rows."""


@dataclass(frozen=True)
class FigureRecipe:
    kind: str
    inputs: tuple[Path, ...]
    styling: dict


@dataclass(frozen=True)
class RenderReport:
    """What was drawn: the output path and the exact axis ranges."""

    path: str
    xlim: tuple[float, float]
    ylim: tuple[float, float]
    n_series: int


def load_recipe(path) -> FigureRecipe:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path.name}: not valid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise SchemaMismatch(f"{path.name}: recipe must be a JSON object")
    kind = payload.get("kind")
    if kind not in KINDS:
        raise SchemaMismatch(
            f"{path.name}: unknown kind {kind!r}, expected one of {KINDS}")
    raw_inputs = payload.get("inputs")
    if not isinstance(raw_inputs, list) or not raw_inputs:
        raise SchemaMismatch(f"{path.name}: 'inputs' must be a nonempty list")
    base = path.parent
    inputs = tuple((base / p).resolve() if not Path(p).is_absolute()
                   else Path(p) for p in raw_inputs)
    for p in inputs:
        if not p.is_file():
            raise FileNotFoundError(f"recipe input does not exist: {p}")
    styling = payload.get("styling", {})
    if not isinstance(styling, dict):
        raise SchemaMismatch(f"{path.name}: 'styling' must be an object")
    return FigureRecipe(kind=kind, inputs=inputs, styling=styling)


def read_columns(path, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    """Load a headered CSV, checking the required columns are present."""
    path = Path(path)
    text = path.read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise EmptyInput(f"{path.name}: file is empty")
    header = [name.strip() for name in lines[0].split(",")]
    for col in required:
        if col not in header:
            raise SchemaMismatch(f"{path.name}: missing column {col!r} "
                                 f"(found {header})")
    if len(lines) == 1:
        raise EmptyInput(f"{path.name}: header only, no data rows")
    try:
        data = np.array([[float(tok) for tok in ln.split(",")]
                         for ln in lines[1:]])
    except ValueError as exc:
        raise SchemaMismatch(f"{path.name}: non-numeric cell ({exc})") from exc
    if data.shape[1] != len(header):
        raise SchemaMismatch(
            f"{path.name}: row width {data.shape[1]} does not match "
            f"header width {len(header)}")
    return {name: data[:, i] for i, name in enumerate(header)}


def _labels(recipe: FigureRecipe) -> list[str]:
    given = recipe.styling.get("labels", [])
    out = []
    for i, p in enumerate(recipe.inputs):
        out.append(str(given[i]) if i < len(given) else Path(p).stem)
    return out


def _padded(lo: float, hi: float, log: bool = False) -> tuple[float, float]:
    if log:
        if lo <= 0.0:
            raise SchemaMismatch("log axis needs positive data")
        f = (hi / lo) ** MARGIN if hi > lo else 2.0
        return lo / f, hi * f
    span = hi - lo
    pad = MARGIN * span if span > 0.0 else max(abs(hi), 1.0) * MARGIN
    return lo - pad, hi + pad


def _finish(ax, recipe, xs, ys, out, n_series, *, logx=False, logy=False):
    styling = recipe.styling
    xlim = styling.get("xlim") or _padded(min(xs), max(xs), log=logx)
    ylim = styling.get("ylim") or _padded(min(ys), max(ys), log=logy)
    ax.set_xlim(*xlim)
    ax.set_ylim(*ylim)
    if "title" in styling:
        ax.set_title(str(styling["title"]))
    if n_series > 1 or styling.get("labels"):
        ax.legend(loc="best", fontsize=8)
    fig = ax.figure
    fig.savefig(out, dpi=DPI)
    plt.close(fig)
    return RenderReport(path=str(out),
                        xlim=(float(xlim[0]), float(xlim[1])),
                        ylim=(float(ylim[0]), float(ylim[1])),
                        n_series=n_series)


def _render_profiles(recipe: FigureRecipe, out) -> RenderReport:
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    xs: list[float] = []
    ys: list[float] = []
    for path, label in zip(recipe.inputs, _labels(recipe)):
        cols = read_columns(path, ("x", "u"))
        ax.plot(cols["x"], cols["u"], lw=1.2, label=label)
        xs += [float(np.min(cols["x"])), float(np.max(cols["x"]))]
        ys += [float(np.min(cols["u"])), float(np.max(cols["u"]))]
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    return _finish(ax, recipe, xs, ys, out, len(recipe.inputs))


def _render_interface_track(recipe: FigureRecipe, out) -> RenderReport:
    logx = bool(recipe.styling.get("logx", True))
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    xs: list[float] = []
    ys: list[float] = []
    for path, label in zip(recipe.inputs, _labels(recipe)):
        cols = read_columns(path, ("t", "xi"))
        keep = np.isfinite(cols["xi"])
        if logx:
            keep &= cols["t"] > 0.0
        t, xi = cols["t"][keep], cols["xi"][keep]
        if t.size == 0:
            raise EmptyInput(f"{Path(path).name}: no plottable track points")
        ax.plot(t, xi, lw=1.2, label=label)
        xs += [float(t.min()), float(t.max())]
        ys += [float(xi.min()), float(xi.max())]
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("interface position")
    return _finish(ax, recipe, xs, ys, out, len(recipe.inputs), logx=logx)


def _render_spectrum_scaling(recipe: FigureRecipe, out) -> RenderReport:
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    xs: list[float] = []
    ys: list[float] = []
    n_series = 0
    for path, label in zip(recipe.inputs, _labels(recipe)):
        cols = read_columns(path, ("epsilon", "lambda1"))
        eps = cols["epsilon"]
        stiffness = cols.get("inv_sqrt_eps")
        if stiffness is None:
            stiffness = 1.0 / np.sqrt(eps)
        order = np.argsort(stiffness)
        stiffness = stiffness[order]
        lam = np.abs(cols["lambda1"][order])
        if np.any(lam <= 0.0):
            raise SchemaMismatch(
                f"{Path(path).name}: lambda1 contains zeros, cannot log-plot")
        ax.plot(stiffness, lam, "o-", lw=1.0, ms=4, label=label)
        xs += [float(stiffness.min()), float(stiffness.max())]
        ys += [float(lam.min()), float(lam.max())]
        n_series += 1
        pred = cols.get("lambda1_predicted")
        if pred is not None:
            pred = np.abs(pred[order])
            good = np.isfinite(pred) & (pred > 0.0)
            if np.any(good):
                ax.plot(stiffness[good], pred[good], "--", lw=1.0,
                        label=f"{label} predicted")
                ys += [float(pred[good].min()), float(pred[good].max())]
                n_series += 1
    ax.set_yscale("log")
    ax.set_xlabel("1/sqrt(epsilon)")
    ax.set_ylabel("|lambda_1|")
    return _finish(ax, recipe, xs, ys, out, n_series, logy=True)


def _render_speed_comparison(recipe: FigureRecipe, out) -> RenderReport:
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    xs: list[float] = []
    ys: list[float] = []
    n_series = 0
    for path in recipe.inputs:
        cols = read_columns(path,
                            ("epsilon", "measured_speed", "predicted_speed"))
        stiffness = 1.0 / np.sqrt(cols["epsilon"])
        order = np.argsort(stiffness)
        stiffness = stiffness[order]
        for name, style in (("measured_speed", "o-"),
                            ("predicted_speed", "s--")):
            vals = cols[name][order]
            if np.any(vals <= 0.0):
                raise SchemaMismatch(
                    f"{Path(path).name}: {name} must be positive")
            ax.plot(stiffness, vals, style, lw=1.0, ms=4, label=name)
            ys += [float(vals.min()), float(vals.max())]
            n_series += 1
        xs += [float(stiffness.min()), float(stiffness.max())]
    ax.set_yscale("log")
    ax.set_xlabel("1/sqrt(epsilon)")
    ax.set_ylabel("interface speed")
    return _finish(ax, recipe, xs, ys, out, n_series, logy=True)


_RENDERERS = {
    "profiles": _render_profiles,
    "interface_track": _render_interface_track,
    "spectrum_scaling": _render_spectrum_scaling,
    "speed_comparison": _render_speed_comparison,
}


def render(recipe: FigureRecipe, out) -> RenderReport:
    """Draw the recipe to ``out`` and report the exact axis ranges."""
    if recipe.kind not in _RENDERERS:
        raise SchemaMismatch(f"unknown recipe kind {recipe.kind!r}")
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    return _RENDERERS[recipe.kind](recipe, out)
