"""Figures for the report path, rendered straight to files.

Uses ``Figure`` objects with the Agg canvas, so nothing touches pyplot's
global state and no display is needed.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.collections import PolyCollection
from matplotlib.figure import Figure

from .lattice import HexAperture
from .pattern import PatternGrid, ScanMap
from .tiling import Tiling

_ORIENT_COLOR = {"V": "#4c72b0", "L": "#dd8452", "R": "#55a868"}


def _save(fig: Figure, path) -> Path:
    FigureCanvasAgg(fig)
    path = Path(path)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    return path


def _diamond(ap: HexAperture, a: int, b: int) -> np.ndarray:
    va, vb = ap.tri_vertices[a], ap.tri_vertices[b]
    shared = [v for v in va if v in vb]
    apex_a = [v for v in va if v not in vb][0]
    apex_b = [v for v in vb if v not in va][0]
    return ap.vertex_xy[[apex_a, shared[0], apex_b, shared[1]]]


def plot_tiling(ap: HexAperture, tiling: Tiling, path, amplitudes: np.ndarray | None = None, title: str = "") -> Path:
    """Tile layout, coloured by orientation or by per-tile amplitude."""
    fig = Figure(figsize=(5, 4.6))
    ax = fig.add_subplot()
    polys = [_diamond(ap, t.triangle_a, t.triangle_b) for t in tiling.tiles]
    if amplitudes is None:
        coll = PolyCollection(polys, facecolors=[_ORIENT_COLOR[t.orientation] for t in tiling.tiles],
                              edgecolors="k", linewidths=0.6)
        ax.add_collection(coll)
    else:
        coll = PolyCollection(polys, array=np.asarray(amplitudes), cmap="viridis", edgecolors="k", linewidths=0.6)
        ax.add_collection(coll)
        fig.colorbar(coll, ax=ax, label="amplitude")
    ax.autoscale_view()
    ax.set_aspect("equal")
    ax.set_xlabel("x [wavelengths]")
    ax.set_ylabel("y [wavelengths]")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_pattern(pattern: PatternGrid, path, floor_db: float = -60.0, title: str = "") -> Path:
    fig = Figure(figsize=(5, 4.2))
    ax = fig.add_subplot()
    with np.errstate(divide="ignore"):
        db = 10 * np.log10(np.where(pattern.visible, pattern.power, np.nan))
    db = np.maximum(db, floor_db)
    ext = (-1, 1, -1, 1)
    im = ax.imshow(db, origin="lower", extent=ext, vmin=floor_db, vmax=0, cmap="jet")
    fig.colorbar(im, ax=ax, label="normalised power [dB]")
    ax.set_xlabel("u")
    ax.set_ylabel("v")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_cuts(cuts: dict, path, mask_floor_db: float | None = None, title: str = "") -> Path:
    fig = Figure(figsize=(6, 3.6))
    ax = fig.add_subplot()
    labels = {"phi0": "phi = 0 (along u)", "phi90": "phi = 90 (along v)"}
    for name, (t, db) in cuts.items():
        ax.plot(t, db, lw=1, label=labels.get(name, name))
    if mask_floor_db is not None and np.isfinite(mask_floor_db):
        ax.axhline(mask_floor_db, color="k", ls="--", lw=0.8, label="mask floor")
    ax.set_ylim(-60, 2)
    ax.set_xlabel("direction cosine")
    ax.set_ylabel("power [dB]")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_cost_curve(sorted_costs: np.ndarray, path) -> Path:
    """Costs from the worst tiling (left) to the best one (right)."""
    fig = Figure(figsize=(6, 3.6))
    ax = fig.add_subplot()
    ax.plot(np.arange(1, len(sorted_costs) + 1), sorted_costs, lw=1)
    if np.all(sorted_costs > 0):
        ax.set_yscale("log")
    ax.set_xlabel("tiling rank")
    ax.set_ylabel("cost")
    ax.grid(alpha=0.3)
    return _save(fig, path)


def plot_traces(traces: list, path, labels: list[str] | None = None) -> Path:
    fig = Figure(figsize=(6, 3.6))
    ax = fig.add_subplot()
    for k, tr in enumerate(traces):
        ax.plot(tr.best, lw=1, label=labels[k] if labels else None)
    if all(min(tr.best) > 0 for tr in traces):
        ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("best cost")
    if labels:
        ax.legend(fontsize=7, ncol=2)
    ax.grid(alpha=0.3)
    return _save(fig, path)


def plot_scan(scan: ScanMap, path) -> Path:
    fig = Figure(figsize=(10, 3.8))
    for k, (values, label) in enumerate(((scan.sll_db, "SLL [dB]"), (scan.d_dbi, "D [dBi]"))):
        ax = fig.add_subplot(1, 2, k + 1)
        mesh = ax.pcolormesh(scan.phi_gamma, scan.theta_gamma, values, shading="nearest", cmap="jet")
        fig.colorbar(mesh, ax=ax, label=label)
        ax.set_xlabel("phi offset [deg]")
        ax.set_ylabel("theta offset [deg]")
    return _save(fig, path)
