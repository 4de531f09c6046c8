"""Renderers for the five figure kinds.

Every renderer reads the CSV/JSON artifacts by their documented headers,
draws onto a fresh matplotlib figure and writes ``<out>.png`` and
``<out>.svg``.  Rendering runs on the Agg backend under a fixed rc
context (salted SVG ids, text kept as text, no embedded dates), so both
files are byte-for-byte reproducible from the same inputs.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .figspec import FigureSpec  # noqa: E402

_RC = {
    "svg.hashsalt": "sqmfig",
    "svg.fonttype": "none",
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "font.family": "DejaVu Sans",
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def _read_table(path: Path, expected: list[str]) -> np.ndarray:
    """Read a CSV with an exact header into a float array (n, len(header))."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = list(reader)
    if header != expected:
        raise ValueError(
            f"{path}: header {header} does not match expected {expected}"
        )
    if not rows:
        raise ValueError(f"{path}: no data rows")
    try:
        return np.array([[float(v) for v in row] for row in rows])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric cell: {exc}") from None


def _read_json(path: Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict):
        raise ValueError(f"{path}: expected a JSON object")
    return payload


def _edges_from_centers(centers: np.ndarray, path: Path) -> np.ndarray:
    if centers.size < 2:
        raise ValueError(f"{path}: grid needs at least two bins per axis")
    widths = np.diff(centers)
    h = widths[0]
    if h <= 0 or not np.allclose(widths, h, rtol=1e-6, atol=0.0):
        raise ValueError(f"{path}: bin centers are not uniformly spaced")
    return np.concatenate([centers - 0.5 * h, [centers[-1] + 0.5 * h]])


def _unit_circle(ax, **kwargs) -> None:
    phi = np.linspace(0.0, 2.0 * math.pi, 361)
    ax.plot(np.cos(phi), np.sin(phi), **kwargs)


# ---------------------------------------------------------------------------
# figure kinds
# ---------------------------------------------------------------------------

def _render_distribution_heatmap(spec: FigureSpec, fig) -> None:
    data = _read_table(spec.inputs["distribution"], ["x", "y", "p"])
    xs = np.unique(data[:, 0])
    ys = np.unique(data[:, 1])
    if xs.size * ys.size != data.shape[0]:
        raise ValueError(
            f"{spec.inputs['distribution']}: grid is not a full product"
        )
    order = np.lexsort((data[:, 1], data[:, 0]))
    probs = data[order, 2].reshape(xs.size, ys.size)

    ax = fig.add_subplot()
    mesh = ax.pcolormesh(
        _edges_from_centers(xs, spec.inputs["distribution"]),
        _edges_from_centers(ys, spec.inputs["distribution"]),
        probs.T,
        cmap=spec.options.get("cmap", "viridis"),
        vmin=0.0,
        rasterized=True,
    )
    _unit_circle(ax, color="white", linewidth=0.8)
    ax.set_xlim(-1.02, 1.02)
    ax.set_ylim(-1.02, 1.02)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.grid(False)
    label = spec.options.get("time_label")
    if label:
        ax.text(0.03, 0.95, str(label), transform=ax.transAxes,
                color="white", fontsize=10)
    fig.colorbar(mesh, ax=ax, label="bin probability")


def _render_disturbance_map(spec: FigureSpec, fig) -> None:
    data = _read_table(spec.inputs["field"], ["x", "y", "z", "d"])
    points, values = data[:, :3], data[:, 3]
    if np.any(values < 0):
        raise ValueError(f"{spec.inputs['field']}: negative disturbance")
    on_sphere = np.linalg.norm(points, axis=1) > 1.0 - 1e-9
    cmap = spec.options.get("cmap", "magma")
    size = float(spec.options.get("point_size", 6.0))
    vmax = float(values.max()) or 1.0

    ax3 = fig.add_subplot(1, 2, 1, projection="3d")
    sphere = points[on_sphere]
    ax3.scatter(sphere[:, 0], sphere[:, 1], sphere[:, 2],
                c=values[on_sphere], cmap=cmap, vmin=0.0, vmax=vmax, s=size)
    ax3.set_xlabel("x")
    ax3.set_ylabel("y")
    ax3.set_zlabel("z")
    ax3.set_box_aspect((1, 1, 1))
    ax3.set_title("sphere", fontsize=10)

    ax2 = fig.add_subplot(1, 2, 2)
    disk = points[~on_sphere]
    img = ax2.scatter(disk[:, 0], disk[:, 1], c=values[~on_sphere],
                      cmap=cmap, vmin=0.0, vmax=vmax, s=2.5 * size)
    _unit_circle(ax2, color="gray", linewidth=0.8)
    ax2.set_xlim(-1.05, 1.05)
    ax2.set_ylim(-1.05, 1.05)
    ax2.set_aspect("equal")
    ax2.set_xlabel("x")
    ax2.set_ylabel("y")
    ax2.set_title("equatorial disk", fontsize=10)
    fig.colorbar(img, ax=ax2, label="disturbance per step")


def _render_variance_line(spec: FigureSpec, fig) -> None:
    data = _read_table(spec.inputs["variance"], ["t", "variance"])
    t_us = data[:, 0] * 1e6

    ax = fig.add_subplot()
    ax.plot(t_us, data[:, 1], "o", color="tab:blue", label="ensemble")
    summary_path = spec.inputs.get("summary")
    if summary_path is not None:
        summary = _read_json(summary_path)
        slope = summary.get("slope_rad2_per_s")
        intercept = summary.get("intercept_rad2")
        if slope is not None and intercept is not None:
            ax.plot(t_us, intercept + slope * 1e-6 * t_us, "-",
                    color="tab:blue",
                    label=f"fit: {slope * 1e-6:.2f} rad$^2$/us")
        local = summary.get("local_rate_rad2_per_s")
        if slope is not None and intercept is not None and local is not None:
            ax.plot(t_us, intercept + local * 1e-6 * t_us, "--",
                    color="tab:gray",
                    label=f"local rate: {local * 1e-6:.2f} rad$^2$/us")
    ax.set_xlabel("time (us)")
    ax.set_ylabel("angular variance (rad$^2$)")
    ax.legend(frameon=False)


def _render_tomo_scatter(spec: FigureSpec, fig) -> None:
    path = spec.inputs["comparison"]
    expected = ["voxel_ix", "voxel_iy", "voxel_iz", "component",
                "predicted", "measured", "err", "count"]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        rows = list(reader)
    if header != expected:
        raise ValueError(
            f"{path}: header {header} does not match expected {expected}"
        )
    if not rows:
        raise ValueError(f"{path}: no data rows")
    component = np.array([row[3] for row in rows])
    predicted = np.array([float(row[4]) for row in rows])
    measured = np.array([float(row[5]) for row in rows])
    err = np.array([float(row[6]) for row in rows])
    count = np.array([int(row[7]) for row in rows])
    min_count = int(spec.options.get("min_count", 0))

    ax = fig.add_subplot()
    span = np.array([-1.0, 1.0])
    ax.plot(span, span, color="gray", linewidth=0.8, zorder=0)
    styles = {"x": ("tab:blue", "o"), "y": ("tab:orange", "s")}
    for comp, (color, marker) in styles.items():
        for eligible, alpha in ((True, 0.9), (False, 0.25)):
            sel = (component == comp) & ((count >= min_count) == eligible)
            if not sel.any():
                continue
            label = f"<{comp}>" if eligible else None
            ax.errorbar(predicted[sel], measured[sel], yerr=err[sel],
                        fmt=marker, color=color, alpha=alpha,
                        markersize=4, linewidth=0.8, label=label)
    ax.set_xlim(-1.05, 1.05)
    ax.set_ylim(-1.05, 1.05)
    ax.set_aspect("equal")
    ax.set_xlabel("filter prediction")
    ax.set_ylabel("tomographic estimate")
    ax.legend(frameon=False)


def _render_trajectory_3d(spec: FigureSpec, fig) -> None:
    trajectories = [
        _read_table(p, ["t", "x", "y", "z"]) for p in
        spec.inputs["trajectories"]
    ]
    ax = fig.add_subplot(projection="3d")
    theta = np.linspace(0.0, math.pi, 13)
    phi = np.linspace(0.0, 2.0 * math.pi, 25)
    tg, pg = np.meshgrid(theta, phi)
    ax.plot_wireframe(np.sin(tg) * np.cos(pg), np.sin(tg) * np.sin(pg),
                      np.cos(tg), color="lightgray", linewidth=0.4)
    cmap = plt.get_cmap("tab10")
    for i, data in enumerate(trajectories):
        color = cmap(i % 10)
        ax.plot(data[:, 1], data[:, 2], data[:, 3], color=color,
                linewidth=1.0, label=f"trajectory {i}")
        ax.scatter(*data[0, 1:], color=color, s=25, marker="o")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_zlabel("z")
    ax.set_box_aspect((1, 1, 1))
    ax.view_init(elev=float(spec.options.get("elev_deg", 20.0)),
                 azim=float(spec.options.get("azim_deg", -60.0)))
    if len(trajectories) <= 8:
        ax.legend(frameon=False, loc="upper left", fontsize=8)


_RENDERERS = {
    "distribution-heatmap": (_render_distribution_heatmap, (6.0, 5.0)),
    "disturbance-map": (_render_disturbance_map, (10.0, 4.5)),
    "variance-line": (_render_variance_line, (6.0, 4.0)),
    "tomo-scatter": (_render_tomo_scatter, (5.5, 5.5)),
    "trajectory-3d": (_render_trajectory_3d, (6.0, 6.0)),
}


def render_figure(spec: FigureSpec) -> list[Path]:
    """Render one figure specification; returns the written paths."""
    renderer, figsize = _RENDERERS[spec.kind]
    spec.out.parent.mkdir(parents=True, exist_ok=True)
    written = []
    with plt.rc_context(_RC):
        fig = plt.figure(figsize=figsize)
        try:
            renderer(spec, fig)
            if spec.title:
                fig.suptitle(spec.title)
            png = spec.out.with_suffix(".png")
            fig.savefig(png, format="png", metadata={"Software": None},
                        bbox_inches="tight")
            written.append(png)
            svg = spec.out.with_suffix(".svg")
            fig.savefig(svg, format="svg",
                        metadata={"Date": None, "Creator": None},
                        bbox_inches="tight")
            written.append(svg)
        finally:
            plt.close(fig)
    return written
