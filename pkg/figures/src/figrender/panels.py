"""The three figure panels.

Each panel is a pure function of the input directory: fonts, DPI, and
canvas size are pinned, so re-rendering the same inputs reproduces the
pixel dimensions and every annotated number.  The fitted slope of each
error curve is an ordinary least-squares fit of log10(rmse) on
log10(delta) and is stored at full precision in the PNG metadata.
"""

import warnings

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .inputs import (manifest_horizon, read_curve, read_field, read_manifest,
                     read_rmse)

_STYLE = {
    "figure.dpi": 150,
    "savefig.dpi": 150,
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
}

_REFERENCE_SLOPES = (1.0, 0.75)
_REFERENCE_LABELS = ("slope 1", "slope 3/4")


def ols_slope(x, y):
    """Least-squares slope of y on x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = x - x.mean()
    return float(np.dot(dx, y - y.mean()) / np.dot(dx, dx))


def _series(rows, with_x0):
    """Rows grouped by curve identity, keys sorted for stable colors."""
    groups = {}
    for row in rows:
        key = (row["estimator"], row["kernel"])
        if with_x0:
            key = key + (row["x0"],)
        groups.setdefault(key, []).append(row)
    return dict(sorted(groups.items()))


def _no_data(ax, filename):
    warnings.warn(f"{filename} has no data rows, rendering an empty panel")
    ax.text(0.5, 0.5, "no data", transform=ax.transAxes,
            ha="center", va="center", color="0.5")


def _rmse_fig(rows, metadata):
    fig, ax = plt.subplots(figsize=(4.2, 3.6), constrained_layout=True)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(r"$\delta$")
    ax.set_ylabel("rmse")
    ax.set_title("estimation error vs resolution")
    if not rows:
        _no_data(ax, "rmse.csv")
        return fig
    many_x0 = len({row["x0"] for row in rows}) > 1
    for (est, kern, x0), grp in _series(rows, with_x0=True).items():
        grp = sorted(grp, key=lambda row: row["delta"])
        # log-log fit and plot use the positive-rmse points only
        pts = [(row["delta"], row["rmse"]) for row in grp if row["rmse"] > 0]
        label = f"{est} {kern}" + (f" x0={x0:g}" if many_x0 else "")
        if len(pts) >= 2:
            d, r = zip(*pts)
            slope = ols_slope(np.log10(d), np.log10(r))
            metadata[f"slope {est} {kern} x{x0:g}"] = repr(slope)
            label += f" (slope {slope:.3f})"
        if pts:
            d, r = zip(*pts)
            ax.plot(d, r, marker="o", markersize=3.5, label=label)
    _reference_lines(ax, rows)
    ax.legend()
    return fig


def _reference_lines(ax, rows):
    pts = [(row["delta"], row["rmse"]) for row in rows if row["rmse"] > 0]
    if not pts:
        return
    d_ref = max(d for d, _ in pts)
    r_ref = max(r for d, r in pts if d == d_ref)
    d_lo = min(d for d, _ in pts)
    if d_lo == d_ref:
        return
    grid = np.array([d_lo, d_ref])
    for slope, label in zip(_REFERENCE_SLOPES, _REFERENCE_LABELS):
        ax.plot(grid, r_ref * (grid / d_ref) ** slope,
                linestyle="--", color="0.6", linewidth=1.0)
        ax.annotate(label, (grid[0], r_ref * (grid[0] / d_ref) ** slope),
                    textcoords="offset points", xytext=(2, -9),
                    fontsize=7, color="0.4")


def _curve_fig(rows, metadata):
    fig, ax = plt.subplots(figsize=(4.2, 3.6), constrained_layout=True)
    ax.set_xlabel(r"$x_0$")
    ax.set_ylabel(r"$\theta$")
    ax.set_title("pointwise estimates")
    if not rows:
        _no_data(ax, "curve.csv")
        return fig
    truth = sorted({(row["x0"], row["theta_true"]) for row in rows})
    ax.plot([p[0] for p in truth], [p[1] for p in truth],
            color="black", linewidth=1.2, label="truth")
    for (est, kern), grp in _series(rows, with_x0=False).items():
        grp = sorted(grp, key=lambda row: row["x0"])
        x0 = [row["x0"] for row in grp]
        hat = [row["theta_hat"] for row in grp]
        line, = ax.plot(x0, hat, linewidth=1.0, label=f"{est} {kern}")
        ax.fill_between(x0, [row["ci_lo"] for row in grp],
                        [row["ci_hi"] for row in grp],
                        color=line.get_color(), alpha=0.2, linewidth=0)
    metadata["series"] = str(len(_series(rows, with_x0=False)))
    ax.legend()
    return fig


def _heatmap_fig(field, horizon, metadata):
    fig, ax = plt.subplots(figsize=(4.8, 3.6), constrained_layout=True)
    q_lo, q_hi = np.quantile(field, (0.01, 0.99))
    vlim = max(abs(q_lo), abs(q_hi))
    if vlim == 0:
        vlim = 1.0
    image = ax.imshow(field, origin="lower", aspect="auto",
                      extent=(0.0, 1.0, 0.0, horizon),
                      cmap="RdBu_r", vmin=-vlim, vmax=vlim,
                      interpolation="nearest")
    fig.colorbar(image, ax=ax, label=r"$X(t, x)$")
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    ax.set_title("simulated field")
    metadata["clim"] = repr(vlim)
    metadata["snapshot-shape"] = f"{field.shape[0]}x{field.shape[1]}"
    return fig


def render(panel, in_dir, out_path):
    """Render one panel from a study output directory; returns the PNG
    metadata, which records the manifest hash and all annotated numbers."""
    manifest, digest = read_manifest(in_dir)
    metadata = {"panel": panel, "manifest-sha256": digest}
    with plt.rc_context(_STYLE):
        if panel == "rmse":
            fig = _rmse_fig(read_rmse(in_dir), metadata)
        elif panel == "curve":
            fig = _curve_fig(read_curve(in_dir), metadata)
        elif panel == "heatmap":
            fig = _heatmap_fig(read_field(in_dir, manifest),
                               manifest_horizon(manifest), metadata)
        else:
            raise ValueError(f"unknown panel {panel!r}")
        try:
            fig.savefig(out_path, format="png", metadata=dict(metadata))
        finally:
            plt.close(fig)
    return metadata
