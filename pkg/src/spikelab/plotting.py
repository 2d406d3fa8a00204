"""SVG figures for the CLI report path.

All figures use the non-interactive Agg backend with a fixed SVG hash salt and
no date metadata, so re-running a scenario gives identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402

plt.rcParams["svg.hashsalt"] = "spikelab"
plt.rcParams["svg.fonttype"] = "none"

_META = {"Date": None, "Creator": "spikelab"}
_REGIME_COLORS = {
    "replication": "#4c72b0",
    "nucleation": "#dd8452",
    "no_instability": "#55a868",
    "marginal": "#c8c8c8",
}
_EVENT_MARKERS = {"Replication": "o", "Nucleation_boundary": "s", "Nucleation_interior": "^"}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_META, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_heatmap(x, L, data, path, events=None, title=None, field_name="v"):
    """Space-time (x, L) colour map of a field, with detected events marked."""
    x, L, data = np.asarray(x), np.asarray(L), np.asarray(data)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    # rasterized mesh keeps the SVG small for long runs
    mesh = ax.pcolormesh(x, L, data, shading="auto", cmap="viridis", rasterized=True)
    fig.colorbar(mesh, ax=ax, label=field_name)
    if events:
        for e in events:
            ax.axhline(e.L, color="w", lw=0.6, ls="--")
            ax.plot([x[-1]], [e.L], marker=_EVENT_MARKERS.get(e.kind, "x"), color="r", clip_on=False)
    ax.set_xlabel("x")
    ax.set_ylabel("L")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_phase_diagram(pd, path):
    """Regime map of a PhaseDiagram with its critical curves."""
    keys = sorted(_REGIME_COLORS)
    codes = np.vectorize(lambda s: keys.index(s))(pd.labels).astype(float)
    cmap = ListedColormap([_REGIME_COLORS[k] for k in keys])
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    if len(pd.y) > 1:
        ax.pcolormesh(pd.x, pd.y, codes, shading="nearest", cmap=cmap, vmin=-0.5, vmax=len(keys) - 0.5, rasterized=True)
        ax.set_ylabel(pd.y_name)
    else:
        ax.pcolormesh(pd.x, [0.0, 1.0], np.vstack([codes[0], codes[0]]), shading="nearest", cmap=cmap,
                      vmin=-0.5, vmax=len(keys) - 0.5, rasterized=True)
        ax.set_yticks([])
    for name, pts in pd.curves.items():
        pts = np.asarray(pts, float)
        ax.plot(pts[:, 0], pts[:, 1], "k-" if "_c" in name else "k:", lw=1.2, label=name)
    handles = [plt.Rectangle((0, 0), 1, 1, color=_REGIME_COLORS[k]) for k in keys]
    leg1 = ax.legend(handles, keys, loc="upper left", fontsize=7)
    ax.add_artist(leg1)
    ax.legend(loc="lower right", fontsize=7)
    ax.set_xlabel(pd.x_name)
    ax.set_xlim(pd.x.min(), pd.x.max())
    ax.set_title(f"{pd.family} regimes")
    return _save(fig, path)


def plot_branches(branches, path, measure="l2norm_v"):
    """Bifurcation diagram: solid where stable, dashed otherwise; folds marked."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for k, br in enumerate(branches):
        if not br.points:
            continue
        L, y = br.L, br.measure(measure)
        stab = np.array([p.stability == "stable" for p in br.points])
        color = f"C{k % 10}"
        ax.plot(L, np.where(stab, y, np.nan), "-", color=color, label=br.label or br.branch_id)
        ax.plot(L, np.where(stab, np.nan, y), "--", color=color)
        for Lf, i in br.folds:
            ax.plot([Lf], [y[min(i, len(y) - 1)]], "kx")
    ax.set_xlabel("L")
    ax.set_ylabel(measure)
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_overlay(ov, path):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    rows = ov.rows
    ids = sorted({r[1] for r in rows if r[0] == "branch"})
    for k, b in enumerate(ids):
        pts = [(r[2], r[3], r[4]) for r in rows if r[0] == "branch" and r[1] == b]
        L = np.array([p[0] for p in pts])
        N = np.array([p[1] for p in pts])
        st = np.array([p[2] == "stable" for p in pts])
        ax.plot(L, np.where(st, N, np.nan), "-", color="k", lw=1)
        ax.plot(L, np.where(st, np.nan, N), "--", color="k", lw=0.8)
    tr = ov.trajectory()
    if tr:
        ax.plot([r[2] for r in tr], [r[3] for r in tr], "-", color="#e6b800", lw=1.5, label="trajectory")
        for r in tr:
            if r[5]:
                ax.plot([r[2]], [r[3]], "r.", ms=4)
    ax.set_xlabel("L")
    ax.set_ylabel("||v||_2")
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_core_branch(branch, path):
    """beta and C against B along a core branch."""
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.8))
    a1.plot(branch.B, branch.beta, "-")
    a2.plot(branch.B, branch.C, "-")
    if branch.fold is not None:
        a1.plot([branch.fold.B], [branch.fold.beta], "kx")
        a2.plot([branch.fold.B], [branch.fold.solution.C], "kx")
    a1.set_xlabel("B")
    a1.set_ylabel("beta")
    a2.set_xlabel("B")
    a2.set_ylabel("C")
    return _save(fig, path)


def plot_profile(y, series: dict, path, xlabel="y"):
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, vals in series.items():
        ax.plot(y, vals, label=name)
    ax.set_xlabel(xlabel)
    ax.legend(fontsize=7)
    return _save(fig, path)
