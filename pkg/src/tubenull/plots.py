"""Figure rendering for run reports (Agg backend, PNG files)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _read_csv(path: Path):
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    cols = {h: [] for h in header}
    for ln in lines[1:]:
        for h, v in zip(header, ln.split(",")):
            cols[h].append(v)
    return cols


def _floats(cols, name):
    return np.array([float(v) if v else np.nan for v in cols[name]])


def render_box_cover(csv_path: Path, out_path: Path, dimension: int = 2) -> None:
    cols = _read_csv(csv_path)
    n = _floats(cols, "n")
    ratio = _floats(cols, "count_times_h")
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.semilogy(n, ratio, "o-", label="count * h(2^-n)")
    ax.axhline(2.0**dimension, color="gray", ls="--", lw=0.8, label="tracking band")
    ax.axhline(2.0**-dimension, color="gray", ls="--", lw=0.8)
    ax.set_xlabel("level n")
    ax.set_ylabel("normalized cube count")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)


def render_trend(csv_path: Path, out_path: Path) -> None:
    cols = _read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.plot(_floats(cols, "n"), _floats(cols, "max_y"), "o-")
    ax.set_xlabel("level n")
    ax.set_ylabel("max normalized intersection over the net")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)


def render_tails(csv_path: Path, out_path: Path) -> None:
    cols = _read_csv(csv_path)
    n = _floats(cols, "n")
    kappa = _floats(cols, "kappa")
    freq = _floats(cols, "frequency")
    env_half = _floats(cols, "envelope_at_half")
    fig, ax = plt.subplots(figsize=(6, 3.6))
    for lvl in np.unique(n):
        sel = n == lvl
        pos = sel & (freq > 0)
        ax.semilogy(kappa[pos], freq[pos], "o-", label=f"n={int(lvl)} empirical")
        fit = sel & ~np.isnan(env_half)
        if fit.any():
            ax.semilogy(kappa[fit], env_half[fit], "--", label=f"n={int(lvl)} envelope(k/2)")
    ax.set_xlabel("kappa")
    ax.set_ylabel("exceedance frequency")
    if ax.lines:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)


def render_density(csv_path: Path, out_path: Path) -> None:
    cols = _read_csv(csv_path)
    n = _floats(cols, "n")
    phi = _floats(cols, "direction")
    dens = _floats(cols, "max_density")
    fig, ax = plt.subplots(figsize=(6, 3.6))
    for lvl in np.unique(n):
        sel = n == lvl
        ax.plot(phi[sel], dens[sel], lw=0.9, label=f"n={int(lvl)}")
    ax.set_xlabel("tube direction (radians)")
    ax.set_ylabel("max shadow density")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)


def render_fibers(csv_path: Path, out_path: Path) -> None:
    cols = _read_csv(csv_path)
    r = _floats(cols, "r")
    ratio = _floats(cols, "ratio")
    count = _floats(cols, "count")
    fig, ax = plt.subplots(figsize=(6, 3.6))
    pos = count > 0
    ax.loglog(r[pos], ratio[pos], ".", alpha=0.25, label="per line")
    rs = np.unique(r[pos])
    env = [ratio[pos][r[pos] == rv].max() for rv in rs]
    ax.loglog(rs, env, "o-", color="crimson", label="envelope")
    ax.set_xlabel("cover interval length r")
    ax.set_ylabel("count * h(r) / r")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)


def render_breakpoints(csv_path: Path, out_path: Path) -> None:
    cols = _read_csv(csv_path)
    ns = np.array([int(v) for v in cols["N"]])
    xs = _floats(cols, "x")
    ps = _floats(cols, "p")
    smallest = ns.min()
    sel = ns == smallest
    grid = np.linspace(0, 1, 400)
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    ax.plot(grid, grid**3 / 3.0, lw=1.2, label="f(x) = x^3/3")
    ax.plot(xs[sel], ps[sel], "o-", ms=4, label=f"reconstruction, N={smallest}")
    for x in xs[sel]:
        ax.axvline(x, color="gray", lw=0.4, alpha=0.5)
    ax.set_xlabel("x")
    ax.set_ylabel("value")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)


RENDERERS = {
    "box_cover.csv": ("box_cover.png", render_box_cover),
    "trend.csv": ("trend.png", render_trend),
    "tails.csv": ("tails.png", render_tails),
    "density.csv": ("density.png", render_density),
    "fibers.csv": ("fibers.png", render_fibers),
    "breakpoints.csv": ("breakpoints.png", render_breakpoints),
}
