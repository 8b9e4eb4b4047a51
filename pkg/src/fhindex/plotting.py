"""Figures written next to the CSV outputs (Agg backend, never shown on screen)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "figure.dpi": 120,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.frameon": False,
}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_beta_sweep(rows, path) -> Path:
    """Index at the initial Beta state against periods to go, one line per discount factor.

    ``rows`` are (beta, s, lambda) triples.
    """
    rows = np.asarray(rows, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for beta in np.unique(rows[:, 0]):
            sel = rows[:, 0] == beta
            ax.plot(rows[sel, 1], rows[sel, 2], lw=1.2, label=f"β = {beta:g}")
        ax.set_xlabel("periods to go")
        ax.set_ylabel("index value")
        ax.legend()
        return _save(fig, path)


def plot_index_table(table, path, max_states: int = 12) -> Path:
    """Index against periods to go for the first ``max_states`` states."""
    table = np.asarray(table, dtype=float)
    T, n = table.shape
    d = np.arange(1, T + 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for i in range(min(n, max_states)):
            ax.plot(d, table[:, i], marker="o", ms=2.5, lw=1, label=f"state {i}")
        ax.set_xlabel("periods to go")
        ax.set_ylabel("index value")
        if n <= max_states:
            ax.legend(ncol=2, fontsize=7)
        return _save(fig, path)


def plot_scaling(records, fits, path) -> Path:
    """Operation counts per algorithm on log-log axes, with the selected polynomial fit."""
    algos = sorted({r.algo for r in records})
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for algo in algos:
            rows = [r for r in records if r.algo == algo]
            axis = "T" if algo == "rag_i0" else "n"
            xs = np.array([getattr(r, axis) for r in rows], dtype=float)
            ys = np.array([r.ops for r in rows], dtype=float)
            (line,) = ax.plot(xs, ys, "o", ms=3, label=algo)
            fit = fits.get(algo)
            if fit is not None and len(np.unique(xs)) > 1:
                grid = np.linspace(xs.min(), xs.max(), 100)
                yfit = np.polynomial.polynomial.polyval(grid, fit["coeffs"])
                ax.plot(grid, np.where(yfit > 0, yfit, np.nan), "-", lw=1, color=line.get_color(), alpha=0.7)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("size (n, or T for the countable path)")
        ax.set_ylabel("operations")
        ax.legend(fontsize=7)
        return _save(fig, path)


def plot_memory(records, path) -> Path:
    """Measured peak slots against the closed-form slot count."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for algo in sorted({r.algo for r in records}):
            rows = [r for r in records if r.algo == algo]
            ax.plot([r.formula_slots for r in rows], [r.slots for r in rows], "o", ms=3, label=algo)
        lim = [1, max([max(r.slots, r.formula_slots) for r in records] + [10])]
        ax.plot(lim, lim, "k:", lw=0.8)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("closed-form slots")
        ax.set_ylabel("measured peak slots")
        ax.legend(fontsize=7)
        return _save(fig, path)


def plot_policy_values(rows, path) -> Path:
    """Bar chart of policy values; ``rows`` are (policy, value, gap)."""
    names = [r[0] for r in rows]
    vals = [float(r[1]) for r in rows]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.bar(names, vals, color=["0.3", "tab:blue", "tab:orange"][: len(vals)])
        ax.set_ylabel("expected discounted reward")
        lo = min(vals)
        ax.set_ylim(lo - 0.1 * (max(vals) - lo + 1e-9) - 1e-9, None)
        return _save(fig, path)
