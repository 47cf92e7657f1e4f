"""Matplotlib figures written next to the CSV output (non-interactive backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_timeseries", "plot_experiment", "plot_operator_checks"]


def _rel(v: np.ndarray) -> np.ndarray:
    scale = abs(v[0]) if v[0] != 0 else 1.0
    return np.abs(v - v[0]) / scale


def plot_timeseries(data: np.ndarray, path: str | Path) -> Path:
    """Relative drifts and Zhidkov size of a time series."""
    t = data["t"]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for name in ("H1", "H2_inls", "mass"):
        v = data[name]
        if np.all(np.isfinite(v)) and len(v) > 1:
            ax1.semilogy(t[1:], np.maximum(_rel(v)[1:], 1e-17), label=name)
    ax1.set_xlabel("t")
    ax1.set_ylabel("relative drift")
    ax1.legend()
    ax2.plot(t, data["E1"], label="E1")
    ax2.plot(t, data["E2"], label="E2")
    ax2.plot(t, data["H2"], label="H2")
    ax2.set_xlabel("t")
    ax2.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return Path(path)


def plot_experiment(report, path: str | Path) -> Path:
    """One log-scale panel per experiment kind."""
    fig, ax = plt.subplots(figsize=(5, 4))
    rows = np.array(report.table, dtype=float) if report.table else np.zeros((0, 2))
    if report.name == "mollified":
        for n in np.unique(rows[:, 0]):
            sel = rows[:, 0] == n
            ax.semilogy(rows[sel, 1], rows[sel, 2], "o-", label=f"n={int(n)}")
        lv = rows[:, 1]
        if lv.size:
            ax.semilogy(lv, rows[0, 2] * 2.0 ** (-0.5 * (lv - lv[0])), "k--", label="2^(-l/2)")
        ax.set_xlabel("level l")
        ax.set_ylabel("sup_t d1(u_l, u_lmax)")
    elif report.name == "continuity":
        ax.loglog(rows[:, 0], rows[:, 3], "o-")
        ax.set_xlabel("eps")
        ax.set_ylabel("sup_t d1 ratio")
    elif report.name == "deepwater":
        ax.loglog(rows[:, 0], rows[:, 1], "o-", label="measured")
        if rows.size:
            ax.loglog(rows[:, 0], rows[0, 1] * rows[0, 0] / rows[:, 0], "k--", label="1/delta")
        ax.set_xlabel("delta")
        ax.set_ylabel("sup_t d1(u_delta, u_H)")
    else:
        t = rows[:, 0]
        for j, name in ((1, "H1"), (3, "H2_inls"), (4, "mass")):
            v = rows[:, j]
            if np.all(np.isfinite(v)) and len(v) > 1:
                ax.semilogy(t[1:], np.maximum(_rel(v)[1:], 1e-17), label=name)
        ax.set_xlabel("t")
        ax.set_ylabel("relative drift")
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    ax.set_title(f"{report.name}: {'pass' if report.passed else 'FAIL'}")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return Path(path)


def plot_operator_checks(rows: list, path: str | Path) -> Path:
    """Error of each operator check against its tolerance."""
    fig, ax = plt.subplots(figsize=(8, 4))
    err = np.array([max(r[2], 1e-18) for r in rows])
    tol = np.array([r[3] for r in rows])
    x = np.arange(len(rows))
    ax.semilogy(x, err, "o", label="error")
    ax.semilogy(x, tol, "k_", markersize=12, label="tolerance")
    ax.set_xticks(x)
    ax.set_xticklabels([f"{r[0]}:{r[1]}" for r in rows], rotation=90, fontsize=6)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return Path(path)
