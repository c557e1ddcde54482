"""Figure rendering for the CLI report paths.

Every function takes already-computed results and writes one image file;
nothing here computes anything the delimited output does not already hold.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

_RC = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "font.size": 10,
    "axes.labelsize": 10,
    "axes.titlesize": 11,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    _pyplot().close(fig)
    return path


def plot_curve(curve, path) -> Path:
    """Integrity metric against training size, minimiser marked."""
    plt = _pyplot()
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.plot(curve.p, curve.f, color="C0", label="f(m, n, p)")
        best = dict(curve.entries)[curve.argmin_p]
        ax.plot([curve.argmin_p], [best], "o", color="C3", label=f"p* = {curve.argmin_p}")
        ax.set_yscale("log")
        ax.set_xlabel("training size p")
        ax.set_ylabel("expected (loss - sigma^2)^2 / sigma^4")
        ax.set_title(f"m = {curve.problem.m}, n = {curve.problem.n}")
        ax.legend()
        return _save(fig, path)


def plot_overlay(comparison, path) -> Path:
    """Simulated integrity (with 2-SE bars) over the analytic curve."""
    plt = _pyplot()
    cfg = comparison.result.config
    rows = [r for r in comparison.rows if r.analytic_f is not None]
    p = np.array([r.p for r in rows])
    emp = np.array([r.normalized for r in rows])
    se = np.array([r.normalized_se for r in rows])
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.plot(p, [r.analytic_f for r in rows], color="C0", label="analytic f")
        ax.errorbar(p, emp, yerr=2 * se, fmt="x", color="C1", ms=4, capsize=2,
                    label=f"simulated, {cfg.trials} trials")
        ax.axvline(comparison.optimal_p, color="C0", ls="--", lw=0.8, label=f"p* = {comparison.optimal_p}")
        ax.axvline(comparison.empirical_argmin, color="C1", ls=":", lw=0.8,
                   label=f"empirical argmin = {comparison.empirical_argmin}")
        ax.set_yscale("log")
        ax.set_xlabel("training size p")
        ax.set_ylabel("mean squared deviation / sigma^4")
        ax.set_title(f"m = {cfg.m}, n = {cfg.n}, sigma = {cfg.sigma:g}")
        ax.legend()
        return _save(fig, path)


def plot_asymptotic(rows: Sequence[dict], path) -> Path:
    """Log-ratio of the exact root to the truncated expansion, against ``m``."""
    plt = _pyplot()
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for (n, order) in sorted({(r["n"], r["order"]) for r in rows}):
            sel = sorted((r for r in rows if r["n"] == n and r["order"] == order), key=lambda r: r["m"])
            ax.plot([r["m"] for r in sel], [r["log_ratio"] for r in sel], "o-", ms=3,
                    label=f"n = {n}, {order} term{'s' if order > 1 else ''}")
        ax.axhline(0.0, color="k", lw=0.6)
        ax.set_xscale("log")
        ax.set_xlabel("m")
        ax.set_ylabel("log(exact root / expansion)")
        ax.legend()
        return _save(fig, path)


def plot_bench(reports, path) -> Path:
    """Mean permutation loss of each policy relative to the half split."""
    plt = _pyplot()
    from .databench import POLICIES

    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        width = 0.8 / len(POLICIES)
        x = np.arange(len(reports))
        for k, name in enumerate(POLICIES):
            rel = [rep.policy(name).mean_loss / rep.policy("half").mean_loss for rep in reports]
            ax.bar(x + (k - 1) * width, rel, width, label=name)
        ax.set_xticks(x)
        ax.set_xticklabels([f"{Path(r.source).name}\n({r.m}, {r.n})" for r in reports], fontsize=7)
        ax.set_ylabel("mean loss / loss at p = m/2")
        ax.axhline(1.0, color="k", lw=0.6)
        ax.legend()
        return _save(fig, path)
