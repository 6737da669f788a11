"""Figure rendering for the CLI report path.

Every figure is written next to its delimited data file; rendering is a
presentation convenience and never feeds back into the numbers.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import FringeData, FringeFit


def render_fringe(
    data: FringeData,
    fit: FringeFit | None,
    path,
    title: str,
    xlabel: str = "control value",
) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    yerr = np.sqrt(np.maximum(data.counts, 1.0))
    ax.errorbar(data.control, data.counts, yerr=yerr, fmt="o", ms=4,
                capsize=2, label="counts")
    if fit is not None:
        xs = np.linspace(float(np.min(data.control)), float(np.max(data.control)), 400)
        ax.plot(xs, fit.evaluate(xs), "-", lw=1.2,
                label=f"fit: V = {fit.v:.3f} $\\pm$ {fit.v_err:.3f}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("coincidence counts")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_drift(times_s, raw_ps, compensation_ps, residual_ps, path, title: str) -> None:
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7.0, 5.2), sharex=True)
    hours = np.asarray(times_s) / 3600.0
    ax1.plot(hours, raw_ps, color="tab:red", lw=0.9, label="relative delay")
    ax1.plot(hours, compensation_ps, color="tab:blue", lw=0.9, label="compensation")
    ax1.set_ylabel("delay (ps)")
    ax1.legend(loc="upper right")
    ax1.grid(True, alpha=0.3)
    ax2.plot(hours, residual_ps, color="tab:green", lw=0.8)
    ax2.set_ylabel("residual (ps)")
    ax2.set_xlabel("time (h)")
    ax2.grid(True, alpha=0.3)
    sigma = float(np.std(residual_ps, ddof=1)) if len(residual_ps) > 1 else 0.0
    ax2.set_title(f"residual sigma = {sigma:.1f} ps", fontsize=9)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_budget(budget_items, path, title: str) -> None:
    names = [n for n, _, _ in budget_items]
    values = [v for _, v, _ in budget_items]
    fig, ax = plt.subplots(figsize=(7.0, 0.45 * len(names) + 1.5))
    pos = np.arange(len(names))
    safe = np.maximum(values, 1e-300)
    ax.barh(pos, np.log10(safe), color="tab:blue", alpha=0.8)
    ax.set_yticks(pos)
    ax.set_yticklabels(names, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("log10 (factor)")
    ax.set_title(title)
    ax.grid(True, axis="x", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
