"""Figures for the command-line reports (matplotlib, Agg backend)."""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}


def _pyplot():
    try:
        import matplotlib
    except ImportError:  # pragma: no cover - depends on install
        raise ConfigError("output.plots needs matplotlib: pip install 'artifact[plots]'") from None
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _figure(plt, width=5.0):
    return plt.subplots(figsize=(width, width * GOLDEN))


def plot_profile(path, t, values, kappa, zeta1=None, title=None):
    """Profile against ``t`` with the equilibrium (and ``zeta1``) marked."""
    plt = _pyplot()
    with plt.rc_context(STYLE):
        fig, ax = _figure(plt)
        ax.plot(t, values, lw=1.2, color="k", label=r"$\phi$")
        ax.axhline(kappa, ls="--", lw=0.8, color="tab:red", label=r"$\kappa$")
        if zeta1 is not None:
            ax.axhline(zeta1, ls=":", lw=0.8, color="tab:blue", label=r"$\zeta_1$")
        ax.set_xlabel("t")
        ax.set_ylabel(r"$\phi(t)$")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False, loc="lower right")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_sweep(path, x, columns: dict, xlabel: str):
    """One line per numeric column."""
    plt = _pyplot()
    x = np.asarray(x, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = _figure(plt)
        for name, col in columns.items():
            y = np.array([np.nan if v is None else float(v) for v in col])
            y[~np.isfinite(y)] = np.nan
            ax.plot(x, y, lw=1.2, marker="." if x.size < 40 else None, label=name)
        ax.set_xlabel(xlabel)
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_speed_classes(path, x, classes, order, xlabel: str, threshold=None, threshold_label="c*"):
    """Step plot of the speed class along a speed grid."""
    plt = _pyplot()
    x = np.asarray(x, dtype=float)
    y = np.array([order.index(c) if c in order else np.nan for c in classes], dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = _figure(plt)
        ax.step(x, y, where="mid", color="k", lw=1.2)
        if threshold is not None and math.isfinite(threshold):
            ax.axvline(threshold, ls="--", lw=0.8, color="tab:red", label=f"{threshold_label} = {threshold:.4g}")
            ax.legend(frameon=False, loc="lower right")
        ax.set_yticks(range(len(order)))
        ax.set_yticklabels([o.replace("_", " ") for o in order])
        ax.set_ylim(-0.5, len(order) - 0.5)
        ax.set_xlabel(xlabel)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path
