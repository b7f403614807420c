"""Figures and tabular output for experiment reports."""

from __future__ import annotations

import csv
import io
import json
from typing import Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .harness import FitResult, RunMetrics  # noqa: E402
from .spectral import atomic_write  # noqa: E402

# no version or date stamps, so identical inputs give identical files
_PNG_META = {"Software": None}


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(columns: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def write_table(path, columns: Sequence[str], rows) -> None:
    atomic_write(path, csv_text(columns, rows).encode())


def write_json(path, obj) -> None:
    atomic_write(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode())


def write_text(path, text: str) -> None:
    atomic_write(path, text.encode())


def save_figure(path, fig) -> None:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=110, metadata=_PNG_META)
    plt.close(fig)
    atomic_write(path, buf.getvalue())


def _fit_line(ax, fit: FitResult, label: str, style: str = "--"):
    xs = np.array([p[0] for p in fit.points])
    ax.loglog(xs, np.exp(fit.intercept) * xs**fit.slope, style, lw=1, label=f"{label}: slope {fit.slope:.2f}")


def loglog_figure(
    xs: Sequence[float],
    series: Mapping[str, Sequence[float]],
    fits: Optional[Mapping[str, FitResult]] = None,
    xlabel: str = "eps",
    title: str = "",
):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for name, ys in series.items():
        ax.loglog(xs, ys, "o", label=name)
        if fits and name in fits:
            _fit_line(ax, fits[name], name)
    ax.set_xlabel(xlabel)
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def sweep_figure(runs: Sequence[RunMetrics], fits: Mapping[str, FitResult]):
    """Error histories per eps (left) and max-error scaling with fits (right)."""
    fig, (a, b) = plt.subplots(1, 2, figsize=(10, 4))
    for r in runs:
        a.semilogy(r.t * r.eps**2, r.err_H, label=f"eps={r.eps:g}")
    a.set_xlabel("slow time")
    a.set_ylabel("energy-norm error")
    a.grid(True, alpha=0.3)
    a.legend(fontsize=8)
    eps = [r.eps for r in runs]
    for name in ("err_H", "err_H1_diff"):
        b.loglog(eps, [r.max(name) for r in runs], "o", label=name)
        if name in fits:
            _fit_line(b, fits[name], name)
    b.set_xlabel("eps")
    b.grid(True, which="both", alpha=0.3)
    b.legend(fontsize=8)
    fig.tight_layout()
    return fig


def history_figure(t: Sequence[float], series: Mapping[str, Sequence[float]], title: str = ""):
    names = list(series)
    fig, axes = plt.subplots(len(names), 1, figsize=(6, 1.8 * len(names)), sharex=True, squeeze=False)
    for ax, name in zip(axes[:, 0], names):
        ax.plot(t, series[name], lw=1)
        ax.set_ylabel(name, fontsize=8)
        ax.grid(True, alpha=0.3)
    axes[-1, 0].set_xlabel("t")
    axes[0, 0].set_title(title)
    fig.tight_layout()
    return fig


def profile_figure(x: np.ndarray, values: Mapping[str, np.ndarray], title: str = ""):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for name, v in values.items():
        ax.plot(x, v, lw=1, label=name)
    ax.set_title(title)
    ax.set_xlabel("x")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig
