"""Figures for simulation and verification outputs.

Rendering goes through the Agg backend with fixed rc settings and no
software/date metadata, so the same data always gives the same PNG bytes.
"""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 9,
    "font.family": "DejaVu Sans",
    "axes.linewidth": 0.8,
    "lines.linewidth": 1.4,
    "legend.frameon": False,
    "savefig.dpi": 120,
    "path.simplify": False,
    "svg.hashsalt": "eslab",
}
GOLDEN = (math.sqrt(5) - 1.0) / 2.0
METADATA = {"Software": None}


def _axes(ncols=1, width=7.0):
    fig, axes = plt.subplots(1, ncols, figsize=(width, width * GOLDEN / max(1, ncols - 0.6)), squeeze=False)
    for ax in axes.ravel():
        ax.spines["right"].set_visible(False)
        ax.spines["top"].set_visible(False)
    return fig, axes.ravel()


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=METADATA)
    plt.close(fig)


def render_trajectory(rows, path, title: str = "") -> None:
    """Free-energy components and entropy-production rate against s.

    ``rows`` are (s, F, H, E_phi, sigma) tuples as written to trajectory.csv.
    """
    with plt.rc_context(STYLE):
        fig, (ax0, ax1) = _axes(2)
        s = [r[0] for r in rows]
        ax0.plot(s, [r[1] for r in rows], label="F")
        ax0.plot(s, [r[3] for r in rows], label="E[phi]", ls="--")
        ax0.set_xlabel("normalized time s")
        ax0.set_ylabel("free energy")
        ax0.legend()
        sig = [r[4] for r in rows]
        if all(v is not None for v in sig):
            ax1.plot(s, sig, color="C3")
            ax1.set_ylabel("sigma (per unit s)")
        else:
            ax1.plot(s, [r[2] for r in rows], color="C2")
            ax1.set_ylabel("entropy H")
        ax1.set_xlabel("normalized time s")
        if title:
            fig.suptitle(title)
        _save(fig, path)


def render_report(report, rows, path) -> None:
    """Accumulated action against the endpoint W2^2, plus the rate profile."""
    with plt.rc_context(STYLE):
        fig, (ax0, ax1) = _axes(2)
        labels, values = ["Sigma", "W2^2"], [report.Sigma, report.W2_squared]
        if report.F_drop is not None:
            labels.append("F_drop x horizon")
            values.append(report.F_drop * report.horizon)
        ax0.bar(labels, values, color=["C0", "C1", "C2"][: len(values)])
        ax0.set_title(f"slack = {report.slack:.4g}")
        ax0.set_ylabel("normalized action")
        if rows:
            s = [r[0] for r in rows]
            sig = [r[4] for r in rows]
            if all(v is not None for v in sig):
                ax1.plot(s, sig, color="C3")
                ax1.set_ylabel("sigma (per unit s)")
            ax1.set_xlabel("normalized time s")
        elif report.scaling is not None:
            hs = [r[0] for r in report.scaling.rows]
            ax1.plot(hs, [r[1] for r in report.scaling.rows], "o-", label="physical action")
            ax1.plot(hs, [r[3] for r in report.scaling.rows], "s--", label="W2^2 / horizon")
            ax1.set_xscale("log", base=2)
            ax1.set_xlabel("horizon")
            ax1.legend()
        flags = ", ".join(f"{k}={'pass' if v else 'FAIL'}" for k, v in report.passes.items() if v is not None)
        fig.suptitle(f"{report.scenario}: {flags}")
        _save(fig, path)


def render_scaling(table, path, title: str = "") -> None:
    with plt.rc_context(STYLE):
        fig, (ax,) = _axes(1, width=4.5)
        hs = [r[0] for r in table.rows]
        ax.plot(hs, [r[1] for r in table.rows], "o-", label="physical action")
        ax.plot(hs, [r[3] for r in table.rows], "s--", label="W2^2 / horizon")
        if all(r[4] is not None for r in table.rows):
            ax.plot(hs, [r[4] for r in table.rows], "^:", label="F_drop")
        ax.set_xscale("log", base=2)
        ax.set_yscale("log")
        ax.set_xlabel("horizon")
        ax.legend()
        if title:
            ax.set_title(title)
        _save(fig, path)
