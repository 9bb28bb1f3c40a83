"""Sweep figures rendered with matplotlib.

SVG output is made reproducible by fixing the id salt and dropping the
creation date, so identical data gives byte-identical files.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_LABELS = {
    "eta_unstructured": "searched (unstructured)",
    "eta_structured": "searched (structured)",
    "eta_fixed_local": "searched (fixed local)",
    "f2_unencoded": "unencoded",
}


def _label(col: str) -> str:
    if col.startswith("eta_baseline_"):
        return col[len("eta_baseline_"):]
    return _LABELS.get(col, col)


def plot_sweep(
    rows: Sequence[dict],
    columns: Sequence[str],
    path: str | Path,
    *,
    xlabel: str = "noise strength",
    title: str | None = None,
) -> Path:
    """Plot worst-case fidelity ``1 - eta`` against the sweep parameter.

    ``f2_unencoded`` already stores a fidelity and is drawn as is. NaN
    cells leave gaps.
    """
    path = Path(path)
    xs = [r["param"] for r in rows]
    with plt.rc_context({"svg.hashsalt": "cartanqec", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for col in columns:
            ys = []
            for r in rows:
                v = r.get(col, math.nan)
                ys.append(v if col == "f2_unencoded" else 1.0 - v)
            style = "--" if col.startswith("eta_baseline_") or col == "f2_unencoded" else "-"
            ax.plot(xs, ys, style, marker="o", markersize=3, label=_label(col))
        ax.set_xlabel(xlabel)
        ax.set_ylabel("worst-case fidelity squared")
        if title:
            ax.set_title(title)
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        fmt = path.suffix.lstrip(".").lower() or "svg"
        meta = {"Date": None} if fmt in ("svg", "pdf") else None
        fig.savefig(path, format=fmt, metadata=meta)
        plt.close(fig)
    return path
