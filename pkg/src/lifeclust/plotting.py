"""Figure rendering for cluster survival curves (headless, file output only)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .survival import EmpiricalLifetimeDistribution  # noqa: E402


def save_curves_figure(curves: list[EmpiricalLifetimeDistribution],
                       path: str | Path, title: str | None = None) -> None:
    """Render the per-cluster CCDF step curves to an image file."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for k, curve in enumerate(curves):
        ax.step(range(len(curve.values)), curve.values, where="post",
                label=f"cluster {k} (n={curve.effective_n:.0f})")
    ax.set_xlabel("t")
    ax.set_ylabel("S(t)")
    ax.set_ylim(-0.02, 1.02)
    if title:
        ax.set_title(title)
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": "lifeclust"})
    plt.close(fig)
