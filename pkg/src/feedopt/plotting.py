"""Headless SVG figures of a trajectory: disturbance, input, gradient, state."""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .bundle import atomic_write  # noqa: E402

PANELS = ("w", "u", "g", "x")
_LABELS = {"w": "disturbance w(t)", "u": "input u(t)", "g": "gradient norm |g(t)|", "x": "state x(t)"}


def _figure(traj, panel: str):
    fig, ax = plt.subplots(figsize=(6.0, 3.2))
    t = traj.t
    if panel == "g":
        gn = np.linalg.norm(traj.g, axis=1)
        ax.semilogy(t, np.where(gn > 0, gn, np.nan), lw=1.0)
    else:
        data = getattr(traj, panel)
        for i in range(data.shape[1]):
            ax.plot(t, data[:, i], lw=1.0, label=f"{panel}{i + 1}")
        if data.shape[1] > 1:
            ax.legend(loc="upper right", fontsize=8)
    ax.set_xlabel("time [s]")
    ax.set_ylabel(_LABELS[panel])
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def render(traj, outdir, scenario_hash: str = "") -> list[Path]:
    """Write ``w.svg``, ``u.svg``, ``g.svg`` and ``x.svg`` into ``outdir``.

    Output is byte-stable: no timestamps, fixed hash salt.
    """
    outdir = Path(outdir)
    paths = []
    with plt.rc_context({"svg.hashsalt": "feedopt", "svg.fonttype": "none"}):
        for panel in PANELS:
            fig = _figure(traj, panel)
            buf = io.StringIO()
            fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": "feedopt",
                                                     "Description": f"scenario {scenario_hash}"})
            plt.close(fig)
            paths.append(atomic_write(outdir / f"{panel}.svg", buf.getvalue()))
    return paths
