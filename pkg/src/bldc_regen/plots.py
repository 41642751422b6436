"""Report figures written next to the CSV output (non-interactive backend)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .engine import RunResult  # noqa: E402

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
STYLE = {
    "figure.figsize": (8.0, 3.2),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "legend.fontsize": 8,
}


def _label(result: RunResult) -> str:
    s = result.summary
    return f"{s.get('mode', '')}/{s.get('controller', '')}"


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def speed_figure(results: Sequence[RunResult], path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ref = results[0]
        ax.plot(ref.column("t"), ref.column("speed_ref"), "k--", lw=1.0, label="reference")
        for c, r in zip(COLORS, results):
            ax.plot(r.column("t"), r.column("speed"), color=c, label=_label(r))
        ax.set_xlabel("time (s)")
        ax.set_ylabel("vehicle speed (m/s)")
        ax.legend(loc="best")
        return _save(fig, path)


def torque_figure(results: Sequence[RunResult], path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(results), 1, sharex=True, squeeze=False,
                                 figsize=(8.0, 2.4 * len(results)))
        for ax, c, r in zip(axes[:, 0], COLORS, results):
            ax.plot(r.column("t"), r.column("torque"), color=c, lw=0.6, label="estimate")
            ax.plot(r.column("t"), r.column("torque_ref"), "k", lw=1.0, label="reference")
            ax.set_ylabel("torque (N m)")
            ax.set_title(_label(r), fontsize=9)
            ax.legend(loc="best")
        axes[-1, 0].set_xlabel("time (s)")
        return _save(fig, path)


def soc_figure(results: Sequence[RunResult], path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for c, r in zip(COLORS, results):
            ax.plot(r.column("t"), 100.0 * r.column("soc"), color=c, label=_label(r))
        ax.set_xlabel("time (s)")
        ax.set_ylabel("SOC (%)")
        ax.ticklabel_format(axis="y", useOffset=False)
        ax.legend(loc="best")
        return _save(fig, path)


def kp_figure(results: Sequence[RunResult], path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for c, r in zip(COLORS, results):
            ax.plot(r.column("t"), r.column("kp"), color=c, label=_label(r))
        ax.set_xlabel("time (s)")
        ax.set_ylabel("adaptive gain kp")
        ax.legend(loc="best")
        return _save(fig, path)


def report(results: Sequence[RunResult], out_dir: str | Path, prefix: str = "") -> list[Path]:
    """Speed, torque and SOC figures, plus kp when any run uses the adaptive controller."""
    out = Path(out_dir)
    paths = [
        speed_figure(results, out / f"{prefix}speed.png"),
        torque_figure(results, out / f"{prefix}torque.png"),
        soc_figure(results, out / f"{prefix}soc.png"),
    ]
    if any(r.scenario.speed.controller == "mras" for r in results):
        paths.append(kp_figure(results, out / f"{prefix}kp.png"))
    return paths
