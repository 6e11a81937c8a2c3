# -*- coding: utf-8 -*-
"""SVG 图（matplotlib Agg 后端）

固定 svg.hashsalt 并去掉 Date 元数据，同样的输入产出逐字节相同的文件。
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from libs.grpo.trainer import IterationRow  # noqa: E402
from libs.report.tables import Table  # noqa: E402

_SVG_RC = {"svg.hashsalt": "vacot-report", "svg.fonttype": "none"}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_grpo_curve(rows: Sequence[IterationRow], out_dir: str | Path) -> Optional[Path]:
    if not rows:
        return None
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        xs = [r.iter for r in rows]
        ax.plot(xs, [r.mean_reward for r in rows], label="group mean reward")
        ax.plot(xs, [r.eval_reward for r in rows], label="held-out reward")
        ax.set_xlabel("iteration")
        ax.set_ylabel("reward")
        ax.set_title("GRPO reward")
        ax.legend(loc="lower right")
        ax.grid(alpha=0.3)
        return _save(fig, Path(out_dir) / "grpo_reward.svg")


def plot_per_iteration_reward(table: Table, out_dir: str | Path) -> Optional[Path]:
    if not table.rows:
        return None
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        xs = [int(r[0]) for r in table.rows]
        ax.plot(xs, [float(r[2]) for r in table.rows], marker="o", label="r_total")
        ax.plot(xs, [float(r[3]) for r in table.rows], marker="s", label="r_visual")
        ax.set_xticks(xs)
        ax.set_xlabel("refinement iteration")
        ax.set_ylabel("mean reward")
        ax.legend(loc="lower right")
        ax.grid(alpha=0.3)
        return _save(fig, Path(out_dir) / "per_iteration_reward.svg")


def plot_termination_histogram(counts: dict, out_dir: str | Path) -> Optional[Path]:
    if not counts:
        return None
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.bar([str(k) for k in counts], list(counts.values()))
        ax.set_xlabel("iterations used")
        ax.set_ylabel("episodes")
        return _save(fig, Path(out_dir) / "termination_histogram.svg")
