# -*- coding: utf-8 -*-
"""报告汇总表（CSV）

输入：推理 trace 列表和/或 GRPO 训练报告行
输出：
- per_iteration_reward.csv：每个 refine 步的平均奖励（只统计记录了奖励的步）
- termination_histogram.csv：按实际迭代步数计数
- grpo_curve.csv：训练曲线
- summary.csv：metric,value 两列
空输入只写表头。输出是输入的纯函数。
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from libs.grpo.trainer import IterationRow
from libs.inference.models import EpisodeTrace, TerminatedBy

PER_ITERATION_COLUMNS = ["iteration", "episodes", "mean_r_total", "mean_r_visual", "mean_r_text"]
HISTOGRAM_COLUMNS = ["steps", "count", "satisfied", "max_iterations"]
CURVE_COLUMNS = ["iter", "mean_reward", "eval_reward", "kl", "clip_fraction"]
SUMMARY_COLUMNS = ["metric", "value"]


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs)


@dataclass(frozen=True)
class Table:
    name: str
    columns: List[str]
    rows: List[List[str]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        w.writerows(self.rows)
        return buf.getvalue()

    def write(self, out_dir: str | Path) -> Path:
        p = Path(out_dir) / f"{self.name}.csv"
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(self.to_csv(), encoding="utf-8")
        return p


def per_iteration_reward(traces: Sequence[EpisodeTrace]) -> Table:
    buckets: Dict[int, List[Tuple[float, float, float]]] = defaultdict(list)
    for trace in traces:
        for step in trace.steps:
            if step.reward is not None:
                r = step.reward
                buckets[step.iteration].append((r.r_total, r.r_visual, r.r_text))
    rows = []
    for k in sorted(buckets):
        vals = buckets[k]
        rows.append([
            str(k),
            str(len(vals)),
            _fmt(_mean([v[0] for v in vals])),
            _fmt(_mean([v[1] for v in vals])),
            _fmt(_mean([v[2] for v in vals])),
        ])
    return Table("per_iteration_reward", PER_ITERATION_COLUMNS, rows)


def termination_counts(traces: Sequence[EpisodeTrace]) -> Dict[int, int]:
    return dict(sorted(Counter(t.iterations for t in traces).items()))


def termination_histogram(traces: Sequence[EpisodeTrace]) -> Table:
    by_reason: Dict[int, Counter] = defaultdict(Counter)
    for t in traces:
        by_reason[t.iterations][t.terminated_by] += 1
    rows = []
    for steps, count in termination_counts(traces).items():
        c = by_reason[steps]
        rows.append([str(steps), str(count), str(c[TerminatedBy.SATISFIED]), str(c[TerminatedBy.MAX_ITERATIONS])])
    return Table("termination_histogram", HISTOGRAM_COLUMNS, rows)


def grpo_curve(rows: Sequence[IterationRow]) -> Table:
    out = [
        [str(r.iter), _fmt(r.mean_reward), _fmt(r.eval_reward), _fmt(r.kl), _fmt(r.clip_fraction)]
        for r in rows
    ]
    return Table("grpo_curve", CURVE_COLUMNS, out)


def summary(traces: Sequence[EpisodeTrace], rows: Sequence[IterationRow]) -> Table:
    out: List[List[str]] = []
    if traces:
        out.append(["episodes", str(len(traces))])
        out.append(["mean_iterations", _fmt(_mean([t.iterations for t in traces]))])
        satisfied = sum(1 for t in traces if t.terminated_by == TerminatedBy.SATISFIED)
        out.append(["satisfied_fraction", _fmt(satisfied / len(traces))])
    if rows:
        out.append(["grpo_iterations", str(len(rows))])
        out.append(["mean_reward_max", _fmt(max(r.mean_reward for r in rows))])
        out.append(["mean_reward_last", _fmt(rows[-1].mean_reward)])
        out.append(["eval_reward_max", _fmt(max(r.eval_reward for r in rows))])
        out.append(["eval_reward_last", _fmt(rows[-1].eval_reward)])
    return Table("summary", SUMMARY_COLUMNS, out)


def build_tables(traces: Sequence[EpisodeTrace], rows: Sequence[IterationRow]) -> List[Table]:
    return [per_iteration_reward(traces), termination_histogram(traces), grpo_curve(rows), summary(traces, rows)]
