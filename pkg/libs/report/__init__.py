# -*- coding: utf-8 -*-
"""报告生成：读取 trace / 训练报告，写 CSV 汇总表与 SVG 图"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence

from jsonschema import ValidationError

from libs.common.errors import VacotError
from libs.common.logging import setup_logging
from libs.grpo.trainer import IterationRow, read_report_csv
from libs.inference.models import EpisodeTrace
from libs.inference.trace import read_trace
from libs.report.errors import MalformedInput
from libs.report.plots import plot_grpo_curve, plot_per_iteration_reward, plot_termination_histogram
from libs.report.tables import Table, build_tables, termination_counts

logger = setup_logging("report")


@dataclass
class ReportOutput:
    tables: List[Path] = field(default_factory=list)
    plots: List[Path] = field(default_factory=list)


def load_traces(paths: Sequence[str | Path]) -> List[EpisodeTrace]:
    out = []
    for p in paths:
        try:
            out.append(read_trace(p))
        except (VacotError, OSError, ValueError, KeyError, ValidationError) as e:
            raise MalformedInput(f"trace {p}: {e}") from e
    return out


def load_training_rows(paths: Sequence[str | Path]) -> List[IterationRow]:
    rows: List[IterationRow] = []
    for p in paths:
        try:
            rows.extend(read_report_csv(p))
        except (OSError, ValueError, KeyError, TypeError) as e:
            raise MalformedInput(f"training report {p}: {e}") from e
    return rows


def write_report(traces: Sequence[EpisodeTrace], rows: Sequence[IterationRow], out_dir: str | Path) -> ReportOutput:
    out = ReportOutput()
    tables: List[Table] = build_tables(traces, rows)
    for t in tables:
        out.tables.append(t.write(out_dir))
    for plotted in (
        plot_per_iteration_reward(tables[0], out_dir),
        plot_termination_histogram(termination_counts(traces), out_dir),
        plot_grpo_curve(rows, out_dir),
    ):
        if plotted is not None:
            out.plots.append(plotted)
    logger.info(
        "report written",
        extra={"extra_fields": {
            "event": "REPORT_WRITTEN",
            "episodes": len(traces),
            "training_rows": len(rows),
            "tables": len(out.tables),
            "plots": len(out.plots),
        }},
    )
    return out


__all__ = ["MalformedInput", "ReportOutput", "load_traces", "load_training_rows", "write_report"]
