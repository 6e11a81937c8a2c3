# -*- coding: utf-8 -*-
"""清单 / 反馈的上下文校验

不抛异常，返回违规列表，由调用方决定是拒绝（推理引擎）还是隔离（数据构建）。
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List

from libs.plan.errors import PlanError
from libs.plan.models import Checklist, EvalFeedback, image_index


class ViolationKind(str, Enum):
    OUT_OF_RANGE_SOURCE = "OutOfRangeSource"
    GENERATED_SOURCE = "GeneratedSource"
    NON_GENERATED_TARGET = "NonGeneratedTarget"
    VERDICT_OUT_OF_RANGE = "VerdictOutOfRange"
    DUPLICATE_VERDICT = "DuplicateVerdict"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    item_index: int
    detail: str = ""

    def describe(self) -> str:
        return f"{self.kind.value}@{self.item_index}: {self.detail}" if self.detail else f"{self.kind.value}@{self.item_index}"


def validate_against_context(plan: Checklist, context_size: int) -> List[Violation]:
    """source 必须是 image_1..image_n，target 必须是 GENERATED"""
    if context_size < 0:
        raise PlanError(f"context_size must be >= 0, got {context_size}")

    out: List[Violation] = []
    for i, item in enumerate(plan.items):
        src = item.source
        if src.is_generated:
            out.append(Violation(ViolationKind.GENERATED_SOURCE, i, "source must reference an input image"))
        else:
            k = image_index(src.image_id)
            if k is None or k > context_size:
                out.append(Violation(ViolationKind.OUT_OF_RANGE_SOURCE, i, f"{src.image_id} not in 1..{context_size}"))
        if not item.target.is_generated:
            out.append(Violation(ViolationKind.NON_GENERATED_TARGET, i, f"target is {item.target.image_id}"))
    return out


def validate_feedback(feedback: EvalFeedback, plan: Checklist) -> List[Violation]:
    """判定下标必须落在清单的检查位内且不重复"""
    out: List[Violation] = []
    seen = set()
    slots = plan.verdict_slots
    for v in feedback.verdicts:
        if v.item_index >= slots:
            out.append(Violation(ViolationKind.VERDICT_OUT_OF_RANGE, v.item_index, f"plan has {slots} check slot(s)"))
        elif v.item_index in seen:
            out.append(Violation(ViolationKind.DUPLICATE_VERDICT, v.item_index))
        seen.add(v.item_index)
    return out
