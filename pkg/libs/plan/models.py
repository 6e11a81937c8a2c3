# -*- coding: utf-8 -*-
"""视觉一致性检查清单（Z_plan）与自评反馈（Z_eval）的领域模型

约定：
- 检查条目 z_i = {check_type, source, target}；一致性从输入参考图流向生成图，
  所以 source 指向 image_1..image_n，target 固定为 GENERATED。
- Attribute 条目把要检查的属性写进 description（例如 "the pepper, color red"）。
- 纯文本生成（没有参考图）走固定模板：清单为空，只隐含一个“提示词-图像一致性”检查位（下标 0）。
- 所有类型构造后不可变。
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Tuple

from libs.plan.errors import EmptyChecklist, EmptyPrompt, FeedbackInconsistent, MalformedRegion, PlanError

GENERATED = "GENERATED"
FIXED_TEMPLATE_INSTRUCTION = "Check the consistency between the user prompt and the generated image."

_IMAGE_ID = re.compile(r"^image_([1-9][0-9]*)$")


def image_id(index: int) -> str:
    """1-based 参考图下标 -> image_k"""
    if index < 1:
        raise PlanError(f"image index must be >= 1, got {index}")
    return f"image_{index}"


def image_index(ref_id: str) -> Optional[int]:
    """image_k -> k；GENERATED 或非法 id 返回 None"""
    m = _IMAGE_ID.match(ref_id or "")
    return int(m.group(1)) if m else None


class CheckType(str, Enum):
    IDENTITY = "identity"
    STYLE = "style"
    ATTRIBUTE = "attribute"


class PlanOrigin(str, Enum):
    MODEL_GENERATED = "model_generated"
    FIXED_TEMPLATE = "fixed_template"
    GROUND_TRUTH_ANNOTATION = "ground_truth_annotation"


@dataclass(frozen=True)
class Region:
    """归一化坐标 [0,1] 的轴对齐框"""
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        vals = (self.x0, self.y0, self.x1, self.y1)
        if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in vals):
            raise MalformedRegion(None, "non-finite coordinate")
        if not (0.0 <= self.x0 < self.x1 <= 1.0 and 0.0 <= self.y0 < self.y1 <= 1.0):
            raise MalformedRegion(None, f"need 0<=x0<x1<=1 and 0<=y0<y1<=1, got {vals}")


@dataclass(frozen=True)
class ElementRef:
    image_id: str
    description: str
    region: Optional[Region] = None

    @property
    def is_generated(self) -> bool:
        return self.image_id == GENERATED


@dataclass(frozen=True)
class CheckItem:
    check_type: CheckType
    source: ElementRef
    target: ElementRef

    @staticmethod
    def between(
        check_type: CheckType,
        source_image_id: str,
        description: str,
        *,
        region: Optional[Region] = None,
        target_description: Optional[str] = None,
        target_region: Optional[Region] = None,
    ) -> "CheckItem":
        """参考图元素 -> 生成图同名元素"""
        if image_index(source_image_id) is None:
            raise PlanError(f"source must reference an input image, got {source_image_id!r}")
        return CheckItem(
            check_type=CheckType(check_type),
            source=ElementRef(source_image_id, description, region),
            target=ElementRef(GENERATED, description if target_description is None else target_description, target_region),
        )


@dataclass(frozen=True)
class Checklist:
    items: Tuple[CheckItem, ...]
    origin: PlanOrigin

    def __post_init__(self) -> None:
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "origin", PlanOrigin(self.origin))
        if not self.items and self.origin != PlanOrigin.FIXED_TEMPLATE:
            raise EmptyChecklist(f"checklist with origin {self.origin.value} must have at least one item")

    def __len__(self) -> int:
        return len(self.items)

    @property
    def verdict_slots(self) -> int:
        """一次评估应给出的判定个数；固定模板只有一个隐含的提示词一致性检查"""
        return len(self.items) if self.items else 1


@dataclass(frozen=True)
class ItemVerdict:
    item_index: int
    satisfied: bool
    critique: str = ""
    score: Optional[float] = None

    def __post_init__(self) -> None:
        if isinstance(self.item_index, bool) or not isinstance(self.item_index, int) or self.item_index < 0:
            raise PlanError(f"item_index must be a non-negative integer, got {self.item_index!r}")
        if self.score is not None and not (0.0 <= float(self.score) <= 1.0):
            raise PlanError(f"verdict score must be in [0,1], got {self.score}")


@dataclass(frozen=True)
class EvalFeedback:
    verdicts: Tuple[ItemVerdict, ...]
    satisfied: bool
    edit_instruction: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "verdicts", tuple(self.verdicts))
        expected = all(v.satisfied for v in self.verdicts)
        if bool(self.satisfied) != expected:
            raise FeedbackInconsistent(f"satisfied={self.satisfied} but verdict conjunction is {expected}")
        if self.satisfied != (self.edit_instruction == ""):
            raise FeedbackInconsistent("edit_instruction must be empty iff feedback is satisfied")

    @staticmethod
    def from_verdicts(verdicts: Iterable[ItemVerdict], edit_instruction: str = "") -> "EvalFeedback":
        vs = tuple(verdicts)
        ok = all(v.satisfied for v in vs)
        if ok:
            return EvalFeedback(vs, True, "")
        if not edit_instruction:
            failed = [v for v in vs if not v.satisfied]
            edit_instruction = "; ".join(f"revise item {v.item_index}: {v.critique or 'not consistent'}" for v in failed)
        return EvalFeedback(vs, False, edit_instruction)

    @property
    def failed_indices(self) -> Tuple[int, ...]:
        return tuple(v.item_index for v in self.verdicts if not v.satisfied)


def fixed_template_plan(prompt: str) -> Checklist:
    """没有参考图时的固定模板：只检查提示词与生成图的一致性（走 text reward）"""
    if not isinstance(prompt, str) or not prompt.strip():
        raise EmptyPrompt("prompt must be non-empty")
    return Checklist(items=(), origin=PlanOrigin.FIXED_TEMPLATE)


def satisfied_feedback(plan: Checklist, critique: str = "consistent with the reference") -> EvalFeedback:
    """全部满足的反馈（Perfect 样本的 Z_eval_GT）"""
    verdicts = tuple(ItemVerdict(i, True, critique, 1.0) for i in range(plan.verdict_slots))
    return EvalFeedback(verdicts, True, "")
