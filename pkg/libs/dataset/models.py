# -*- coding: utf-8 -*-
"""数据集样本

- RawTriple：(提示词, 参考图, 真值图) 原始三元组
- PlanningSample：(T, V, Z_plan_GT, Y_final_GT)
- CorrectionSample：规划样本 + 负样本图 + Z_eval_GT，kind ∈ {suboptimal, perfect}
  perfect 样本：负样本就是真值图，反馈全部满足
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

from libs.common.hashing import sha256_hex
from libs.common.images import ImageRef
from libs.dataset.errors import InvalidSample
from libs.inference.models import Prompt, VisualContext
from libs.plan.models import Checklist, EvalFeedback
from libs.plan.validation import validate_against_context


def make_sample_id(prompt: str, references: Tuple[ImageRef, ...], ground_truth: ImageRef) -> str:
    parts = [prompt, *(r.describe() for r in references), ground_truth.describe()]
    return sha256_hex("|".join(parts))[:16]


@dataclass(frozen=True)
class RawTriple:
    triple_id: str
    prompt: str
    references: Tuple[ImageRef, ...]
    ground_truth: ImageRef

    def __post_init__(self) -> None:
        object.__setattr__(self, "references", tuple(self.references))

    @staticmethod
    def of(prompt: str, references, ground_truth: ImageRef, triple_id: str = "") -> "RawTriple":
        refs = tuple(references)
        return RawTriple(triple_id or make_sample_id(prompt, refs, ground_truth), prompt, refs, ground_truth)


class CorrectionKind(str, Enum):
    SUBOPTIMAL = "suboptimal"
    PERFECT = "perfect"


class FailureMode(str, Enum):
    IDENTITY_LOSS = "identity_loss"
    IDENTITY_INCONSISTENCY = "identity_inconsistency"
    TEXT_MISALIGNMENT = "text_misalignment"


@dataclass(frozen=True)
class Degradation:
    variation_seed: int
    mode: Optional[FailureMode] = None
    strength: Optional[float] = None


@dataclass(frozen=True)
class PlanningSample:
    sample_id: str
    prompt: Prompt
    context: VisualContext
    plan_gt: Checklist
    final_gt: ImageRef

    def __post_init__(self) -> None:
        violations = validate_against_context(self.plan_gt, len(self.context))
        if violations:
            raise InvalidSample("plan does not validate against context: " + ", ".join(v.describe() for v in violations))


@dataclass(frozen=True)
class CorrectionSample:
    planning: PlanningSample
    negative: ImageRef
    eval_gt: EvalFeedback
    kind: CorrectionKind
    degradation: Optional[Degradation] = field(default=None)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", CorrectionKind(self.kind))
        if self.kind == CorrectionKind.PERFECT:
            if not self.eval_gt.satisfied:
                raise InvalidSample("perfect sample must carry satisfied feedback")
            if self.negative != self.planning.final_gt:
                raise InvalidSample("perfect sample negative must equal final_gt")
        elif self.eval_gt.satisfied:
            raise InvalidSample("suboptimal sample must carry unsatisfied feedback")

    @property
    def sample_id(self) -> str:
        suffix = "p" if self.kind == CorrectionKind.PERFECT else "s"
        return f"{self.planning.sample_id}-{suffix}"

    @property
    def prompt(self) -> Prompt:
        return self.planning.prompt

    @property
    def context(self) -> VisualContext:
        return self.planning.context

    @property
    def plan_gt(self) -> Checklist:
        return self.planning.plan_gt

    @property
    def final_gt(self) -> ImageRef:
        return self.planning.final_gt


@dataclass(frozen=True)
class QuarantineRecord:
    sample_id: str
    stage: str
    code: str
    reason: str

    def to_document(self) -> dict:
        return {"sample_id": self.sample_id, "stage": self.stage, "code": self.code, "reason": self.reason}


@dataclass(frozen=True)
class BuildResult:
    samples: Tuple
    quarantine: Tuple[QuarantineRecord, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "quarantine", tuple(self.quarantine))
