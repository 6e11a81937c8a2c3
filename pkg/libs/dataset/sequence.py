# -*- coding: utf-8 -*-
"""训练序列：把三类样本渲染成带 need_loss 标记的图文交错序列

布局（条件上下文不算 loss，模型输出算 loss）：
- planning:              T, V..., plan[LOSS], final[LOSS]
- correction_suboptimal: T, V..., plan, negative, eval[LOSS], final[LOSS]
- correction_perfect:    T, V..., plan, gt, eval(全部满足)[LOSS]   没有目标图，模型学会停止
布局只在 LAYOUTS 一处定义。
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

from libs.common.images import ImageRef
from libs.contracts.schema_validator import iter_errors
from libs.dataset.errors import InvalidSample, SchemaViolation, TokenizerFailure
from libs.dataset.models import CorrectionKind, CorrectionSample, PlanningSample
from libs.plan.codec import serialize, serialize_feedback

SEQUENCE_SCHEMA = "corpus/sequence-record.json"
DEFAULT_IMAGE_TOKEN_COST = 1024

Tokenizer = Callable[[str], int]


class Modality(str, Enum):
    TEXT = "text"
    IMAGE = "image"


class SampleKind(str, Enum):
    PLANNING = "planning"
    CORRECTION_SUBOPTIMAL = "correction_suboptimal"
    CORRECTION_PERFECT = "correction_perfect"


# (角色, need_loss)；"context" 展开为每张参考图一个段
LAYOUTS: Dict[SampleKind, Tuple[Tuple[str, bool], ...]] = {
    SampleKind.PLANNING: (("prompt", False), ("context", False), ("plan", True), ("final", True)),
    SampleKind.CORRECTION_SUBOPTIMAL: (
        ("prompt", False), ("context", False), ("plan", False), ("negative", False), ("eval", True), ("final", True),
    ),
    SampleKind.CORRECTION_PERFECT: (
        ("prompt", False), ("context", False), ("plan", False), ("negative", False), ("eval", True),
    ),
}


def loss_pattern(kind: SampleKind, n_images: int) -> List[bool]:
    out: List[bool] = []
    for role, need_loss in LAYOUTS[SampleKind(kind)]:
        out.extend([need_loss] * n_images if role == "context" else [need_loss])
    return out


_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def regex_tokenizer(text: str) -> int:
    """词 + 标点计数；确定性的占位分词器"""
    return len(_TOKEN_RE.findall(text))


@dataclass(frozen=True)
class TrainingSegment:
    modality: Modality
    need_loss: bool
    token_length: int
    text: Optional[str] = None
    image: Optional[ImageRef] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "modality", Modality(self.modality))
        if isinstance(self.token_length, bool) or not isinstance(self.token_length, int) or self.token_length < 1:
            raise InvalidSample(f"segment token_length must be a positive integer, got {self.token_length!r}")
        if (self.modality == Modality.TEXT) != (self.text is not None) or (self.modality == Modality.IMAGE) != (self.image is not None):
            raise InvalidSample(f"{self.modality.value} segment carries the wrong payload")


@dataclass(frozen=True)
class TrainingSequence:
    sample_id: str
    sample_kind: SampleKind
    segments: Tuple[TrainingSegment, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sample_kind", SampleKind(self.sample_kind))
        object.__setattr__(self, "segments", tuple(self.segments))
        if not any(s.need_loss for s in self.segments):
            raise InvalidSample(f"sequence {self.sample_id} has no need_loss segment")

    @property
    def total_tokens(self) -> int:
        return sum(s.token_length for s in self.segments)

    @property
    def loss_flags(self) -> List[bool]:
        return [s.need_loss for s in self.segments]


Sample = Union[PlanningSample, CorrectionSample]


def sample_kind_of(sample: Sample) -> SampleKind:
    if isinstance(sample, PlanningSample):
        return SampleKind.PLANNING
    if sample.kind == CorrectionKind.PERFECT:
        return SampleKind.CORRECTION_PERFECT
    return SampleKind.CORRECTION_SUBOPTIMAL


def _count(tokenizer: Tokenizer, text: str, role: str) -> int:
    try:
        n = tokenizer(text)
    except Exception as e:
        raise TokenizerFailure(f"tokenizer failed on {role} text: {e}") from e
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise TokenizerFailure(f"tokenizer returned {n!r} for {role} text, expected a positive integer")
    return n


def to_training_sequence(
    sample: Sample, tokenizer: Tokenizer = regex_tokenizer, image_token_cost: int = DEFAULT_IMAGE_TOKEN_COST
) -> TrainingSequence:
    if isinstance(image_token_cost, bool) or not isinstance(image_token_cost, int) or image_token_cost < 1:
        raise InvalidSample(f"image_token_cost must be a positive integer, got {image_token_cost!r}")
    kind = sample_kind_of(sample)
    planning = sample if isinstance(sample, PlanningSample) else sample.planning

    texts: Dict[str, str] = {
        "prompt": planning.prompt.text,
        "plan": serialize(planning.plan_gt).rstrip("\n"),
    }
    images: Dict[str, ImageRef] = {"final": planning.final_gt}
    if isinstance(sample, CorrectionSample):
        texts["eval"] = serialize_feedback(sample.eval_gt).rstrip("\n")
        images["negative"] = sample.negative

    segments: List[TrainingSegment] = []
    for role, need_loss in LAYOUTS[kind]:
        if role == "context":
            segments.extend(TrainingSegment(Modality.IMAGE, need_loss, image_token_cost, image=img) for img in planning.context)
        elif role in texts:
            segments.append(TrainingSegment(Modality.TEXT, need_loss, _count(tokenizer, texts[role], role), text=texts[role]))
        else:
            segments.append(TrainingSegment(Modality.IMAGE, need_loss, image_token_cost, image=images[role]))
    sample_id = sample.sample_id
    return TrainingSequence(sample_id, kind, tuple(segments))


# ----------------------------
# 文档编解码
# ----------------------------

def sequence_to_document(seq: TrainingSequence) -> Dict[str, Any]:
    segments = []
    for s in seq.segments:
        d: Dict[str, Any] = {"modality": s.modality.value, "need_loss": s.need_loss, "token_length": s.token_length}
        if s.text is not None:
            d["text"] = s.text
        if s.image is not None:
            d["image"] = s.image.to_document()
        segments.append(d)
    return {
        "record": "sequence",
        "sample_id": seq.sample_id,
        "sample_kind": seq.sample_kind.value,
        "total_tokens": seq.total_tokens,
        "segments": segments,
    }


def sequence_from_document(doc: Any) -> TrainingSequence:
    errors = iter_errors(SEQUENCE_SCHEMA, doc)
    if errors:
        path = "/".join(str(p) for p in errors[0].absolute_path) or "$"
        raise SchemaViolation(f"sequence record invalid at {path}: {errors[0].message}")
    segments = tuple(
        TrainingSegment(
            Modality(s["modality"]),
            bool(s["need_loss"]),
            int(s["token_length"]),
            text=s.get("text"),
            image=ImageRef.from_document(s["image"]) if "image" in s else None,
        )
        for s in doc["segments"]
    )
    seq = TrainingSequence(doc["sample_id"], SampleKind(doc["sample_kind"]), segments)
    if seq.total_tokens != doc["total_tokens"]:
        raise SchemaViolation(f"sequence {seq.sample_id} total_tokens {doc['total_tokens']} != segment sum {seq.total_tokens}")
    return seq
