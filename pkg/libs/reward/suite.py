# -*- coding: utf-8 -*-
"""打分器组合（ScorerSuite）与奖励权重

ScorerSuite 只是一组可调用对象：
- detector(image, description) -> BoundingBox | None
- identity_embedder(image, box) -> 单位向量（对框内裁剪区域做嵌入）
- style_embedder(image) -> 单位向量
- text_image_scorer(text, image) -> [0,1]
- extras: 具名附加打分器 (text, image) -> [0,1]，例如 "pick"

serial=True 表示该 suite 不能并发调用，并发调度方需要串行化。
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Mapping, Optional

from libs.common.images import ImageRef
from libs.reward.errors import InvalidWeights, RewardError


@dataclass(frozen=True)
class BoundingBox:
    x0: float
    y0: float
    x1: float
    y1: float
    confidence: float = 1.0

    def __post_init__(self) -> None:
        for v in (self.x0, self.y0, self.x1, self.y1, self.confidence):
            if not math.isfinite(v) or v < 0.0 or v > 1.0:
                raise RewardError(f"bounding box values must lie in [0,1], got {self}")
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise RewardError(f"degenerate bounding box {self}")

    @staticmethod
    def full_frame(confidence: float = 1.0) -> "BoundingBox":
        return BoundingBox(0.0, 0.0, 1.0, 1.0, confidence)

    def to_document(self) -> Dict[str, float]:
        return {"x0": self.x0, "y0": self.y0, "x1": self.x1, "y1": self.y1, "confidence": self.confidence}


Detector = Callable[[ImageRef, str], Optional[BoundingBox]]
IdentityEmbedder = Callable[[ImageRef, BoundingBox], Any]
StyleEmbedder = Callable[[ImageRef], Any]
TextImageScorer = Callable[[str, ImageRef], float]


@dataclass
class ScorerSuite:
    detector: Detector
    identity_embedder: IdentityEmbedder
    style_embedder: StyleEmbedder
    text_image_scorer: TextImageScorer
    extras: Dict[str, TextImageScorer] = field(default_factory=dict)
    serial: bool = False
    name: str = "custom"


# 奖励消融的具名配置：只用物体相似度 / 加文本对齐 / 再加偏好打分
WEIGHT_PRESETS: Dict[str, Dict[str, Any]] = {
    "objsim": {"w_visual": 1.0, "w_text": 0.0, "extras": {}},
    "objsim+clip": {"w_visual": 1.0, "w_text": 1.0, "extras": {}},
    "objsim+clip+pick": {"w_visual": 1.0, "w_text": 1.0, "extras": {"pick": 1.0}},
}


@dataclass(frozen=True)
class RewardWeights:
    w_visual: float = 1.0
    w_text: float = 1.0
    extras: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        extras = dict(self.extras)
        for name, w in [("w_visual", self.w_visual), ("w_text", self.w_text), *extras.items()]:
            if isinstance(w, bool) or not isinstance(w, (int, float)) or not math.isfinite(w) or w < 0:
                raise InvalidWeights(f"weight {name} must be finite and >= 0, got {w!r}")
        object.__setattr__(self, "w_visual", float(self.w_visual))
        object.__setattr__(self, "w_text", float(self.w_text))
        object.__setattr__(self, "extras", {str(k): float(v) for k, v in sorted(extras.items())})

    @property
    def total(self) -> float:
        return self.w_visual + self.w_text + sum(self.extras.values())

    @staticmethod
    def preset(name: str) -> "RewardWeights":
        if name not in WEIGHT_PRESETS:
            raise InvalidWeights(f"unknown weight preset {name!r}; known: {sorted(WEIGHT_PRESETS)}")
        return RewardWeights.from_document(WEIGHT_PRESETS[name])

    @staticmethod
    def from_document(doc: Mapping[str, Any]) -> "RewardWeights":
        if not isinstance(doc, Mapping):
            raise InvalidWeights("weights document must be a mapping")
        if "preset" in doc:
            return RewardWeights.preset(str(doc["preset"]))
        unknown = set(doc) - {"w_visual", "w_text", "extras"}
        if unknown:
            raise InvalidWeights(f"unknown weight keys: {sorted(unknown)}")
        try:
            return RewardWeights(
                w_visual=float(doc.get("w_visual", 1.0)),
                w_text=float(doc.get("w_text", 1.0)),
                extras=dict(doc.get("extras") or {}),
            )
        except (TypeError, ValueError) as e:
            raise InvalidWeights(f"invalid weights document: {e}") from e

    def to_document(self) -> Dict[str, Any]:
        return {"w_visual": self.w_visual, "w_text": self.w_text, "extras": dict(self.extras)}
