# -*- coding: utf-8 -*-
"""复合奖励：R_total = w_visual·R_visual + w_text·R_text + Σ w_k·extra_k

- R_visual：按清单条目逐项打分后取算术平均（与清单长度无关）；空清单（固定模板）记 0
- Identity / Attribute 走物体相似度（Attribute 暂复用该路径，集中在 _score_item 分派处便于替换）
- Style 走风格相似度
- 累加顺序固定：先视觉、再文本、再按名字排序的附加项，保证结果逐位可复现
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Sequence, Tuple

from libs.common.images import ImageRef
from libs.plan.models import Checklist, CheckItem, CheckType, image_index
from libs.reward.errors import EmbedderFailure, RewardError, UnknownExtraScorer
from libs.reward.similarity import SimilarityResult, bounded_score, object_similarity_detail, style_similarity
from libs.reward.suite import RewardWeights, ScorerSuite


@dataclass(frozen=True)
class ItemScore:
    item_index: int
    score: float
    detail: str


@dataclass(frozen=True)
class RewardBreakdown:
    per_item: Tuple[ItemScore, ...]
    r_visual: float
    r_text: float
    r_total: float
    extras: Mapping[str, float] = field(default_factory=dict)
    weights: RewardWeights = field(default_factory=RewardWeights)

    def to_document(self) -> Dict[str, Any]:
        return {
            "per_item": [{"item_index": s.item_index, "score": s.score, "detail": s.detail} for s in self.per_item],
            "r_visual": self.r_visual,
            "r_text": self.r_text,
            "r_total": self.r_total,
            "extras": dict(self.extras),
            "weights": self.weights.to_document(),
        }

    @staticmethod
    def from_document(doc: Mapping[str, Any]) -> "RewardBreakdown":
        return RewardBreakdown(
            per_item=tuple(ItemScore(int(d["item_index"]), float(d["score"]), str(d["detail"])) for d in doc["per_item"]),
            r_visual=float(doc["r_visual"]),
            r_text=float(doc["r_text"]),
            r_total=float(doc["r_total"]),
            extras={str(k): float(v) for k, v in dict(doc.get("extras") or {}).items()},
            weights=RewardWeights.from_document(doc["weights"]),
        )


def combine(r_visual: float, r_text: float, extras: Mapping[str, float], weights: RewardWeights) -> float:
    total = weights.w_visual * r_visual + weights.w_text * r_text
    for name in sorted(weights.extras):
        total += weights.extras[name] * extras[name]
    return total


def _source_image(item: CheckItem, context: Sequence[ImageRef], idx: int) -> ImageRef:
    k = image_index(item.source.image_id)
    if k is None or k > len(context):
        raise RewardError(f"item {idx}: source {item.source.image_id} is outside the visual context of size {len(context)}")
    return context[k - 1]


def _score_item(item: CheckItem, reference: ImageRef, generated: ImageRef, suite: ScorerSuite) -> SimilarityResult:
    if item.check_type == CheckType.STYLE:
        return SimilarityResult(style_similarity(suite, reference, generated), "style-similarity")
    # IDENTITY / ATTRIBUTE
    return object_similarity_detail(suite, reference, generated, item.source.description)


def visual_reward(
    plan: Checklist,
    context: Sequence[ImageRef],
    generated: ImageRef,
    suite: ScorerSuite,
) -> Tuple[float, Tuple[ItemScore, ...]]:
    if not plan.items:
        return 0.0, ()
    per_item: List[ItemScore] = []
    for i, item in enumerate(plan.items):
        reference = _source_image(item, context, i)
        try:
            res = _score_item(item, reference, generated, suite)
        except EmbedderFailure as e:
            raise e.at(i) from e
        per_item.append(ItemScore(i, res.score, res.detail))
    r_visual = math.fsum(s.score for s in per_item) / len(per_item)
    return r_visual, tuple(per_item)


def total_reward(
    plan: Checklist,
    context: Sequence[ImageRef],
    generated: ImageRef,
    prompt: str,
    suite: ScorerSuite,
    weights: RewardWeights,
) -> RewardBreakdown:
    for name in weights.extras:
        if name not in suite.extras:
            raise UnknownExtraScorer(name)

    r_visual, per_item = visual_reward(plan, context, generated, suite)
    r_text = bounded_score(suite.text_image_scorer, "text_image_scorer", prompt, generated)
    extras = {name: bounded_score(suite.extras[name], f"extra:{name}", prompt, generated) for name in sorted(weights.extras)}
    return RewardBreakdown(
        per_item=per_item,
        r_visual=r_visual,
        r_text=r_text,
        r_total=combine(r_visual, r_text, extras, weights),
        extras=extras,
        weights=weights,
    )


class CompositeReward:
    """推理引擎 record_rewards / GRPO 打分使用的奖励评估器

    suite.serial 为真时，所有调用经同一把锁串行化。
    """

    def __init__(self, suite: ScorerSuite, weights: RewardWeights | None = None):
        self.suite = suite
        self.weights = weights or RewardWeights()
        self._lock = threading.Lock() if suite.serial else None

    def evaluate(self, plan: Checklist, context: Sequence[ImageRef], generated: ImageRef, prompt: str) -> RewardBreakdown:
        if self._lock is None:
            return total_reward(plan, context, generated, prompt, self.suite, self.weights)
        with self._lock:
            return total_reward(plan, context, generated, prompt, self.suite, self.weights)
