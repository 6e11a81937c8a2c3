# -*- coding: utf-8 -*-
"""物体相似度 / 风格相似度

物体相似度：两张图分别按描述检测 -> 裁剪框 -> identity 嵌入 -> 余弦。
余弦统一仿射映射到 [0,1]：(cos + 1) / 2。任一图检测不到目标记 0 分（detail="detection-miss"），
在 GRPO 中缺失主体正是奖励需要惩罚的失败。
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from libs.common.images import ImageRef
from libs.reward.errors import EmbedderFailure, RewardError, ScorerFailure
from libs.reward.suite import BoundingBox, ScorerSuite

UNIT_NORM_TOL = 1e-6
DETECTION_MISS = "detection-miss"


@dataclass(frozen=True)
class SimilarityResult:
    score: float
    detail: str


def unit_vector(raw: Any, what: str) -> np.ndarray:
    """校验嵌入输出：一维、有限、L2 范数为 1（容差 1e-6）"""
    try:
        v = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise EmbedderFailure(f"{what} returned a non-numeric embedding: {e}") from e
    if v.ndim != 1 or v.size == 0 or not np.all(np.isfinite(v)):
        raise EmbedderFailure(f"{what} returned an invalid embedding of shape {v.shape}")
    norm = float(np.linalg.norm(v))
    if abs(norm - 1.0) > UNIT_NORM_TOL:
        raise EmbedderFailure(f"{what} embedding is not unit norm (|v|={norm:.9f})")
    return v


def cosine01(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise EmbedderFailure(f"embedding dimension mismatch {a.shape} vs {b.shape}")
    c = float(np.dot(a, b))
    return min(1.0, max(0.0, (c + 1.0) / 2.0))


def _embed(fn, what: str, *args: Any) -> np.ndarray:
    try:
        raw = fn(*args)
    except RewardError:
        raise
    except Exception as e:
        raise EmbedderFailure(f"{what} failed: {e}") from e
    return unit_vector(raw, what)


def _detect(suite: ScorerSuite, image: ImageRef, description: str) -> BoundingBox | None:
    try:
        return suite.detector(image, description)
    except RewardError:
        raise
    except Exception as e:
        raise ScorerFailure(f"detector failed on {image.describe()}: {e}") from e


def object_similarity_detail(suite: ScorerSuite, reference: ImageRef, generated: ImageRef, description: str) -> SimilarityResult:
    box_ref = _detect(suite, reference, description)
    box_gen = _detect(suite, generated, description)
    if box_ref is None or box_gen is None:
        return SimilarityResult(0.0, DETECTION_MISS)
    a = _embed(suite.identity_embedder, "identity_embedder", reference, box_ref)
    b = _embed(suite.identity_embedder, "identity_embedder", generated, box_gen)
    return SimilarityResult(cosine01(a, b), "object-similarity")


def object_similarity(suite: ScorerSuite, reference: ImageRef, generated: ImageRef, description: str) -> float:
    return object_similarity_detail(suite, reference, generated, description).score


def style_similarity(suite: ScorerSuite, reference: ImageRef, generated: ImageRef) -> float:
    a = _embed(suite.style_embedder, "style_embedder", reference)
    b = _embed(suite.style_embedder, "style_embedder", generated)
    return cosine01(a, b)


def bounded_score(fn, what: str, *args: Any) -> float:
    """文本/附加打分器输出必须是 [0,1] 内的有限实数"""
    try:
        s = float(fn(*args))
    except RewardError:
        raise
    except Exception as e:
        raise ScorerFailure(f"{what} failed: {e}") from e
    if not np.isfinite(s) or s < 0.0 or s > 1.0:
        raise ScorerFailure(f"{what} returned {s}, expected a value in [0,1]")
    return s
