# -*- coding: utf-8 -*-
"""确定性 mock 打分器

- detector：描述中含哨兵 "ABSENT" 时返回 None，否则返回整幅框
- embedder：向量图像直接归一化 v/|v|；字节/路径图像把内容哈希成种子，生成单位向量
- text / pick：(text, image) 哈希映射到 [0,1)
所有输出只取决于 (输入, seed)，可并发调用。
"""

from __future__ import annotations

import numpy as np

from libs.common.hashing import seed_from
from libs.common.images import ImageRef
from libs.reward.errors import EmbedderFailure
from libs.reward.suite import BoundingBox, ScorerSuite

ABSENT_SENTINEL = "ABSENT"
MOCK_DIMENSION = 64


def _normalized(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n == 0.0 or not np.isfinite(n):
        raise EmbedderFailure("cannot embed a zero or non-finite vector image")
    return v / n


def mock_suite(seed: int = 0, *, dimension: int = MOCK_DIMENSION) -> ScorerSuite:
    def _hashed_unit(salt: str, image: ImageRef, *extra: object) -> np.ndarray:
        rng = np.random.default_rng(seed_from(seed, salt, image.digest(), *extra))
        return _normalized(rng.standard_normal(dimension))

    def _unit_interval(salt: str, text: str, image: ImageRef) -> float:
        return seed_from(seed, salt, text, image.digest()) / 2.0**64

    def detector(image: ImageRef, description: str):
        if ABSENT_SENTINEL in description:
            return None
        return BoundingBox.full_frame()

    def identity_embedder(image: ImageRef, box: BoundingBox) -> np.ndarray:
        if image.is_vector:
            return _normalized(image.as_array())
        return _hashed_unit("identity", image, box.x0, box.y0, box.x1, box.y1)

    def style_embedder(image: ImageRef) -> np.ndarray:
        if image.is_vector:
            return _normalized(image.as_array())
        return _hashed_unit("style", image)

    def text_image_scorer(text: str, image: ImageRef) -> float:
        return _unit_interval("clip", text, image)

    def pick_scorer(text: str, image: ImageRef) -> float:
        return _unit_interval("pick", text, image)

    return ScorerSuite(
        detector=detector,
        identity_embedder=identity_embedder,
        style_embedder=style_embedder,
        text_image_scorer=text_image_scorer,
        extras={"pick": pick_scorer},
        serial=False,
        name=f"mock:{seed}",
    )
