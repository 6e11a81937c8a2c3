# -*- coding: utf-8 -*-
"""测试共用的小构造器"""

from __future__ import annotations

from typing import Sequence

from libs.common.images import ImageRef
from libs.plan.models import CheckItem, Checklist, CheckType, PlanOrigin, image_id


def vec(*values: float) -> ImageRef:
    return ImageRef.from_vector(values)


def identity_plan(n: int, origin: PlanOrigin = PlanOrigin.MODEL_GENERATED) -> Checklist:
    return Checklist(
        tuple(CheckItem.between(CheckType.IDENTITY, image_id(k), f"the subject of image_{k}") for k in range(1, n + 1)),
        origin,
    )


def one_hot(dim: int, index: int, scale: float = 1.0) -> ImageRef:
    values: Sequence[float] = [scale if i == index else 0.0 for i in range(dim)]
    return ImageRef.from_vector(values)
