# -*- coding: utf-8 -*-
"""模拟生成后端：图像是 d 维特征向量

- 规划：每张参考图一个 Identity 条目；没有参考图时走固定模板，
  唯一的检查位对应由提示词哈希得到的“文本目标向量”
- 初始生成：Y_0 = mean(参考向量) + σ·噪声（噪声种子来自 (spec.seed, 提示词)）
- 评估：条目 i 满足 iff cos(Y, v_i) >= τ；判定分数 (cos+1)/2
- 修正：Y <- Y + η·(v_j - Y)，v_j 取余弦最低的未满足条目（并列取下标最小）；
  全部满足时原样返回当前图像
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from libs.common.hashing import seed_from
from libs.common.images import ImageRef, ImageUnresolvable
from libs.inference.errors import InvalidSpec
from libs.inference.models import Prompt, VisualContext
from libs.plan.models import (
    CheckItem,
    Checklist,
    CheckType,
    EvalFeedback,
    ItemVerdict,
    PlanOrigin,
    fixed_template_plan,
    image_id,
    image_index,
)


@dataclass(frozen=True)
class SimSpec:
    dimension: int
    refinement_rate: float = 0.5
    satisfaction_threshold: float = 0.9
    noise_scale: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if isinstance(self.dimension, bool) or not isinstance(self.dimension, int) or self.dimension < 1:
            raise InvalidSpec(f"dimension must be a positive integer, got {self.dimension!r}")
        if not (0.0 < self.refinement_rate <= 1.0):
            raise InvalidSpec(f"refinement_rate must be in (0,1], got {self.refinement_rate}")
        if not (0.0 < self.satisfaction_threshold < 1.0):
            raise InvalidSpec(f"satisfaction_threshold must be in (0,1), got {self.satisfaction_threshold}")
        if not math.isfinite(self.noise_scale) or self.noise_scale < 0.0:
            raise InvalidSpec(f"noise_scale must be finite and >= 0, got {self.noise_scale}")


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b)) / (na * nb)


class SimulatedBackend:
    def __init__(self, spec: SimSpec):
        self.spec = spec

    def _vector(self, image: ImageRef, what: str) -> np.ndarray:
        if not image.is_vector:
            raise ImageUnresolvable(f"{what}: simulated backend only accepts vector images, got {image.kind.value}")
        v = image.as_array()
        if v.shape != (self.spec.dimension,):
            raise InvalidSpec(f"{what}: expected dimension {self.spec.dimension}, got {v.shape[0]}")
        return v

    def prompt_target(self, prompt: Prompt) -> np.ndarray:
        rng = np.random.default_rng(seed_from(self.spec.seed, "prompt-target", prompt.text))
        v = rng.standard_normal(self.spec.dimension)
        return v / np.linalg.norm(v)

    def _targets(self, prompt: Prompt, context: VisualContext, plan: Checklist) -> List[np.ndarray]:
        if not plan.items:
            return [self.prompt_target(prompt)]
        out = []
        for i, item in enumerate(plan.items):
            k = image_index(item.source.image_id)
            if k is None or k > len(context):
                raise InvalidSpec(f"item {i} references {item.source.image_id} outside the context")
            out.append(self._vector(context[k - 1], item.source.image_id))
        return out

    def plan_and_generate(self, prompt: Prompt, context: VisualContext) -> Tuple[Checklist, ImageRef]:
        d = self.spec.dimension
        if len(context) == 0:
            plan = fixed_template_plan(prompt.text)
            mean = np.zeros(d)
        else:
            vectors = [self._vector(img, image_id(k)) for k, img in enumerate(context, start=1)]
            items = tuple(
                CheckItem.between(CheckType.IDENTITY, image_id(k), f"the subject of {image_id(k)}")
                for k in range(1, len(vectors) + 1)
            )
            plan = Checklist(items=items, origin=PlanOrigin.MODEL_GENERATED)
            mean = np.mean(np.stack(vectors), axis=0)

        rng = np.random.default_rng(seed_from(self.spec.seed, prompt.text))
        y0 = mean + self.spec.noise_scale * rng.standard_normal(d)
        return plan, ImageRef.from_vector(y0)

    def evaluate_and_refine(
        self, prompt: Prompt, context: VisualContext, plan: Checklist, current: ImageRef
    ) -> Tuple[EvalFeedback, ImageRef]:
        tau = self.spec.satisfaction_threshold
        y = self._vector(current, "current")
        targets = self._targets(prompt, context, plan)

        cosines = [cosine(y, v) for v in targets]
        verdicts = tuple(
            ItemVerdict(
                item_index=i,
                satisfied=c >= tau,
                critique=f"cosine {c:.4f} vs threshold {tau}",
                score=min(1.0, max(0.0, (c + 1.0) / 2.0)),
            )
            for i, c in enumerate(cosines)
        )

        worst = None
        for i, c in enumerate(cosines):
            if c < tau and (worst is None or c < cosines[worst]):
                worst = i
        if worst is None:
            return EvalFeedback.from_verdicts(verdicts), current

        y_next = y + self.spec.refinement_rate * (targets[worst] - y)
        what = plan.items[worst].source.description if plan.items else "the prompt"
        feedback = EvalFeedback.from_verdicts(verdicts, f"move the image toward {what} (item {worst})")
        return feedback, ImageRef.from_vector(y_next)


def simulated_backend(spec: SimSpec) -> SimulatedBackend:
    return SimulatedBackend(spec)
