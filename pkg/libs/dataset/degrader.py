# -*- coding: utf-8 -*-
"""负样本生成器（DegradedGenerator）

真实系统里负样本来自调低参数 / CFG scale 的生成模型；这里的 SimulatedDegrader
按 variation seed 确定性地挑一种失败模式并施加强度为 strength 的扰动：
- identity_loss：主体被替换成与参考无关的随机方向
- identity_inconsistency：主体混入另一张参考图（单参考时退化为随机方向）
- text_misalignment：整体加噪，与提示词不再对齐
非向量图像（路径 / 字节）生成确定性的字节块。
"""

from __future__ import annotations

import math
from typing import Protocol

import numpy as np

from libs.common.hashing import seed_from
from libs.common.images import ImageRef
from libs.dataset.errors import DatasetError
from libs.dataset.models import Degradation, FailureMode
from libs.inference.models import Prompt, VisualContext

_MODES = tuple(FailureMode)


class DegradedGenerator(Protocol):
    def generate_negative(
        self, prompt: Prompt, context: VisualContext, final_gt: ImageRef, variation_seed: int
    ) -> ImageRef: ...


class SimulatedDegrader:
    def __init__(self, seed: int = 0, strength: float = 0.6):
        if not math.isfinite(strength) or not (0.0 < strength <= 1.0):
            raise DatasetError(f"degrader strength must lie in (0,1], got {strength}")
        self.seed = int(seed)
        self.strength = float(strength)

    def failure_mode(self, final_gt: ImageRef, variation_seed: int) -> FailureMode:
        return _MODES[seed_from(self.seed, "mode", final_gt.digest(), variation_seed) % len(_MODES)]

    def degradation(self, final_gt: ImageRef, variation_seed: int) -> Degradation:
        return Degradation(variation_seed, self.failure_mode(final_gt, variation_seed), self.strength)

    def generate_negative(
        self, prompt: Prompt, context: VisualContext, final_gt: ImageRef, variation_seed: int
    ) -> ImageRef:
        mode = self.failure_mode(final_gt, variation_seed)
        rng = np.random.default_rng(seed_from(self.seed, prompt.text, final_gt.digest(), variation_seed))
        if not final_gt.is_vector:
            blob = final_gt.content_bytes()[:64] + f"|degraded:{mode.value}:{variation_seed}|".encode("utf-8")
            return ImageRef.from_bytes(blob + rng.bytes(16))

        y = final_gt.as_array()
        scale = float(np.linalg.norm(y)) or 1.0
        if mode == FailureMode.IDENTITY_INCONSISTENCY:
            others = [img.as_array() for img in context if img.is_vector and img.as_array().shape == y.shape]
            # 与真值最不像的参考图作为干扰源
            if len(others) >= 2:
                direction = min(others, key=lambda v: float(np.dot(v, y)) / ((float(np.linalg.norm(v)) or 1.0) * scale))
            else:
                direction = rng.standard_normal(y.shape)
        else:
            direction = rng.standard_normal(y.shape)
        direction = direction / (float(np.linalg.norm(direction)) or 1.0) * scale
        if mode == FailureMode.TEXT_MISALIGNMENT:
            out = y + self.strength * direction * 1.5
        else:
            out = (1.0 - self.strength) * y + self.strength * direction
        if not np.any(out):
            out = out + 1e-6 * rng.standard_normal(y.shape)
        return ImageRef.from_vector(out)
