# -*- coding: utf-8 -*-
"""组内优势、逐步概率比与裁剪代理项"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from libs.grpo.errors import GroupTooSmall, NonFiniteLogProb


def group_advantages(rewards: Sequence[float], std_floor: float = 1e-8) -> np.ndarray:
    """Â_i = (R_i - mean) / max(std, std_floor)，std 为总体标准差"""
    r = np.asarray(rewards, dtype=np.float64)
    if r.ndim != 1 or r.size < 2:
        raise GroupTooSmall(f"group needs at least 2 rewards, got {r.size}")
    centered = r - r.mean()
    return centered / max(float(r.std()), std_floor)


def step_ratio(logp_new: float, logp_old: float) -> float:
    if not (math.isfinite(logp_new) and math.isfinite(logp_old)):
        raise NonFiniteLogProb(f"log-probabilities must be finite, got new={logp_new}, old={logp_old}")
    return math.exp(logp_new - logp_old)


def clipped_term(r: float, advantage: float, epsilon: float) -> float:
    """min(r·Â, clip(r, 1-ε, 1+ε)·Â)"""
    clipped = min(max(r, 1.0 - epsilon), 1.0 + epsilon)
    return min(r * advantage, clipped * advantage)


def clipped_terms(ratios: np.ndarray, advantages: np.ndarray, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    """向量版；返回 (项值, 是否取未裁剪分支)。未裁剪分支的梯度为 Â·r·∇logp，裁剪分支为 0"""
    unclipped = ratios * advantages
    clipped = np.clip(ratios, 1.0 - epsilon, 1.0 + epsilon) * advantages
    take_unclipped = unclipped <= clipped
    return np.where(take_unclipped, unclipped, clipped), take_unclipped
