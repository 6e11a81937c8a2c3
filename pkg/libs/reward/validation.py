# -*- coding: utf-8 -*-
"""奖励有效性验证：在修正语料上统计 R_visual(GT) > R_visual(负样本) 的比例（严格大于）"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

from libs.common.images import ImageRef
from libs.common.logging import setup_logging
from libs.plan.models import Checklist
from libs.reward.composite import visual_reward
from libs.reward.errors import EmptyInput
from libs.reward.suite import ScorerSuite

logger = setup_logging("reward-validation")


@dataclass(frozen=True)
class PreferencePair:
    plan: Checklist
    context: Tuple[ImageRef, ...]
    gt_image: ImageRef
    negative_image: ImageRef
    pair_id: str = ""


@dataclass(frozen=True)
class PairResult:
    pair_id: str
    r_gt: float
    r_negative: float

    @property
    def preferred(self) -> bool:
        return self.r_gt > self.r_negative


@dataclass(frozen=True)
class PreferenceReport:
    fraction: float
    rows: Tuple[PairResult, ...]

    @property
    def n_pairs(self) -> int:
        return len(self.rows)

    @property
    def n_preferred(self) -> int:
        return sum(1 for r in self.rows if r.preferred)


def preference_validation(pairs: Sequence[PreferencePair], suite: ScorerSuite) -> PreferenceReport:
    if not pairs:
        raise EmptyInput("preference validation needs at least one pair")

    rows: List[PairResult] = []
    for i, p in enumerate(pairs):
        r_gt, _ = visual_reward(p.plan, p.context, p.gt_image, suite)
        r_neg, _ = visual_reward(p.plan, p.context, p.negative_image, suite)
        rows.append(PairResult(p.pair_id or str(i), r_gt, r_neg))

    report = PreferenceReport(sum(1 for r in rows if r.preferred) / len(rows), tuple(rows))
    logger.info(
        "preference validation done",
        extra={"extra_fields": {"event": "REWARD_VALIDATION", "pairs": report.n_pairs, "preferred": report.n_preferred, "fraction": report.fraction}},
    )
    return report
