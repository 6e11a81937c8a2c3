# -*- coding: utf-8 -*-
"""reward 模块错误"""

from __future__ import annotations

from typing import Optional

from libs.common.errors import VacotError


class RewardError(VacotError):
    code = "RewardError"


class EmbedderFailure(RewardError):
    code = "EmbedderFailure"

    def __init__(self, detail: str, item_index: Optional[int] = None):
        where = f"item {item_index}: " if item_index is not None else ""
        super().__init__(f"{where}{detail}")
        self.detail = detail
        self.item_index = item_index

    def at(self, item_index: int) -> "EmbedderFailure":
        return EmbedderFailure(self.detail, item_index)


class ScorerFailure(RewardError):
    code = "ScorerFailure"


class UnknownExtraScorer(RewardError):
    code = "UnknownExtraScorer"

    def __init__(self, name: str):
        super().__init__(f"no extra scorer named {name!r} in suite")
        self.name = name


class InvalidWeights(RewardError):
    code = "InvalidWeights"


class EmptyInput(RewardError):
    code = "EmptyInput"
