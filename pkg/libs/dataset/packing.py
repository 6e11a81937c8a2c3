# -*- coding: utf-8 -*-
"""按 token 预算打包训练序列

贪心、保持输入顺序：当前批次放得下就追加，否则开新批次。
先整体检查所有序列不超预算，再打包（不会产出半截结果）。
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

from libs.dataset.errors import DatasetError, SequenceExceedsBudget
from libs.dataset.sequence import TrainingSequence

DEFAULT_BUDGET = 32000


@dataclass(frozen=True)
class PackedBatch:
    sequences: Tuple[TrainingSequence, ...]
    budget: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "sequences", tuple(self.sequences))
        if self.total_tokens > self.budget:
            raise SequenceExceedsBudget(0, self.total_tokens, self.budget)

    @property
    def total_tokens(self) -> int:
        return sum(s.total_tokens for s in self.sequences)

    def __len__(self) -> int:
        return len(self.sequences)


def pack(sequences: Sequence[TrainingSequence], budget: int = DEFAULT_BUDGET) -> List[PackedBatch]:
    if isinstance(budget, bool) or not isinstance(budget, int) or budget < 1:
        raise DatasetError(f"budget must be a positive integer, got {budget!r}")
    for i, seq in enumerate(sequences):
        if seq.total_tokens > budget:
            raise SequenceExceedsBudget(i, seq.total_tokens, budget, seq.sample_id)

    batches: List[PackedBatch] = []
    current: List[TrainingSequence] = []
    used = 0
    for seq in sequences:
        n = seq.total_tokens
        if current and used + n > budget:
            batches.append(PackedBatch(tuple(current), budget))
            current, used = [], 0
        current.append(seq)
        used += n
    if current:
        batches.append(PackedBatch(tuple(current), budget))
    return batches
