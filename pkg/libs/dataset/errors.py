# -*- coding: utf-8 -*-
"""dataset-pipeline 错误"""

from __future__ import annotations

from libs.common.errors import VacotError


class DatasetError(VacotError):
    code = "DatasetError"


class AnnotatorUnavailable(DatasetError):
    code = "AnnotatorUnavailable"


class SchemaViolation(DatasetError):
    code = "SchemaViolation"


class CacheMiss(DatasetError):
    code = "CacheMiss"


class InvalidSample(DatasetError):
    code = "InvalidSample"


class TokenizerFailure(DatasetError):
    code = "TokenizerFailure"


class SequenceExceedsBudget(DatasetError):
    code = "SequenceExceedsBudget"

    def __init__(self, index: int, total_tokens: int, budget: int, sample_id: str = ""):
        who = f"sequence {index}" + (f" ({sample_id})" if sample_id else "")
        super().__init__(f"{who} has {total_tokens} tokens, budget is {budget}")
        self.index = index
        self.total_tokens = total_tokens
        self.budget = budget
        self.sample_id = sample_id


class NegativeNotDegraded(InvalidSample):
    code = "NegativeNotDegraded"
