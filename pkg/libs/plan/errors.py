# -*- coding: utf-8 -*-
"""consistency-plan 错误

解析错误都带上出错条目下标（item_index），便于数据构建阶段隔离（quarantine）时写明原因。
"""

from __future__ import annotations

from typing import Any, Optional

from libs.common.errors import VacotError


class PlanError(VacotError):
    code = "PlanError"


class UnknownCheckType(PlanError):
    code = "UnknownCheckType"

    def __init__(self, item_index: int, tag: Any):
        super().__init__(f"item {item_index}: unknown check_type {tag!r}")
        self.item_index = item_index
        self.tag = tag


class MissingField(PlanError):
    code = "MissingField"

    def __init__(self, item_index: int, field: str):
        super().__init__(f"item {item_index}: missing field {field!r}")
        self.item_index = item_index
        self.field = field


class MalformedRegion(PlanError):
    code = "MalformedRegion"

    def __init__(self, item_index: Optional[int], detail: str):
        where = f"item {item_index}: " if item_index is not None else ""
        super().__init__(f"{where}malformed region ({detail})")
        self.item_index = item_index
        self.detail = detail


class PlanSchemaError(PlanError):
    code = "PlanSchemaError"

    def __init__(self, path: str, detail: str):
        super().__init__(f"{path}: {detail}")
        self.path = path
        self.detail = detail


class FeedbackSchemaError(PlanError):
    code = "FeedbackSchemaError"

    def __init__(self, path: str, detail: str):
        super().__init__(f"{path}: {detail}")
        self.path = path
        self.detail = detail


class EmptyPrompt(PlanError):
    code = "EmptyPrompt"


class EmptyChecklist(PlanError):
    code = "EmptyChecklist"


class FeedbackInconsistent(PlanError):
    code = "FeedbackInconsistent"
