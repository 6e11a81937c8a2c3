# -*- coding: utf-8 -*-
"""inference-engine 错误"""

from __future__ import annotations

from typing import Optional, Sequence

from libs.common.errors import VacotError


class EngineError(VacotError):
    code = "EngineError"


class BackendFailure(EngineError):
    """后端调用失败；iteration=0 表示规划调用，k>=1 表示第 k 次评估-修正调用"""

    code = "BackendFailure"

    def __init__(self, iteration: int, detail: str, cause: Optional[BaseException] = None):
        super().__init__(f"iteration {iteration}: {detail}")
        self.iteration = iteration
        self.detail = detail
        self.cause = cause


class PlanInvalid(EngineError):
    code = "PlanInvalid"

    def __init__(self, violations: Sequence[object]):
        desc = ", ".join(getattr(v, "describe", lambda: str(v))() for v in violations)
        super().__init__(f"plan fails context validation: {desc}")
        self.violations = tuple(violations)


class InvalidSpec(EngineError):
    code = "InvalidSpec"


class InvalidConfig(EngineError):
    code = "InvalidConfig"


class TraceSchemaError(EngineError):
    code = "TraceSchemaError"
