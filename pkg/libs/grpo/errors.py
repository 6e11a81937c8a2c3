# -*- coding: utf-8 -*-
"""grpo-core 错误"""

from __future__ import annotations

from typing import Optional

from libs.common.errors import VacotError


class GrpoError(VacotError):
    code = "GrpoError"


class InvalidGrpoConfig(GrpoError):
    code = "InvalidGrpoConfig"


class GroupTooSmall(GrpoError):
    code = "GroupTooSmall"


class NonFiniteLogProb(GrpoError):
    """坐标 (group, trajectory, step) 在能定位时给出"""

    code = "NonFiniteLogProb"

    def __init__(self, detail: str, group: Optional[int] = None, trajectory: Optional[int] = None, step: Optional[int] = None):
        coords = [f"{k}={v}" for k, v in (("group", group), ("trajectory", trajectory), ("step", step)) if v is not None]
        super().__init__(f"{detail} ({', '.join(coords)})" if coords else detail)
        self.group = group
        self.trajectory = trajectory
        self.step = step


class ScheduleMismatch(GrpoError):
    code = "ScheduleMismatch"


class EmptyBatch(GrpoError):
    code = "EmptyBatch"


class DivergenceDetected(GrpoError):
    code = "DivergenceDetected"

    def __init__(self, iteration: int):
        super().__init__(f"non-finite parameters after iteration {iteration}")
        self.iteration = iteration
