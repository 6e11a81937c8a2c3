# -*- coding: utf-8 -*-
"""领域错误基类

每个模块在自己的 errors.py 里派生错误；code 是稳定的错误名，CLI 按 code 打印。
"""

from __future__ import annotations


class VacotError(Exception):
    code: str = "VacotError"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code

    def __str__(self) -> str:
        return self.message


class ConfigError(VacotError):
    code = "ConfigError"
