# -*- coding: utf-8 -*-
"""JSON 工具：规范化文档编码

所有落盘/上线的文档（checklist、反馈、trace、语料记录）都使用同一编码：
UTF-8、键排序、紧凑分隔符、换行结尾。保证相同输入得到逐字节相同的输出。
"""
from __future__ import annotations

import json
from typing import Any


def dumps_json(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"), allow_nan=False)


def dumps_document(obj: Any) -> str:
    """单个文档：规范 JSON + 换行"""
    return dumps_json(obj) + "\n"


def loads_document(raw: str | bytes) -> Any:
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    return json.loads(raw)
