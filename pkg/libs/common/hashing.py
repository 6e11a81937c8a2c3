"""内容哈希：缓存键 / 样本 ID / 确定性随机种子"""
from __future__ import annotations

import hashlib
from typing import Any

from libs.common.json import dumps_json


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def content_hash(obj: Any) -> str:
    """任意 JSON 兼容对象的稳定哈希（键排序后的规范编码）"""
    return sha256_hex(dumps_json(obj))


def seed_from(*parts: Any) -> int:
    """把若干部分折叠成 64 位种子，供 numpy.random.default_rng 使用"""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
