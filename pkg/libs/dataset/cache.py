# -*- coding: utf-8 -*-
"""标注响应的录制/回放缓存（磁盘）

- 键：规范化请求身份（op、空白折叠后的 prompt、图像内容摘要、plan 文档、system_prompt_id）的 sha256
- 每个键一个文件 <dir>/<key[:2]>/<key>.json，临时文件 + os.replace 原子落盘；
  不同键并发读写互不影响
- replay_only=True 时未命中直接抛 CacheMiss（保证零网络调用）
- 只缓存传输层成功返回的文档；异常不落盘
"""

from __future__ import annotations

import os
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

from libs.common.hashing import content_hash
from libs.common.images import ImageRef
from libs.common.json import dumps_document, loads_document
from libs.common.logging import setup_logging
from libs.dataset.annotator import AnnotatorTransport
from libs.dataset.errors import CacheMiss, DatasetError

logger = setup_logging("annotator-cache")


def _normalize_text(value: str) -> str:
    return " ".join(value.split())


def _digest(doc: Dict[str, Any]) -> str:
    return ImageRef.from_document(doc).digest()


def make_key(request: Dict[str, Any]) -> str:
    identity: Dict[str, Any] = {
        "op": str(request["op"]).strip().lower(),
        "prompt": _normalize_text(str(request["prompt"])),
        "images": [_digest(d) for d in request.get("images", [])],
        "system_prompt_id": str(request["system_prompt_id"]).strip(),
    }
    if "plan" in request:
        identity["plan"] = request["plan"]
    for name in ("negative", "gt"):
        if name in request:
            identity[name] = _digest(request[name])
    return content_hash(identity)


@dataclass(frozen=True)
class CacheStats:
    hits: int
    misses: int
    writes: int

    def to_document(self) -> Dict[str, int]:
        return {"hits": self.hits, "misses": self.misses, "writes": self.writes}


class CachedTransport:
    def __init__(self, inner: Optional[AnnotatorTransport], cache_dir: str | Path, *, replay_only: bool = False):
        if inner is None and not replay_only:
            raise DatasetError("a cache without an inner transport must be replay-only")
        self.inner = inner
        self.cache_dir = Path(cache_dir)
        self.replay_only = replay_only
        self._lock = threading.Lock()
        self._hits = 0
        self._misses = 0
        self._writes = 0

    def _path(self, key: str) -> Path:
        return self.cache_dir / key[:2] / f"{key}.json"

    def _count(self, attr: str) -> None:
        with self._lock:
            setattr(self, attr, getattr(self, attr) + 1)

    @property
    def stats(self) -> CacheStats:
        with self._lock:
            return CacheStats(self._hits, self._misses, self._writes)

    def lookup(self, key: str) -> Optional[str]:
        path = self._path(key)
        if not path.exists():
            return None
        return str(loads_document(path.read_bytes())["document"])

    def store(self, key: str, request: Dict[str, Any], document: str) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        record = {"key": key, "op": request["op"], "system_prompt_id": request["system_prompt_id"], "document": document}
        fd, tmp = tempfile.mkstemp(prefix=f".{key[:8]}-", suffix=".tmp", dir=path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                f.write(dumps_document(record))
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        self._count("_writes")

    def send(self, request: Dict[str, Any]) -> str:
        key = make_key(request)
        cached = self.lookup(key)
        if cached is not None:
            self._count("_hits")
            return cached
        self._count("_misses")
        if self.replay_only or self.inner is None:
            raise CacheMiss(f"no cached {request['op']} response for key {key[:16]}")
        document = self.inner.send(request)
        self.store(key, request, document)
        logger.debug(
            "annotator response recorded",
            extra={"extra_fields": {"event": "ANNOTATOR_CACHE_WRITE", "op": request["op"], "key": key[:16]}},
        )
        return document
