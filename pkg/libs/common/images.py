# -*- coding: utf-8 -*-
"""ImageRef：不透明的图像句柄

三种形态：
- path：文件路径（真实后端 / 打分服务使用）
- blob：内存字节
- vector：模拟后端使用的固定维度特征向量（以 float 元组保存，保证不可变且可逐字节序列化）

文档形态（canonical schema common/image-ref.json）：
  {"path": "..."} | {"base64": "..."} | {"vector": [..]}
"""

from __future__ import annotations

import base64
import hashlib
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple

import numpy as np

from libs.common.errors import VacotError


class ImageUnresolvable(VacotError):
    code = "ImageUnresolvable"


class ImageKind(str, Enum):
    PATH = "path"
    BLOB = "blob"
    VECTOR = "vector"


@dataclass(frozen=True)
class ImageRef:
    kind: ImageKind
    path: Optional[str] = None
    blob: Optional[bytes] = None
    vector: Optional[Tuple[float, ...]] = None

    @staticmethod
    def from_path(path: str | Path) -> "ImageRef":
        return ImageRef(kind=ImageKind.PATH, path=str(path))

    @staticmethod
    def from_bytes(data: bytes) -> "ImageRef":
        return ImageRef(kind=ImageKind.BLOB, blob=bytes(data))

    @staticmethod
    def from_vector(values: Iterable[float]) -> "ImageRef":
        vec = tuple(float(x) for x in np.asarray(values, dtype=np.float64).ravel())
        if not vec:
            raise ImageUnresolvable("vector image must have at least one dimension")
        return ImageRef(kind=ImageKind.VECTOR, vector=vec)

    @property
    def is_vector(self) -> bool:
        return self.kind == ImageKind.VECTOR

    def as_array(self) -> np.ndarray:
        if self.vector is None:
            raise ImageUnresolvable(f"{self.kind.value} image has no vector form")
        return np.asarray(self.vector, dtype=np.float64)

    def content_bytes(self) -> bytes:
        if self.kind == ImageKind.VECTOR:
            return self.as_array().tobytes()
        if self.kind == ImageKind.BLOB:
            return self.blob or b""
        try:
            return Path(self.path or "").read_bytes()
        except OSError as e:
            raise ImageUnresolvable(f"cannot read image {self.path}: {e}") from e

    def digest(self) -> str:
        h = hashlib.sha256(self.kind.value.encode("utf-8"))
        h.update(b"\x00")
        h.update(self.content_bytes())
        return h.hexdigest()

    def to_document(self) -> Dict[str, Any]:
        if self.kind == ImageKind.VECTOR:
            return {"vector": list(self.vector or ())}
        if self.kind == ImageKind.BLOB:
            return {"base64": base64.b64encode(self.blob or b"").decode("ascii")}
        return {"path": self.path}

    @staticmethod
    def from_document(doc: Dict[str, Any]) -> "ImageRef":
        if "vector" in doc:
            return ImageRef.from_vector(doc["vector"])
        if "base64" in doc:
            return ImageRef.from_bytes(base64.b64decode(doc["base64"]))
        if "path" in doc:
            return ImageRef.from_path(doc["path"])
        raise ImageUnresolvable(f"unknown image document keys: {sorted(doc)}")

    def describe(self) -> str:
        if self.kind == ImageKind.PATH:
            return f"path:{self.path}"
        return f"{self.kind.value}:{self.digest()[:12]}"


def load_image_ref(path: str | Path) -> ImageRef:
    """CLI 入参：.npy 文件视为向量图像（模拟后端），其余视为路径句柄。"""
    p = Path(path)
    if p.suffix == ".npy":
        try:
            return ImageRef.from_vector(np.load(p))
        except (OSError, ValueError) as e:
            raise ImageUnresolvable(f"cannot load vector image {p}: {e}") from e
    if not p.exists():
        raise ImageUnresolvable(f"image not found: {p}")
    return ImageRef.from_path(p)
