# -*- coding: utf-8 -*-
"""语料文件读写（JSONL，每行一个规范 JSON 记录）

- planning / correction / sequence 记录分别按 corpus/*.json schema 校验
- 图像以外部引用保存（路径、base64 或向量），支持流式读取
- 写文件走临时文件 + os.replace；相同输入得到逐字节相同的文件
- manifest 记录语料统计和 SFT 超参（仅元数据，本仓库不跑 SFT）
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, Iterator, List, Sequence, Tuple, TypeVar

from libs.common.images import ImageRef, ImageUnresolvable, load_image_ref
from libs.common.json import dumps_document, loads_document
from libs.contracts.schema_validator import iter_errors
from libs.dataset.errors import DatasetError, InvalidSample, SchemaViolation
from libs.dataset.models import (
    CorrectionKind,
    CorrectionSample,
    Degradation,
    FailureMode,
    PlanningSample,
    QuarantineRecord,
    RawTriple,
)
from libs.dataset.packing import PackedBatch
from libs.dataset.sequence import (
    DEFAULT_IMAGE_TOKEN_COST,
    Tokenizer,
    TrainingSequence,
    regex_tokenizer,
    sequence_from_document,
    sequence_to_document,
    to_training_sequence,
)
from libs.inference.models import Prompt, VisualContext
from libs.plan.codec import checklist_from_document, checklist_to_document, feedback_from_document, feedback_to_document
from libs.plan.errors import PlanError

PLANNING_SCHEMA = "corpus/planning-record.json"
CORRECTION_SCHEMA = "corpus/correction-record.json"
TRIPLE_SCHEMA = "corpus/raw-triple.json"

PLANNING_FILE = "planning.jsonl"
CORRECTION_FILE = "correction.jsonl"
SEQUENCES_FILE = "sequences.jsonl"
QUARANTINE_FILE = "quarantine.jsonl"
MANIFEST_FILE = "manifest.json"

SFT_METADATA: Dict[str, Any] = {
    "optimizer": "adam",
    "learning_rate": 2e-5,
    "lr_schedule": "constant",
    "warmup_steps": 500,
    "warmup": "linear",
    "gpus": 8,
    "packing_budget_tokens": 32000,
}

T = TypeVar("T")


def _check(schema: str, doc: Any, where: str) -> None:
    errors = iter_errors(schema, doc)
    if errors:
        path = "/".join(str(p) for p in errors[0].absolute_path) or "$"
        raise SchemaViolation(f"{where}: invalid record at {path}: {errors[0].message}")


# ----------------------------
# JSONL
# ----------------------------

def write_text_atomic(path: str | Path, text: str) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{p.name}-", suffix=".tmp", dir=p.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, p)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_jsonl(path: str | Path, docs: Iterable[Dict[str, Any]]) -> None:
    write_text_atomic(path, "".join(dumps_document(d) for d in docs))


def iter_jsonl(path: str | Path) -> Iterator[Tuple[int, Any]]:
    """(行号, 文档)，跳过空行"""
    p = Path(path)
    try:
        f = p.open("r", encoding="utf-8")
    except OSError as e:
        raise DatasetError(f"cannot read {p}: {e}") from e
    with f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, loads_document(line)
            except ValueError as e:
                raise SchemaViolation(f"{p}:{lineno}: not valid JSON: {e}") from e


def _read(path: str | Path, decode: Callable[[Any], T]) -> List[T]:
    out: List[T] = []
    for lineno, doc in iter_jsonl(path):
        try:
            out.append(decode(doc))
        except (PlanError, ImageUnresolvable) as e:
            raise SchemaViolation(f"{path}:{lineno}: {e.code}: {e}") from e
        except (SchemaViolation, InvalidSample) as e:
            raise SchemaViolation(f"{path}:{lineno}: {e}") from e
    return out


# ----------------------------
# 记录编解码
# ----------------------------

def planning_to_document(sample: PlanningSample) -> Dict[str, Any]:
    return {
        "record": "planning",
        "sample_id": sample.sample_id,
        "prompt": sample.prompt.text,
        "context": [img.to_document() for img in sample.context],
        "plan": checklist_to_document(sample.plan_gt),
        "final_gt": sample.final_gt.to_document(),
    }


def planning_from_document(doc: Any) -> PlanningSample:
    _check(PLANNING_SCHEMA, doc, "planning")
    return PlanningSample(
        sample_id=doc["sample_id"],
        prompt=Prompt(doc["prompt"]),
        context=VisualContext(tuple(ImageRef.from_document(d) for d in doc["context"])),
        plan_gt=checklist_from_document(doc["plan"]),
        final_gt=ImageRef.from_document(doc["final_gt"]),
    )


def correction_to_document(sample: CorrectionSample) -> Dict[str, Any]:
    doc: Dict[str, Any] = {
        "record": "correction",
        "kind": sample.kind.value,
        "planning": planning_to_document(sample.planning),
        "negative": sample.negative.to_document(),
        "eval": feedback_to_document(sample.eval_gt),
    }
    if sample.degradation is not None:
        d: Dict[str, Any] = {"variation_seed": sample.degradation.variation_seed}
        if sample.degradation.mode is not None:
            d["mode"] = sample.degradation.mode.value
        if sample.degradation.strength is not None:
            d["strength"] = sample.degradation.strength
        doc["degradation"] = d
    return doc


def correction_from_document(doc: Any) -> CorrectionSample:
    _check(CORRECTION_SCHEMA, doc, "correction")
    degradation = None
    if "degradation" in doc:
        d = doc["degradation"]
        degradation = Degradation(
            variation_seed=int(d["variation_seed"]),
            mode=FailureMode(d["mode"]) if "mode" in d else None,
            strength=float(d["strength"]) if "strength" in d else None,
        )
    return CorrectionSample(
        planning=planning_from_document(doc["planning"]),
        negative=ImageRef.from_document(doc["negative"]),
        eval_gt=feedback_from_document(doc["eval"]),
        kind=CorrectionKind(doc["kind"]),
        degradation=degradation,
    )


# ----------------------------
# 语料文件
# ----------------------------

def write_planning_corpus(path: str | Path, samples: Sequence[PlanningSample]) -> None:
    write_jsonl(path, (planning_to_document(s) for s in samples))


def read_planning_corpus(path: str | Path) -> List[PlanningSample]:
    return _read(path, planning_from_document)


def write_correction_corpus(path: str | Path, samples: Sequence[CorrectionSample]) -> None:
    write_jsonl(path, (correction_to_document(s) for s in samples))


def read_correction_corpus(path: str | Path) -> List[CorrectionSample]:
    return _read(path, correction_from_document)


def write_sequences(path: str | Path, sequences: Sequence[TrainingSequence]) -> None:
    write_jsonl(path, (sequence_to_document(s) for s in sequences))


def read_sequences(path: str | Path) -> List[TrainingSequence]:
    return _read(path, sequence_from_document)


def write_packed(out_dir: str | Path, batches: Sequence[PackedBatch]) -> List[Path]:
    """每个批次一个文件 batch-00000.jsonl"""
    paths: List[Path] = []
    for i, batch in enumerate(batches):
        p = Path(out_dir) / f"batch-{i:05d}.jsonl"
        write_sequences(p, batch.sequences)
        paths.append(p)
    return paths


def write_quarantine(path: str | Path, records: Sequence[QuarantineRecord]) -> None:
    write_jsonl(path, (r.to_document() for r in records))


def read_quarantine(path: str | Path) -> List[QuarantineRecord]:
    return [QuarantineRecord(d["sample_id"], d["stage"], d["code"], d["reason"]) for _, d in iter_jsonl(path)]


# ----------------------------
# 原始三元组
# ----------------------------

def _image_from(value: Any, base: Path) -> ImageRef:
    if isinstance(value, dict):
        return ImageRef.from_document(value)
    p = Path(value)
    return load_image_ref(p if p.is_absolute() else base / p)


def triple_from_document(doc: Any, base: str | Path = ".") -> RawTriple:
    _check(TRIPLE_SCHEMA, doc, "triple")
    base = Path(base)
    refs = tuple(_image_from(r, base) for r in doc["references"])
    return RawTriple.of(doc["prompt"], refs, _image_from(doc["ground_truth"], base), doc.get("id", ""))


def read_triples(path: str | Path) -> List[RawTriple]:
    """相对路径按三元组文件所在目录解析"""
    base = Path(path).resolve().parent
    return _read(path, lambda doc: triple_from_document(doc, base))


def write_triples(path: str | Path, triples: Sequence[RawTriple]) -> None:
    write_jsonl(path, (
        {
            "id": t.triple_id,
            "prompt": t.prompt,
            "references": [r.to_document() for r in t.references],
            "ground_truth": t.ground_truth.to_document(),
        }
        for t in triples
    ))


# ----------------------------
# manifest
# ----------------------------

def corpus_manifest(kind: str, counts: Dict[str, int], **params: Any) -> Dict[str, Any]:
    return {"corpus": kind, "counts": dict(sorted(counts.items())), "params": params, "sft": dict(SFT_METADATA)}


def write_manifest(out_dir: str | Path, manifest: Dict[str, Any]) -> Path:
    p = Path(out_dir) / MANIFEST_FILE
    write_text_atomic(p, dumps_document(manifest))
    return p


def read_manifest(out_dir: str | Path) -> Dict[str, Any]:
    p = Path(out_dir) / MANIFEST_FILE
    try:
        return loads_document(p.read_bytes())
    except (OSError, ValueError) as e:
        raise DatasetError(f"cannot read manifest {p}: {e}") from e


def read_training_sequences(
    path: str | Path, *, tokenizer: Tokenizer = regex_tokenizer, image_token_cost: int = DEFAULT_IMAGE_TOKEN_COST
) -> List[TrainingSequence]:
    """接受 sequence / planning / correction 三种记录混排的 JSONL，统一渲染成训练序列"""

    def _decode(doc: Any) -> TrainingSequence:
        kind = doc.get("record") if isinstance(doc, dict) else None
        if kind == "sequence":
            return sequence_from_document(doc)
        if kind == "planning":
            return to_training_sequence(planning_from_document(doc), tokenizer, image_token_cost)
        if kind == "correction":
            return to_training_sequence(correction_from_document(doc), tokenizer, image_token_cost)
        raise SchemaViolation(f"unknown record type {kind!r}")

    return _read(path, _decode)
