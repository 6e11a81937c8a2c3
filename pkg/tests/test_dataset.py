# -*- coding: utf-8 -*-
from __future__ import annotations

from typing import Any, Dict, List

import httpx
import numpy as np
import pytest

from libs.common.images import ImageRef
from libs.dataset.annotator import (
    HttpAnnotatorTransport,
    RequestAnnotator,
    SimulatedAnnotatorTransport,
    parse_prompt_checks,
    simulated_annotator,
)
from libs.dataset.builders import build_correction, build_planning, sample_triples
from libs.dataset.cache import CachedTransport, make_key
from libs.dataset.corpus import (
    corpus_manifest,
    correction_to_document,
    planning_to_document,
    read_correction_corpus,
    read_manifest,
    read_planning_corpus,
    read_quarantine,
    read_sequences,
    read_training_sequences,
    read_triples,
    write_correction_corpus,
    write_jsonl,
    write_manifest,
    write_packed,
    write_planning_corpus,
    write_quarantine,
    write_sequences,
)
from libs.dataset.degrader import SimulatedDegrader
from libs.dataset.errors import (
    AnnotatorUnavailable,
    CacheMiss,
    DatasetError,
    InvalidSample,
    NegativeNotDegraded,
    SchemaViolation,
    SequenceExceedsBudget,
    TokenizerFailure,
)
from libs.dataset.models import CorrectionKind, CorrectionSample, FailureMode, PlanningSample, RawTriple
from libs.dataset.packing import pack
from libs.dataset.sequence import (
    Modality,
    SampleKind,
    TrainingSegment,
    TrainingSequence,
    loss_pattern,
    sequence_to_document,
    to_training_sequence,
)
from libs.inference.models import Prompt, VisualContext
from libs.plan.models import CheckType, EvalFeedback, ItemVerdict, PlanOrigin, fixed_template_plan, satisfied_feedback
from tests.helpers import identity_plan, vec


def _triples(n: int, seed: int = 0, dim: int = 8) -> List[RawTriple]:
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        refs = [ImageRef.from_vector(rng.standard_normal(dim)) for _ in range(2)]
        gt = ImageRef.from_vector(rng.standard_normal(dim))
        out.append(RawTriple.of(f"the dog in image_1 chasing the cat in image_2, take {i}", refs, gt))
    return out


def _seq(sample_id: str, tokens: int) -> TrainingSequence:
    return TrainingSequence(sample_id, SampleKind.PLANNING, (TrainingSegment(Modality.TEXT, True, tokens, text="x"),))


def _greedy(lengths: List[int], budget: int) -> List[List[int]]:
    out: List[List[int]] = []
    for i, n in enumerate(lengths):
        if out and sum(lengths[j] for j in out[-1]) + n <= budget:
            out[-1].append(i)
        else:
            out.append([i])
    return out


# ----------------------------
# 标注
# ----------------------------

def test_dancing_woman_prompt_yields_identity_and_style():
    triple = RawTriple.of("the woman in image_1 dancing in the style of image_2", [vec(1, 0), vec(0, 1)], vec(1, 1))
    result = build_planning([triple], simulated_annotator())
    assert len(result.samples) == 1
    plan = result.samples[0].plan_gt
    assert [it.check_type for it in plan.items] == [CheckType.IDENTITY, CheckType.STYLE]
    assert plan.items[0].source.description == "the woman"
    assert plan.items[1].source.image_id == "image_2"
    assert plan.origin == PlanOrigin.GROUND_TRUTH_ANNOTATION


def test_attribute_mention_replaces_identity_and_unmentioned_images_get_subject_items():
    plan = parse_prompt_checks("keep the color of the red dress in image_2", 3)
    kinds = [(it.check_type, it.source.image_id) for it in plan.items]
    assert kinds == [(CheckType.ATTRIBUTE, "image_2"), (CheckType.IDENTITY, "image_1"), (CheckType.IDENTITY, "image_3")]
    assert plan.items[0].target.description == "the color of the red dress"
    assert plan.items[1].source.description == "the subject of image_1"


def test_prompt_without_references_gets_fixed_template():
    assert parse_prompt_checks("a lighthouse at dusk", 0) == fixed_template_plan("a lighthouse at dusk")


def test_empty_triple_list_builds_empty_corpus():
    result = build_planning([], simulated_annotator())
    assert result.samples == () and result.quarantine == ()


def test_bad_annotator_document_is_quarantined():
    class Flaky:
        def __init__(self):
            self.inner = SimulatedAnnotatorTransport()

        def send(self, request: Dict[str, Any]) -> str:
            if request["prompt"].endswith("take 1"):
                return '{"items": [{"check_type": "pose"}], "origin": "ground_truth_annotation"}'
            return self.inner.send(request)

    triples = _triples(3)
    result = build_planning(triples, RequestAnnotator(Flaky()))
    assert [s.sample_id for s in result.samples] == [triples[0].triple_id, triples[2].triple_id]
    assert len(result.quarantine) == 1
    q = result.quarantine[0]
    assert (q.sample_id, q.stage, q.code) == (triples[1].triple_id, "plan", "SchemaViolation")


def test_plan_outside_context_is_a_schema_violation():
    class OutOfRange:
        def send(self, request):
            return '{"items": [{"check_type": "identity", "source": {"image_id": "image_9", "description": "x"}, ' \
                   '"target": {"image_id": "GENERATED", "description": "x"}}], "origin": "ground_truth_annotation"}'

    with pytest.raises(SchemaViolation):
        RequestAnnotator(OutOfRange()).annotate_plan(Prompt("a dog"), VisualContext((vec(1.0),)))


def test_unavailable_annotator_aborts_the_build():
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(503, json={"ok": False, "error": "down"})

    transport = HttpAnnotatorTransport("http://annotator.test", "tok", transport=httpx.MockTransport(handler), base_delay_sec=0.0)
    with pytest.raises(AnnotatorUnavailable):
        build_planning(_triples(2), RequestAnnotator(transport))


def test_http_annotator_returns_document():
    plan_doc = '{"items":[],"origin":"fixed_template"}\n'

    def handler(request: httpx.Request) -> httpx.Response:
        assert request.headers["Authorization"] == "Bearer tok"
        return httpx.Response(200, json={"ok": True, "document": plan_doc})

    transport = HttpAnnotatorTransport("http://annotator.test", "tok", transport=httpx.MockTransport(handler), base_delay_sec=0.0)
    plan = RequestAnnotator(transport).annotate_plan(Prompt("a lighthouse"), VisualContext())
    assert plan == fixed_template_plan("a lighthouse")


# ----------------------------
# 缓存
# ----------------------------

def test_replay_cache_reproduces_corpus_without_calls(tmp_path):
    triples = _triples(50)
    inner = SimulatedAnnotatorTransport()
    recording = CachedTransport(inner, tmp_path / "cache")
    first = build_planning(triples, RequestAnnotator(recording))
    write_planning_corpus(tmp_path / "a.jsonl", first.samples)
    assert inner.calls == 50
    assert recording.stats.writes == 50

    replay = CachedTransport(None, tmp_path / "cache", replay_only=True)
    second = build_planning(triples, RequestAnnotator(replay), workers=4)
    write_planning_corpus(tmp_path / "b.jsonl", second.samples)
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    assert replay.stats.to_document() == {"hits": 50, "misses": 0, "writes": 0}
    assert inner.calls == 50


def test_simulated_annotator_counts_concurrent_calls():
    transport = SimulatedAnnotatorTransport()
    result = build_planning(_triples(64), RequestAnnotator(transport), workers=8)
    assert len(result.samples) == 64
    assert transport.calls == 64


def test_replay_only_cache_miss_raises(tmp_path):
    replay = CachedTransport(None, tmp_path / "empty", replay_only=True)
    with pytest.raises(CacheMiss):
        build_planning(_triples(1), RequestAnnotator(replay))


def test_cache_needs_inner_transport_unless_replay_only(tmp_path):
    with pytest.raises(DatasetError):
        CachedTransport(None, tmp_path)


def test_cache_key_ignores_whitespace_but_not_images():
    base = {"op": "plan", "prompt": "the dog  in image_1", "images": [{"vector": [1.0, 0.0]}], "system_prompt_id": "plan-v1"}
    spaced = dict(base, prompt=" the dog in\nimage_1 ")
    other = dict(base, images=[{"vector": [0.0, 1.0]}])
    assert make_key(base) == make_key(spaced)
    assert make_key(base) != make_key(other)
    assert make_key(base) != make_key(dict(base, system_prompt_id="plan-v2"))


# ----------------------------
# 修正语料
# ----------------------------

def _planning(n: int) -> List[PlanningSample]:
    return list(build_planning(_triples(n), simulated_annotator()).samples)


@pytest.mark.parametrize("fraction,expected_perfect", [(0.0, 0), (1.0, 10)])
def test_perfect_fraction_extremes(fraction, expected_perfect):
    result = build_correction(_planning(10), SimulatedDegrader(seed=1), simulated_annotator(), perfect_fraction=fraction)
    kinds = [s.kind for s in result.samples]
    assert kinds.count(CorrectionKind.SUBOPTIMAL) == 10
    assert kinds.count(CorrectionKind.PERFECT) == expected_perfect
    for s in result.samples:
        if s.kind == CorrectionKind.PERFECT:
            assert s.negative == s.final_gt
            assert s.eval_gt.satisfied
            assert s.sample_id.endswith("-p")
        else:
            assert s.negative != s.final_gt
            assert s.degradation is not None and s.degradation.mode in set(FailureMode)


def test_correction_build_is_independent_of_worker_count():
    planning = _planning(12)
    a = build_correction(planning, SimulatedDegrader(), simulated_annotator(), perfect_fraction=0.5, seed=3, workers=1)
    b = build_correction(planning, SimulatedDegrader(), simulated_annotator(), perfect_fraction=0.5, seed=3, workers=4)
    assert a == b


def test_perfect_fraction_must_be_a_probability():
    with pytest.raises(DatasetError):
        build_correction([], SimulatedDegrader(), simulated_annotator(), perfect_fraction=1.5)


def test_perfect_sample_invariant():
    p = _planning(1)[0]
    with pytest.raises(InvalidSample):
        CorrectionSample(p, vec(*([9.0] * 8)), satisfied_feedback(p.plan_gt), CorrectionKind.PERFECT)
    failed = EvalFeedback.from_verdicts([ItemVerdict(i, False, "off") for i in range(len(p.plan_gt))])
    with pytest.raises(InvalidSample):
        CorrectionSample(p, p.final_gt, failed, CorrectionKind.PERFECT)
    with pytest.raises(InvalidSample):
        CorrectionSample(p, vec(*([9.0] * 8)), satisfied_feedback(p.plan_gt), CorrectionKind.SUBOPTIMAL)


def test_suboptimal_samples_never_carry_satisfied_feedback():
    planning = _planning(20)
    for strength in (0.2, 0.6, 1.0):
        result = build_correction(planning, SimulatedDegrader(strength=strength), simulated_annotator(), perfect_fraction=0.0)
        assert not [s for s in result.samples if s.kind == CorrectionKind.SUBOPTIMAL and s.eval_gt.satisfied]
        assert {q.code for q in result.quarantine} <= {"NegativeNotDegraded"}
        assert len(result.samples) + len(result.quarantine) == 20
        for s in result.samples:
            seq = to_training_sequence(s)
            assert seq.sample_kind == SampleKind.CORRECTION_SUBOPTIMAL


def test_negative_too_close_to_ground_truth_is_quarantined():
    rng = np.random.default_rng(11)
    triples = []
    for i in range(5):
        gt = rng.standard_normal(8)
        refs = [ImageRef.from_vector(gt), ImageRef.from_vector(2.0 * gt)]
        triples.append(RawTriple.of(f"the dog in image_1 chasing the cat in image_2, take {i}", refs, ImageRef.from_vector(gt)))
    planning = list(build_planning(triples, simulated_annotator()).samples)
    result = build_correction(planning, SimulatedDegrader(strength=0.05), simulated_annotator(), perfect_fraction=1.0)
    assert result.samples == ()
    assert [q.code for q in result.quarantine] == ["NegativeNotDegraded"] * 5
    assert all(q.stage == "eval" for q in result.quarantine)
    with pytest.raises(DatasetError):
        build_correction(planning, SimulatedDegrader(), simulated_annotator(), perfect_fraction=0.0, negative_attempts=0)
    assert issubclass(NegativeNotDegraded, InvalidSample)


def test_degrader_is_deterministic_and_validates_strength():
    d = SimulatedDegrader(seed=5, strength=0.4)
    gt = vec(1.0, 2.0, 3.0)
    ctx = VisualContext((vec(0.0, 1.0, 0.0), vec(1.0, 0.0, 0.0)))
    a = d.generate_negative(Prompt("x"), ctx, gt, 17)
    assert a == d.generate_negative(Prompt("x"), ctx, gt, 17)
    assert a != gt
    blob = d.generate_negative(Prompt("x"), ctx, ImageRef.from_bytes(b"jpeg"), 17)
    assert blob.kind.value == "blob"
    with pytest.raises(DatasetError):
        SimulatedDegrader(strength=0.0)


def test_sample_triples_preserves_order():
    triples = _triples(10)
    picked = sample_triples(triples, 4, seed=2)
    assert len(picked) == 4
    positions = [triples.index(t) for t in picked]
    assert positions == sorted(positions)
    assert sample_triples(triples, 4, seed=2) == picked
    assert sample_triples(triples, 20) == triples
    with pytest.raises(DatasetError):
        sample_triples(triples, -1)


# ----------------------------
# 训练序列
# ----------------------------

def test_planning_sequence_layout():
    seq = to_training_sequence(_planning(1)[0])
    assert seq.loss_flags == [False, False, False, True, True]
    assert [s.modality for s in seq.segments] == [Modality.TEXT, Modality.IMAGE, Modality.IMAGE, Modality.TEXT, Modality.IMAGE]
    assert seq.total_tokens == sum(s.token_length for s in seq.segments)


def test_loss_mask_follows_sample_kind(rng):
    for i in range(500):
        n = int(rng.integers(0, 5))
        refs = tuple(ImageRef.from_vector(rng.standard_normal(4)) for _ in range(n))
        plan = identity_plan(n, PlanOrigin.GROUND_TRUTH_ANNOTATION) if n else fixed_template_plan("p")
        planning = PlanningSample(f"s{i}", Prompt(f"prompt number {i}"), VisualContext(refs), plan, vec(*rng.standard_normal(4)))
        choice = int(rng.integers(0, 3))
        if choice == 0:
            sample = planning
        elif choice == 1:
            failed = EvalFeedback.from_verdicts([ItemVerdict(k, False, "off") for k in range(plan.verdict_slots)])
            sample = CorrectionSample(planning, vec(*rng.standard_normal(4)), failed, CorrectionKind.SUBOPTIMAL)
        else:
            sample = CorrectionSample(planning, planning.final_gt, satisfied_feedback(plan), CorrectionKind.PERFECT)

        seq = to_training_sequence(sample, image_token_cost=int(rng.integers(1, 2048)))
        assert seq.loss_flags == loss_pattern(seq.sample_kind, n)
        loss_segments = [s for s in seq.segments if s.need_loss]
        if seq.sample_kind == SampleKind.CORRECTION_PERFECT:
            assert len(loss_segments) == 1 and loss_segments[0].modality == Modality.TEXT
        elif seq.sample_kind == SampleKind.CORRECTION_SUBOPTIMAL:
            assert [s.modality for s in loss_segments] == [Modality.TEXT, Modality.IMAGE]
            assert loss_segments[1].image == planning.final_gt
        else:
            assert [s.modality for s in loss_segments] == [Modality.TEXT, Modality.IMAGE]


def test_tokenizer_failure_is_reported():
    with pytest.raises(TokenizerFailure):
        to_training_sequence(_planning(1)[0], tokenizer=lambda text: 0)


def test_sequence_without_loss_segment_is_invalid():
    with pytest.raises(InvalidSample):
        TrainingSequence("x", SampleKind.PLANNING, (TrainingSegment(Modality.TEXT, False, 3, text="abc"),))


# ----------------------------
# 打包
# ----------------------------

def test_pack_worked_example():
    seqs = [_seq("s1", 10000), _seq("s2", 15000), _seq("s3", 8000)]
    batches = pack(seqs, 32000)
    assert [[s.sample_id for s in b.sequences] for b in batches] == [["s1", "s2"], ["s3"]]
    assert [b.total_tokens for b in batches] == [25000, 8000]


def test_pack_budget_boundaries():
    assert len(pack([_seq("a", 32000)], 32000)) == 1
    with pytest.raises(SequenceExceedsBudget) as ei:
        pack([_seq("a", 10), _seq("b", 32001)], 32000)
    assert ei.value.index == 1
    with pytest.raises(DatasetError):
        pack([_seq("a", 1)], 0)
    assert pack([], 100) == []


def test_pack_conserves_order_and_matches_greedy(rng):
    budget = 32000
    lengths = [int(x) for x in rng.integers(1, budget + 1, size=1000)]
    seqs = [_seq(f"s{i}", n) for i, n in enumerate(lengths)]
    batches = pack(seqs, budget)
    flat = [s.sample_id for b in batches for s in b.sequences]
    assert flat == [s.sample_id for s in seqs]
    assert all(b.total_tokens <= budget for b in batches)
    assert [[int(s.sample_id[1:]) for s in b.sequences] for b in batches] == _greedy(lengths, budget)
    for prev, nxt in zip(batches, batches[1:]):
        assert prev.total_tokens + nxt.sequences[0].total_tokens > budget


# ----------------------------
# 语料文件
# ----------------------------

def test_corpus_files_round_trip(tmp_path):
    planning = _planning(4)
    correction = build_correction(planning, SimulatedDegrader(), simulated_annotator(), perfect_fraction=0.5).samples
    write_planning_corpus(tmp_path / "planning.jsonl", planning)
    write_correction_corpus(tmp_path / "correction.jsonl", correction)
    assert read_planning_corpus(tmp_path / "planning.jsonl") == planning
    assert read_correction_corpus(tmp_path / "correction.jsonl") == list(correction)

    seqs = [to_training_sequence(s) for s in correction]
    write_sequences(tmp_path / "seq.jsonl", seqs)
    assert read_sequences(tmp_path / "seq.jsonl") == seqs

    batches = pack(seqs, 32000)
    paths = write_packed(tmp_path / "packed", batches)
    assert [p.name for p in paths] == [f"batch-{i:05d}.jsonl" for i in range(len(batches))]
    assert [len(read_sequences(p)) for p in paths] == [len(b) for b in batches]


def test_mixed_records_render_to_sequences(tmp_path):
    planning = _planning(1)[0]
    perfect = CorrectionSample(planning, planning.final_gt, satisfied_feedback(planning.plan_gt), CorrectionKind.PERFECT)
    docs = [planning_to_document(planning), correction_to_document(perfect), sequence_to_document(_seq("raw", 7))]
    write_jsonl(tmp_path / "mixed.jsonl", docs)
    seqs = read_training_sequences(tmp_path / "mixed.jsonl", image_token_cost=16)
    assert [s.sample_kind for s in seqs] == [SampleKind.PLANNING, SampleKind.CORRECTION_PERFECT, SampleKind.PLANNING]
    assert seqs[2].total_tokens == 7


def test_corrupt_corpus_line_names_the_line(tmp_path):
    path = tmp_path / "planning.jsonl"
    write_planning_corpus(path, _planning(1))
    with path.open("a", encoding="utf-8") as f:
        f.write('{"record": "planning", "sample_id": "bad"}\n')
    with pytest.raises(SchemaViolation) as ei:
        read_planning_corpus(path)
    assert ":2:" in str(ei.value)


def test_read_triples_resolves_paths_next_to_the_file(tmp_path):
    data = tmp_path / "data"
    (data / "refs").mkdir(parents=True)
    np.save(data / "refs" / "a.npy", np.array([1.0, 2.0]))
    np.save(data / "gt.npy", np.array([3.0, 4.0]))
    write_jsonl(data / "triples.jsonl", [{"id": "t1", "prompt": "the cat in image_1", "references": ["refs/a.npy"], "ground_truth": "gt.npy"}])
    [triple] = read_triples(data / "triples.jsonl")
    assert triple.triple_id == "t1"
    assert triple.references == (vec(1.0, 2.0),)
    assert triple.ground_truth == vec(3.0, 4.0)


def test_quarantine_and_manifest_files(tmp_path):
    triples = _triples(2)

    class Broken:
        def send(self, request):
            return "not json"

    result = build_planning(triples, RequestAnnotator(Broken()))
    write_quarantine(tmp_path / "quarantine.jsonl", result.quarantine)
    assert read_quarantine(tmp_path / "quarantine.jsonl") == list(result.quarantine)

    write_manifest(tmp_path, corpus_manifest("planning", {"samples": 0, "quarantined": 2}, workers=1))
    manifest = read_manifest(tmp_path)
    assert manifest["counts"] == {"quarantined": 2, "samples": 0}
    assert manifest["sft"]["packing_budget_tokens"] == 32000
