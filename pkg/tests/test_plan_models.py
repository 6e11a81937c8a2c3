# -*- coding: utf-8 -*-
from __future__ import annotations

import pytest

from libs.plan.errors import EmptyChecklist, EmptyPrompt, FeedbackInconsistent, MalformedRegion, PlanError
from libs.plan.models import (
    GENERATED,
    CheckItem,
    Checklist,
    CheckType,
    ElementRef,
    EvalFeedback,
    ItemVerdict,
    PlanOrigin,
    Region,
    fixed_template_plan,
    image_id,
    image_index,
    satisfied_feedback,
)
from libs.plan.validation import ViolationKind, validate_against_context, validate_feedback
from tests.helpers import identity_plan


def test_image_ids_are_one_based():
    assert image_id(1) == "image_1"
    assert image_index("image_12") == 12
    assert image_index(GENERATED) is None
    assert image_index("image_0") is None
    with pytest.raises(PlanError):
        image_id(0)


@pytest.mark.parametrize("coords", [(0.5, 0.0, 0.5, 1.0), (0.0, 0.2, 1.0, 0.1), (-0.1, 0.0, 0.5, 0.5), (0.0, 0.0, 1.2, 1.0)])
def test_region_rejects_degenerate_or_out_of_range(coords):
    with pytest.raises(MalformedRegion):
        Region(*coords)


def test_between_always_targets_generated():
    item = CheckItem.between(CheckType.STYLE, "image_2", "the artistic style")
    assert item.source.image_id == "image_2"
    assert item.target.image_id == GENERATED
    assert item.target.description == "the artistic style"
    with pytest.raises(PlanError):
        CheckItem.between(CheckType.IDENTITY, GENERATED, "the dog")


def test_empty_checklist_only_for_fixed_template():
    with pytest.raises(EmptyChecklist):
        Checklist((), PlanOrigin.MODEL_GENERATED)
    plan = fixed_template_plan("a red apple")
    assert len(plan) == 0
    assert plan.origin == PlanOrigin.FIXED_TEMPLATE
    assert plan.verdict_slots == 1


def test_fixed_template_needs_prompt():
    with pytest.raises(EmptyPrompt):
        fixed_template_plan("   ")


def test_feedback_satisfied_must_match_verdicts():
    with pytest.raises(FeedbackInconsistent):
        EvalFeedback((ItemVerdict(0, True), ItemVerdict(1, False, "off")), True, "")
    with pytest.raises(FeedbackInconsistent):
        EvalFeedback((ItemVerdict(0, True),), True, "still edit")
    with pytest.raises(FeedbackInconsistent):
        EvalFeedback((ItemVerdict(0, False),), False, "")


def test_from_verdicts_writes_edit_instruction_for_failures():
    fb = EvalFeedback.from_verdicts([ItemVerdict(0, True), ItemVerdict(1, False, "hair color differs")])
    assert not fb.satisfied
    assert fb.failed_indices == (1,)
    assert "revise item 1: hair color differs" in fb.edit_instruction

    ok = EvalFeedback.from_verdicts([ItemVerdict(0, True)])
    assert ok.satisfied and ok.edit_instruction == ""


def test_satisfied_feedback_covers_every_slot():
    plan = identity_plan(3)
    fb = satisfied_feedback(plan)
    assert fb.satisfied
    assert [v.item_index for v in fb.verdicts] == [0, 1, 2]
    assert satisfied_feedback(fixed_template_plan("x")).verdicts[0].item_index == 0


def test_validate_against_context_reports_each_rule():
    plan = Checklist(
        (
            CheckItem.between(CheckType.IDENTITY, "image_1", "the woman"),
            CheckItem.between(CheckType.IDENTITY, "image_3", "the dog"),
            CheckItem(CheckType.STYLE, ElementRef(GENERATED, "style"), ElementRef("image_1", "style")),
        ),
        PlanOrigin.MODEL_GENERATED,
    )
    kinds = [(v.kind, v.item_index) for v in validate_against_context(plan, 2)]
    assert (ViolationKind.OUT_OF_RANGE_SOURCE, 1) in kinds
    assert (ViolationKind.GENERATED_SOURCE, 2) in kinds
    assert (ViolationKind.NON_GENERATED_TARGET, 2) in kinds
    assert validate_against_context(identity_plan(2), 2) == []


def test_validate_feedback_flags_range_and_duplicates():
    plan = identity_plan(2)
    fb = EvalFeedback.from_verdicts([ItemVerdict(0, True), ItemVerdict(0, True), ItemVerdict(5, True)])
    kinds = [v.kind for v in validate_feedback(fb, plan)]
    assert kinds == [ViolationKind.DUPLICATE_VERDICT, ViolationKind.VERDICT_OUT_OF_RANGE]
