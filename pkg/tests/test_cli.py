# -*- coding: utf-8 -*-
from __future__ import annotations

import argparse
import json

import numpy as np
import pytest

from libs.dataset.corpus import read_correction_corpus, read_manifest, write_jsonl, write_sequences
from libs.dataset.sequence import Modality, SampleKind, TrainingSegment, TrainingSequence
from libs.plan.codec import serialize
from scripts.vacot import build_parser, main
from tests.helpers import identity_plan


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for name in ("VACOT_ANNOTATOR_TOKEN", "VACOT_SCORER_TOKEN", "VACOT_BACKEND_TOKEN", "VACOT_ANNOTATOR_URL",
                 "VACOT_SCORER_URL", "VACOT_BACKEND_URL", "VACOT_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    np.save(tmp_path / "dog.npy", np.array([1.0, 0.2, -0.3, 0.5]))
    np.save(tmp_path / "hat.npy", np.array([0.1, 1.0, 0.4, -0.2]))
    np.save(tmp_path / "gt.npy", np.array([0.6, 0.6, 0.0, 0.2]))
    return tmp_path


def _run(capsys, *argv: str):
    code = main(list(argv))
    captured = capsys.readouterr()
    out = json.loads(captured.out) if code == 0 and captured.out.strip() else None
    return code, out, captured.err


def test_infer_is_reproducible(workdir, capsys):
    args = ["infer", "--prompt", "the dog in image_1 wearing the hat in image_2", "--ref", "dog.npy", "--ref", "hat.npy",
            "--seed", "7", "--max-iter", "4"]
    code, out, _ = _run(capsys, *args, "--out", "a/trace.json")
    assert code == 0
    assert out["trace"].endswith("trace.json")
    assert 1 <= out["iterations"] <= 4
    code, _, _ = _run(capsys, *args, "--out", "b/trace.json")
    assert code == 0
    assert (workdir / "a" / "trace.json").read_bytes() == (workdir / "b" / "trace.json").read_bytes()


def test_infer_records_rewards(workdir, capsys):
    code, out, _ = _run(capsys, "infer", "--prompt", "a dog", "--ref", "dog.npy", "--record-rewards", "--out", "t.json")
    assert code == 0
    doc = json.loads((workdir / "t.json").read_text(encoding="utf-8"))
    assert all("reward" in step for step in doc["steps"])


def test_infer_accepts_context_list_and_trace_out(workdir, capsys):
    code, out, _ = _run(capsys, "infer", "--prompt", "a dog", "--context", "dog.npy", "hat.npy", "--max-iter", "3",
                        "--backend", "sim", "--seed", "7", "--trace-out", "t.json")
    assert code == 0
    assert out["trace"] == "t.json"
    doc = json.loads((workdir / "t.json").read_text(encoding="utf-8"))
    assert len(doc["context"]) == 2


def test_score_with_suite_and_weights_file(workdir, capsys):
    (workdir / "plan.json").write_text(serialize(identity_plan(1)), encoding="utf-8")
    (workdir / "w.yaml").write_text("w_visual: 2.0\nw_text: 0.0\n", encoding="utf-8")
    code, out, _ = _run(capsys, "score", "--plan", "plan.json", "--context", "dog.npy", "--image", "dog.npy",
                        "--prompt", "a dog", "--suite", "mock", "--weights", "w.yaml")
    assert code == 0
    assert out["weights"] == {"w_visual": 2.0, "w_text": 0.0, "extras": {}}
    assert out["r_visual"] == pytest.approx(1.0, abs=1e-6)
    assert out["r_total"] == pytest.approx(2.0 * out["r_visual"])

    (workdir / "bad.json").write_text('{"w_visual": -1}', encoding="utf-8")
    code, _, err = _run(capsys, "score", "--plan", "plan.json", "--context", "dog.npy", "--image", "dog.npy",
                        "--prompt", "a dog", "--weights", "bad.json")
    assert code == 1
    assert "error: InvalidWeights" in err


def test_pack_three_sequences_into_two_batches(workdir, capsys):
    seqs = [
        TrainingSequence(name, SampleKind.PLANNING, (TrainingSegment(Modality.TEXT, True, n, text="x"),))
        for name, n in (("s1", 10000), ("s2", 15000), ("s3", 8000))
    ]
    write_sequences(workdir / "seqs.jsonl", seqs)
    code, out, _ = _run(capsys, "dataset", "pack", "--in", "seqs.jsonl", "--out", "packed", "--budget", "32000")
    assert code == 0
    assert out["files"] == ["batch-00000.jsonl", "batch-00001.jsonl"]
    assert out["tokens"] == 33000
    assert read_manifest(workdir / "packed")["counts"]["batches"] == 2


def test_pack_rejects_oversized_sequence(workdir, capsys):
    seq = TrainingSequence("big", SampleKind.PLANNING, (TrainingSegment(Modality.TEXT, True, 40000, text="x"),))
    write_sequences(workdir / "seqs.jsonl", [seq])
    code, _, err = _run(capsys, "dataset", "pack", "--in", "seqs.jsonl", "--out", "packed")
    assert code == 1
    assert "error: SequenceExceedsBudget" in err


def test_dataset_pipeline_end_to_end(workdir, capsys):
    write_jsonl(workdir / "triples.jsonl", [
        {"id": f"t{i}", "prompt": f"the dog in image_1 under the hat in image_2, shot {i}",
         "references": ["dog.npy", "hat.npy"], "ground_truth": "gt.npy"}
        for i in range(6)
    ])
    code, out, _ = _run(capsys, "dataset", "build-planning", "--in", "triples.jsonl", "--out", "planning", "--cache", "cache")
    assert code == 0
    assert out["samples"] == 6 and out["quarantined"] == 0

    code, out, _ = _run(capsys, "dataset", "build-correction", "--in", "planning/planning.jsonl", "--out", "correction",
                        "--cache", "cache", "--perfect-fraction", "1.0")
    assert code == 0
    assert (out["suboptimal"], out["perfect"]) == (6, 6)
    assert len(read_correction_corpus(workdir / "correction" / "correction.jsonl")) == 12

    code, out, _ = _run(capsys, "dataset", "build-planning", "--in", "triples.jsonl", "--out", "replayed",
                        "--cache", "cache", "--replay-only")
    assert code == 0
    assert (workdir / "planning" / "planning.jsonl").read_bytes() == (workdir / "replayed" / "planning.jsonl").read_bytes()

    code, out, _ = _run(capsys, "validate-reward", "--in", "correction/correction.jsonl", "--out", "validation")
    assert code == 0
    assert out["n_pairs"] == 6
    assert (workdir / "validation" / "preference.csv").exists()

    code, out, _ = _run(capsys, "dataset", "pack", "--in", "planning/planning.jsonl", "--in", "correction/correction.jsonl",
                        "--out", "packed")
    assert code == 0
    assert out["sequences"] == 18


def test_replay_only_without_cache_is_a_config_error(workdir, capsys):
    write_jsonl(workdir / "triples.jsonl", [{"prompt": "a dog", "references": [], "ground_truth": "gt.npy"}])
    code, _, err = _run(capsys, "dataset", "build-planning", "--in", "triples.jsonl", "--replay-only")
    assert code == 1
    assert "error: ConfigError" in err


def test_train_commands_write_outputs(workdir, capsys):
    code, out, _ = _run(capsys, "train-grpo-toy", "--iterations", "3", "--out", "grpo")
    assert code == 0
    assert out["iterations"] == 3
    lines = (workdir / "grpo" / "training_report.csv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 4
    assert (workdir / "grpo" / "params.npy").exists()

    code, out, _ = _run(capsys, "train-flow-toy", "--steps", "20", "--batch-size", "32", "--out", "flow")
    assert code == 0
    assert (workdir / "flow" / "flow_curve.csv").read_text(encoding="utf-8").startswith("step,loss\n")

    _run(capsys, "infer", "--prompt", "a dog", "--ref", "dog.npy", "--record-rewards", "--out", "trace.json")
    code, out, _ = _run(capsys, "report", "--trace", "trace.json", "--training", "grpo/training_report.csv", "--out", "report")
    assert code == 0
    assert "grpo_reward.svg" in out["plots"]
    assert "summary.csv" in out["tables"]


def test_usage_errors_exit_with_two(workdir, capsys):
    assert main(["no-such-command"]) == 2
    assert main([]) == 2
    assert main(["dataset"]) == 2
    assert main(["infer"]) == 2
    capsys.readouterr()


def test_domain_errors_exit_with_one(workdir, capsys):
    code, _, err = _run(capsys, "infer", "--prompt", "a dog", "--ref", "missing.npy")
    assert code == 1
    assert err.strip().splitlines()[-1].startswith("error: ImageUnresolvable:")

    code, _, err = _run(capsys, "infer", "--prompt", "a dog", "--max-iter", "0")
    assert code == 1
    assert "error: ConfigError" in err


def test_tokens_only_come_from_the_environment(workdir, capsys):
    assert main(["infer", "--prompt", "a dog", "--scorer-token", "abc"]) == 2
    (workdir / "cfg.yaml").write_text("scorer_token: abc\n", encoding="utf-8")
    code, _, err = _run(capsys, "infer", "--prompt", "a dog", "--config", "cfg.yaml")
    assert code == 1
    assert "error: ConfigError" in err

    parser = build_parser()
    stack = [parser]
    while stack:
        p = stack.pop()
        for action in p._actions:
            assert not any("token" in opt for opt in action.option_strings)
            if isinstance(action, argparse._SubParsersAction):
                stack.extend(action.choices.values())
