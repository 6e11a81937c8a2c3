# -*- coding: utf-8 -*-
"""vacot 命令行入口

用法示例：
  python -m scripts.vacot infer --prompt "the dog in image_1 on a beach" --context refs/dog.npy refs/hat.npy --seed 7 --trace-out out/trace.json
  python -m scripts.vacot score --plan plan.json --context refs/dog.npy --image out/final.npy --prompt "..." --suite mock --weights weights.yaml
  python -m scripts.vacot dataset build-planning --in triples.jsonl --out out/planning --cache cache/
  python -m scripts.vacot dataset build-correction --in out/planning/planning.jsonl --out out/correction --cache cache/
  python -m scripts.vacot dataset pack --in out/correction/correction.jsonl --out out/packed --budget 32000
  python -m scripts.vacot train-grpo-toy --out out/grpo --iterations 200
  python -m scripts.vacot train-flow-toy --out out/flow
  python -m scripts.vacot validate-reward --in out/correction/correction.jsonl
  python -m scripts.vacot report --trace out/trace.json --training out/grpo/training_report.csv --out out/report

配置优先级：命令行参数 > --config YAML > 环境变量（可写在 .env） > 默认值。
token 只从环境变量读取（VACOT_ANNOTATOR_TOKEN / VACOT_SCORER_TOKEN / VACOT_BACKEND_TOKEN）。

退出码：0 成功；1 领域错误（stderr 打印 "error: <code>: <message>"）；2 用法错误。
日志（JSON 行）写 stderr，stdout 只输出命令结果。
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence

import numpy as np
import yaml

from libs.common.config import AppConfig, load_config
from libs.common.errors import ConfigError, VacotError
from libs.common.http_errors import ServiceHttpError
from libs.common.images import load_image_ref
from libs.common.json import dumps_json
from libs.common.logging import JsonFormatter, setup_logging
from libs.dataset.annotator import HttpAnnotatorTransport, RequestAnnotator, SimulatedAnnotatorTransport
from libs.dataset.builders import build_correction, build_planning, sample_triples
from libs.dataset.cache import CachedTransport
from libs.dataset.corpus import (
    CORRECTION_FILE,
    PLANNING_FILE,
    QUARANTINE_FILE,
    corpus_manifest,
    read_correction_corpus,
    read_planning_corpus,
    read_training_sequences,
    read_triples,
    write_correction_corpus,
    write_manifest,
    write_packed,
    write_planning_corpus,
    write_quarantine,
)
from libs.dataset.degrader import SimulatedDegrader
from libs.dataset.models import CorrectionKind
from libs.dataset.packing import pack
from libs.grpo.config import FlowTrainSettings, GrpoConfig, TrainSettings
from libs.grpo.env import ToyFlowEnv
from libs.grpo.flow_matching import FlowToyData, train_flow_toy
from libs.grpo.policy import LinearVelocityField
from libs.grpo.trainer import train_toy, write_report_csv
from libs.inference.engine import run_episode
from libs.inference.http_backend import HttpGenerationBackend
from libs.inference.models import EngineConfig, Prompt, VisualContext
from libs.inference.sim_backend import SimSpec, simulated_backend
from libs.inference.trace import write_trace
from libs.plan.codec import parse_checklist
from libs.report import load_traces, load_training_rows, write_report
from libs.reward.composite import CompositeReward
from libs.reward.errors import InvalidWeights
from libs.reward.http_suite import http_suite
from libs.reward.mock import mock_suite
from libs.reward.suite import RewardWeights, ScorerSuite
from libs.reward.validation import PreferencePair, preference_validation

logger = setup_logging("vacot-cli")

# 命令行 dest 与 AppConfig 字段同名的参数，未给出时为 None（交给配置文件/环境变量/默认值）
OVERRIDE_FIELDS = (
    "backend", "annotator", "scorer", "scorer_seed", "reward_preset",
    "max_iterations", "seed",
    "group_size", "num_steps", "clip_epsilon", "kl_beta", "train_iterations", "learning_rate", "train_workers",
    "flow_steps", "flow_batch_size", "flow_learning_rate",
    "perfect_fraction", "budget", "image_token_cost", "dataset_workers", "degrader_strength", "sample_size",
    "replay_only",
)


def _config(args: argparse.Namespace) -> AppConfig:
    overrides = {name: getattr(args, name) for name in OVERRIDE_FIELDS if getattr(args, name, None) is not None}
    cfg = load_config(args.config, overrides)
    _apply_log_level(cfg.log_level)
    logger.debug("config loaded", extra={"extra_fields": {"event": "CONFIG_LOADED", "config": cfg.redacted()}})
    return cfg


def _apply_log_level(level: str) -> None:
    for item in logging.root.manager.loggerDict.values():
        if isinstance(item, logging.Logger) and any(isinstance(h.formatter, JsonFormatter) for h in item.handlers):
            item.setLevel(level.upper())


def _out_dir(args: argparse.Namespace, cfg: AppConfig, sub: str) -> Path:
    return Path(args.out) if getattr(args, "out", None) else Path(cfg.out_dir) / sub


def _emit(doc: Dict[str, Any]) -> None:
    print(dumps_json(doc))


def _suite(cfg: AppConfig) -> ScorerSuite:
    if cfg.scorer == "http":
        if not cfg.scorer_url:
            raise ConfigError("scorer=http needs VACOT_SCORER_URL")
        return http_suite(cfg.scorer_url, cfg.scorer_token)
    return mock_suite(cfg.scorer_seed)


def _weights(cfg: AppConfig, path: Optional[str]) -> RewardWeights:
    if path is None:
        return RewardWeights.preset(cfg.reward_preset)
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read weights file {path}: {e}") from e
    except yaml.YAMLError as e:
        raise InvalidWeights(f"weights file {path} is not valid YAML/JSON: {e}") from e
    return RewardWeights.from_document(doc)


def _annotator(cfg: AppConfig, cache_dir: Optional[str]) -> RequestAnnotator:
    inner = None
    if not cfg.replay_only:
        if cfg.annotator == "http":
            if not cfg.annotator_url:
                raise ConfigError("annotator=http needs VACOT_ANNOTATOR_URL")
            inner = HttpAnnotatorTransport(cfg.annotator_url, cfg.annotator_token)
        else:
            inner = SimulatedAnnotatorTransport(_suite(cfg))
    if cache_dir is None:
        if inner is None:
            raise ConfigError("--replay-only needs --cache")
        return RequestAnnotator(inner)
    return RequestAnnotator(CachedTransport(inner, cache_dir, replay_only=cfg.replay_only))


def _log_cache_stats(annotator: RequestAnnotator) -> None:
    transport = annotator.transport
    if isinstance(transport, CachedTransport):
        logger.info(
            "annotator cache stats",
            extra={"extra_fields": {"event": "ANNOTATOR_CACHE_STATS", **transport.stats.to_document()}},
        )


# ----------------------------
# infer / score
# ----------------------------

def cmd_infer(args: argparse.Namespace) -> int:
    cfg = _config(args)
    context = VisualContext(tuple(load_image_ref(p) for p in args.context or []))
    prompt = Prompt(args.prompt)

    if cfg.backend == "http":
        if not cfg.backend_url:
            raise ConfigError("backend=http needs VACOT_BACKEND_URL")
        backend = HttpGenerationBackend(cfg.backend_url, cfg.backend_token)
    else:
        dimension = len(context[0].vector) if len(context) and context[0].is_vector else cfg.sim_dimension
        backend = simulated_backend(SimSpec(
            dimension=dimension,
            refinement_rate=cfg.sim_refinement_rate,
            satisfaction_threshold=cfg.sim_threshold,
            noise_scale=cfg.sim_noise_scale,
            seed=cfg.seed,
        ))

    scorer = CompositeReward(_suite(cfg), _weights(cfg, args.weights)) if args.record_rewards else None
    engine_config = EngineConfig(max_iterations=cfg.max_iterations, record_rewards=bool(args.record_rewards), seed=cfg.seed)
    trace = run_episode(backend, prompt, context, engine_config, scorer)

    out = Path(args.out) if args.out else Path(cfg.out_dir) / "trace.json"
    write_trace(out, trace)
    _emit({"trace": str(out), "iterations": trace.iterations, "terminated_by": trace.terminated_by.value})
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    cfg = _config(args)
    try:
        plan = parse_checklist(Path(args.plan).read_bytes())
    except OSError as e:
        raise ConfigError(f"cannot read plan file {args.plan}: {e}") from e
    context = tuple(load_image_ref(p) for p in args.context or [])
    image = load_image_ref(args.image)
    breakdown = CompositeReward(_suite(cfg), _weights(cfg, args.weights)).evaluate(plan, context, image, args.prompt)
    _emit(breakdown.to_document())
    return 0


# ----------------------------
# dataset
# ----------------------------

def cmd_build_planning(args: argparse.Namespace) -> int:
    cfg = _config(args)
    triples = read_triples(args.input)
    if cfg.sample_size is not None:
        triples = sample_triples(triples, cfg.sample_size, cfg.seed)
    annotator = _annotator(cfg, args.cache)
    result = build_planning(triples, annotator, workers=cfg.dataset_workers)
    _log_cache_stats(annotator)

    out = _out_dir(args, cfg, "planning")
    write_planning_corpus(out / PLANNING_FILE, result.samples)
    write_quarantine(out / QUARANTINE_FILE, result.quarantine)
    counts = {"triples": len(triples), "samples": len(result.samples), "quarantined": len(result.quarantine)}
    write_manifest(out, corpus_manifest("planning", counts, annotator=cfg.annotator, sample_size=cfg.sample_size, seed=cfg.seed))
    _emit({"out": str(out), **counts})
    return 0


def cmd_build_correction(args: argparse.Namespace) -> int:
    cfg = _config(args)
    planning = read_planning_corpus(args.input)
    annotator = _annotator(cfg, args.cache)
    degrader = SimulatedDegrader(seed=cfg.seed, strength=cfg.degrader_strength)
    result = build_correction(
        planning, degrader, annotator, perfect_fraction=cfg.perfect_fraction, seed=cfg.seed, workers=cfg.dataset_workers
    )
    _log_cache_stats(annotator)

    out = _out_dir(args, cfg, "correction")
    write_correction_corpus(out / CORRECTION_FILE, result.samples)
    write_quarantine(out / QUARANTINE_FILE, result.quarantine)
    n_perfect = sum(1 for s in result.samples if s.kind == CorrectionKind.PERFECT)
    counts = {
        "planning": len(planning),
        "suboptimal": len(result.samples) - n_perfect,
        "perfect": n_perfect,
        "quarantined": len(result.quarantine),
    }
    write_manifest(out, corpus_manifest(
        "correction", counts,
        annotator=cfg.annotator, perfect_fraction=cfg.perfect_fraction, seed=cfg.seed, degrader_strength=cfg.degrader_strength,
    ))
    _emit({"out": str(out), **counts})
    return 0


def cmd_pack(args: argparse.Namespace) -> int:
    cfg = _config(args)
    sequences = []
    for path in args.input:
        sequences.extend(read_training_sequences(path, image_token_cost=cfg.image_token_cost))
    batches = pack(sequences, cfg.budget)

    out = _out_dir(args, cfg, "packed")
    files = write_packed(out, batches)
    counts = {"sequences": len(sequences), "batches": len(batches), "tokens": sum(b.total_tokens for b in batches)}
    write_manifest(out, corpus_manifest("packed", counts, budget=cfg.budget, image_token_cost=cfg.image_token_cost))
    _emit({"out": str(out), "files": [p.name for p in files], **counts})
    return 0


# ----------------------------
# 训练 / 验证 / 报告
# ----------------------------

def cmd_train_grpo_toy(args: argparse.Namespace) -> int:
    cfg = _config(args)
    config = GrpoConfig(group_size=cfg.group_size, num_steps=cfg.num_steps, clip_epsilon=cfg.clip_epsilon, kl_beta=cfg.kl_beta)
    settings = TrainSettings(
        iterations=cfg.train_iterations,
        conditions_per_iteration=cfg.conditions_per_iteration,
        minibatches=cfg.minibatches,
        learning_rate=cfg.learning_rate,
        step_sigma=cfg.step_sigma,
        eval_conditions=cfg.eval_conditions,
        workers=cfg.train_workers,
        seed=cfg.seed,
    )
    report = train_toy(ToyFlowEnv(), config, settings)

    out = _out_dir(args, cfg, "grpo")
    write_report_csv(report, out / "training_report.csv")
    np.save(out / "params.npy", report.final_params)
    _emit({
        "out": str(out),
        "iterations": len(report.rows),
        "initial_eval_reward": report.initial_eval_reward,
        "final_eval_reward": report.final_eval_reward,
        "drift": report.drift,
    })
    return 0


def cmd_train_flow_toy(args: argparse.Namespace) -> int:
    cfg = _config(args)
    settings = FlowTrainSettings(
        steps=cfg.flow_steps, batch_size=cfg.flow_batch_size, learning_rate=cfg.flow_learning_rate, seed=cfg.seed
    )
    data = FlowToyData.circle()
    report = train_flow_toy(LinearVelocityField(data.dim, data.dim), data, settings)

    out = _out_dir(args, cfg, "flow")
    out.mkdir(parents=True, exist_ok=True)
    with (out / "flow_curve.csv").open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["step", "loss"])
        w.writerows([[step, f"{loss:.8f}"] for step, loss in report.eval_curve])
    np.save(out / "params.npy", report.params)
    _emit({
        "out": str(out),
        "initial_loss": report.initial_loss,
        "final_loss": report.final_loss,
        "reduction": report.reduction,
    })
    return 0


def cmd_validate_reward(args: argparse.Namespace) -> int:
    cfg = _config(args)
    samples = [s for s in read_correction_corpus(args.input) if s.kind == CorrectionKind.SUBOPTIMAL]
    pairs = [
        PreferencePair(s.plan_gt, s.context.images, s.final_gt, s.negative, pair_id=s.sample_id)
        for s in samples
    ]
    result = preference_validation(pairs, _suite(cfg))

    out = _out_dir(args, cfg, "reward-validation")
    out.mkdir(parents=True, exist_ok=True)
    with (out / "preference.csv").open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["pair_id", "r_gt", "r_negative", "preferred"])
        w.writerows([[r.pair_id, f"{r.r_gt:.6f}", f"{r.r_negative:.6f}", int(r.preferred)] for r in result.rows])
    _emit({"out": str(out), "fraction": result.fraction, "n_pairs": result.n_pairs, "n_preferred": result.n_preferred})
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    cfg = _config(args)
    traces = load_traces(args.trace or [])
    rows = load_training_rows(args.training or [])
    out = _out_dir(args, cfg, "report")
    written = write_report(traces, rows, out)
    _emit({
        "out": str(out),
        "tables": [p.name for p in written.tables],
        "plots": [p.name for p in written.plots],
    })
    return 0


# ----------------------------
# parser
# ----------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=None, help="YAML 配置文件")
    p.add_argument("--seed", type=int, default=None)
    return p


def _add(sub, name: str, handler: Callable[[argparse.Namespace], int], help_text: str) -> argparse.ArgumentParser:
    p = sub.add_parser(name, parents=[_common()], help=help_text)
    p.set_defaults(handler=handler)
    return p


def _scorer_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--suite", "--scorer", dest="scorer", choices=["mock", "http"], default=None)
    p.add_argument("--scorer-seed", dest="scorer_seed", type=int, default=None)
    p.add_argument("--preset", dest="reward_preset", default=None, help="objsim | objsim+clip | objsim+clip+pick")


def _context_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--context", dest="context", nargs="+", action="extend", default=[], help="参考图（.npy 为向量图像）")
    p.add_argument("--ref", dest="context", action="append", help="同 --context，可重复")


def _weights_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--weights", default=None, help="奖励权重文件（YAML/JSON），优先于 --preset")


def _annotator_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--cache", default=None, help="标注缓存目录（录制/回放）")
    p.add_argument("--annotator", choices=["sim", "http"], default=None)
    p.add_argument("--replay-only", dest="replay_only", action="store_const", const=True, default=None)
    p.add_argument("--workers", dest="dataset_workers", type=int, default=None)
    _scorer_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vacot", description="visual-context consistency engine")
    sub = parser.add_subparsers(dest="command")

    p = _add(sub, "infer", cmd_infer, "run one plan/refine episode and write its trace")
    p.add_argument("--prompt", required=True)
    _context_flags(p)
    p.add_argument("--backend", choices=["sim", "http"], default=None)
    p.add_argument("--max-iter", dest="max_iterations", type=int, default=None)
    p.add_argument("--record-rewards", action="store_true")
    p.add_argument("--trace-out", "--out", dest="out", default=None, help="trace 文件路径")
    _scorer_flags(p)
    _weights_flag(p)

    p = _add(sub, "score", cmd_score, "score one generated image against a plan")
    p.add_argument("--plan", required=True)
    _context_flags(p)
    p.add_argument("--image", required=True)
    p.add_argument("--prompt", required=True)
    _scorer_flags(p)
    _weights_flag(p)

    ds = sub.add_parser("dataset", help="build and pack training corpora")
    ds_sub = ds.add_subparsers(dest="dataset_command")

    p = _add(ds_sub, "build-planning", cmd_build_planning, "annotate raw triples into planning samples")
    _annotator_flags(p)
    p.add_argument("--sample-size", dest="sample_size", type=int, default=None)

    p = _add(ds_sub, "build-correction", cmd_build_correction, "derive correction samples from a planning corpus")
    _annotator_flags(p)
    p.add_argument("--perfect-fraction", dest="perfect_fraction", type=float, default=None)
    p.add_argument("--strength", dest="degrader_strength", type=float, default=None)

    p = _add(ds_sub, "pack", cmd_pack, "render samples into sequences and pack them under a token budget")
    p.add_argument("--in", dest="input", action="append", required=True, help="JSONL 语料或序列文件，可重复")
    p.add_argument("--out", default=None)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--image-token-cost", dest="image_token_cost", type=int, default=None)

    p = _add(sub, "train-grpo-toy", cmd_train_grpo_toy, "train the toy flow policy with GRPO")
    p.add_argument("--out", default=None)
    p.add_argument("--iterations", dest="train_iterations", type=int, default=None)
    p.add_argument("--group-size", dest="group_size", type=int, default=None)
    p.add_argument("--num-steps", dest="num_steps", type=int, default=None)
    p.add_argument("--clip-epsilon", dest="clip_epsilon", type=float, default=None)
    p.add_argument("--beta", dest="kl_beta", type=float, default=None)
    p.add_argument("--lr", dest="learning_rate", type=float, default=None)
    p.add_argument("--workers", dest="train_workers", type=int, default=None)

    p = _add(sub, "train-flow-toy", cmd_train_flow_toy, "pretrain the toy velocity field with flow matching")
    p.add_argument("--out", default=None)
    p.add_argument("--steps", dest="flow_steps", type=int, default=None)
    p.add_argument("--batch-size", dest="flow_batch_size", type=int, default=None)
    p.add_argument("--lr", dest="flow_learning_rate", type=float, default=None)

    p = _add(sub, "validate-reward", cmd_validate_reward, "check the reward prefers ground truth over negatives")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default=None)
    _scorer_flags(p)

    p = _add(sub, "report", cmd_report, "summarize traces and training reports into tables and plots")
    p.add_argument("--trace", action="append", default=[])
    p.add_argument("--training", action="append", default=[])
    p.add_argument("--out", default=None)

    parser.set_defaults(_parser=parser, _dataset_parser=ds)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else 2

    handler = getattr(args, "handler", None)
    if handler is None:
        usage = args._dataset_parser if args.command == "dataset" else parser
        usage.print_usage(sys.stderr)
        print("error: a subcommand is required", file=sys.stderr)
        return 2

    try:
        return handler(args)
    except VacotError as e:
        print(f"error: {e.code}: {e}", file=sys.stderr)
        return 1
    except ServiceHttpError as e:
        print(f"error: ServiceHttpError: {e.message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
