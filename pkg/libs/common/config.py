# -*- coding: utf-8 -*-
"""统一配置模块

目标：
- 所有子命令共享同一套配置读取/校验逻辑，避免不一致。
- 优先级：命令行参数 > 配置文件（YAML） > 环境变量 > 字段默认值。
- 敏感信息（*_token）仅通过环境变量注入；配置文件里出现 token 直接拒绝。
- 数值字段按各模块前置条件校验，非法值在启动时失败并给出清晰错误。
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from libs.common.errors import ConfigError

SECRET_FIELDS = ("annotator_token", "scorer_token", "backend_token")
REDACTED = "***"


class AppConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid", frozen=True)

    # 日志
    log_level: str = Field(default="INFO", alias="VACOT_LOG_LEVEL")

    # 外部服务（URL 可来自配置文件；token 只能来自环境变量）
    backend: Literal["sim", "http"] = "sim"
    backend_url: str = Field(default="", alias="VACOT_BACKEND_URL")
    backend_token: str = Field(default="", alias="VACOT_BACKEND_TOKEN")
    annotator: Literal["sim", "http"] = "sim"
    annotator_url: str = Field(default="", alias="VACOT_ANNOTATOR_URL")
    annotator_token: str = Field(default="", alias="VACOT_ANNOTATOR_TOKEN")
    scorer: Literal["mock", "http"] = "mock"
    scorer_url: str = Field(default="", alias="VACOT_SCORER_URL")
    scorer_token: str = Field(default="", alias="VACOT_SCORER_TOKEN")
    scorer_seed: int = 0
    reward_preset: str = "objsim+clip"

    # 推理引擎 / 模拟后端
    max_iterations: int = Field(default=3, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    sim_dimension: int = Field(default=16, ge=1)
    sim_refinement_rate: float = Field(default=0.5, gt=0.0, le=1.0)
    sim_threshold: float = Field(default=0.9, gt=0.0, lt=1.0)
    sim_noise_scale: float = Field(default=0.5, ge=0.0, allow_inf_nan=False)

    # GRPO 玩具训练
    group_size: int = Field(default=8, ge=2)
    num_steps: int = Field(default=4, ge=1)
    clip_epsilon: float = Field(default=0.2, gt=0.0, allow_inf_nan=False)
    kl_beta: float = Field(default=0.01, ge=0.0, allow_inf_nan=False)
    train_iterations: int = Field(default=200, ge=0)
    conditions_per_iteration: int = Field(default=8, ge=1)
    minibatches: int = Field(default=2, ge=1)
    learning_rate: float = Field(default=0.05, ge=0.0, allow_inf_nan=False)
    step_sigma: float = Field(default=0.2, gt=0.0, allow_inf_nan=False)
    eval_conditions: int = Field(default=32, ge=1)
    train_workers: int = Field(default=1, ge=1)

    # flow matching 预训练
    flow_steps: int = Field(default=3000, ge=0)
    flow_batch_size: int = Field(default=256, ge=1)
    flow_learning_rate: float = Field(default=0.05, ge=0.0, allow_inf_nan=False)

    # 数据集
    perfect_fraction: float = Field(default=0.25, ge=0.0, le=1.0)
    budget: int = Field(default=32000, ge=1)
    image_token_cost: int = Field(default=1024, ge=1)
    dataset_workers: int = Field(default=4, ge=1)
    degrader_strength: float = Field(default=0.6, gt=0.0, le=1.0)
    sample_size: Optional[int] = Field(default=None, ge=0)
    replay_only: bool = False

    # 输出
    out_dir: str = "out"

    def redacted(self) -> Dict[str, Any]:
        doc = self.model_dump()
        for name in SECRET_FIELDS:
            if doc.get(name):
                doc[name] = REDACTED
        return doc


def _env_values(env: Mapping[str, str]) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for name, info in AppConfig.model_fields.items():
        if info.alias and info.alias in env:
            out[name] = env[info.alias]
    return out


def _file_values(path: str | Path) -> Dict[str, Any]:
    p = Path(path)
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read config file {p}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"config file {p} is not valid YAML: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {p} must contain a mapping")
    aliases = {info.alias: name for name, info in AppConfig.model_fields.items() if info.alias}
    out: Dict[str, Any] = {}
    for key, value in data.items():
        name = aliases.get(key, key)
        if name in SECRET_FIELDS:
            raise ConfigError(f"config file {p} must not contain {key!r}; secrets come only from the environment")
        out[name] = value
    return out


def load_config(
    config_path: str | Path | None = None,
    overrides: Optional[Mapping[str, Any]] = None,
    *,
    env: Optional[Mapping[str, str]] = None,
) -> AppConfig:
    """env 为 None 时读取进程环境（先加载工作目录下的 .env，不覆盖已有变量）"""
    if env is None:
        load_dotenv(Path.cwd() / ".env", override=False)
        env = os.environ

    merged: Dict[str, Any] = _env_values(env)
    if config_path is not None:
        merged.update(_file_values(config_path))
    for name, value in (overrides or {}).items():
        if name in SECRET_FIELDS:
            raise ConfigError(f"{name} can only be set through the environment")
        if value is not None:
            merged[name] = value

    try:
        return AppConfig.model_validate(merged)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"]) or "config"
        raise ConfigError(f"invalid config value for {where}: {first['msg']}") from e
