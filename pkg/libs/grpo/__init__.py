from libs.grpo.advantages import clipped_term, group_advantages, step_ratio
from libs.grpo.config import FlowTrainSettings, GrpoConfig, TrainSettings
from libs.grpo.env import ToyFlowEnv
from libs.grpo.flow_matching import FlowToyData, flow_matching_loss, train_flow_toy
from libs.grpo.objective import grpo_objective, grpo_objective_and_grad, gradient_check
from libs.grpo.optim import Adam
from libs.grpo.policy import GaussianStepPolicy, LinearVelocityField, Trajectory, TrajectoryGroup, gaussian_kl
from libs.grpo.trainer import TrainingReport, train_toy

__all__ = [
    "Adam",
    "FlowToyData",
    "FlowTrainSettings",
    "GaussianStepPolicy",
    "GrpoConfig",
    "LinearVelocityField",
    "ToyFlowEnv",
    "TrainSettings",
    "TrainingReport",
    "Trajectory",
    "TrajectoryGroup",
    "clipped_term",
    "flow_matching_loss",
    "gaussian_kl",
    "gradient_check",
    "group_advantages",
    "grpo_objective",
    "grpo_objective_and_grad",
    "step_ratio",
    "train_flow_toy",
    "train_toy",
]
