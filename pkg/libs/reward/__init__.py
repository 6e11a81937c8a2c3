from libs.reward.composite import CompositeReward, ItemScore, RewardBreakdown, total_reward, visual_reward
from libs.reward.mock import mock_suite
from libs.reward.similarity import object_similarity, style_similarity
from libs.reward.suite import BoundingBox, RewardWeights, ScorerSuite
from libs.reward.validation import PreferencePair, preference_validation

__all__ = [
    "BoundingBox",
    "CompositeReward",
    "ItemScore",
    "PreferencePair",
    "RewardBreakdown",
    "RewardWeights",
    "ScorerSuite",
    "mock_suite",
    "object_similarity",
    "preference_validation",
    "style_similarity",
    "total_reward",
    "visual_reward",
]
