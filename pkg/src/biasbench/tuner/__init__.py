from .features import (
    EXTRACTORS,
    FeatureConfig,
    FeatureVector,
    TileFeatureExtractor,
    extract_features,
    normalize_frame,
    register_extractor,
)
from .expert import (
    Demonstration,
    OptimalRange,
    build_demo_dataset,
    load_demonstrations,
    save_demonstrations,
    scripted_expert,
)
from .policy import BCPolicy, gradient_check, load_policy, policy_act, save_policy, train_bc
from .controller import ControllerAction, RuleControllerConfig, rule_controller_step
from .evaluate import convergence_map, tracker_success_experiment

__all__ = [
    "EXTRACTORS",
    "FeatureConfig",
    "FeatureVector",
    "TileFeatureExtractor",
    "extract_features",
    "normalize_frame",
    "register_extractor",
    "Demonstration",
    "OptimalRange",
    "build_demo_dataset",
    "load_demonstrations",
    "save_demonstrations",
    "scripted_expert",
    "BCPolicy",
    "gradient_check",
    "load_policy",
    "policy_act",
    "save_policy",
    "train_bc",
    "ControllerAction",
    "RuleControllerConfig",
    "rule_controller_step",
    "convergence_map",
    "tracker_success_experiment",
]
