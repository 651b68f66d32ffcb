"""Toy cognition + flow-matching policy with hand-derived gradients."""

from .features import InstructionVocab, PERCEPT_FEATURE_DIM, featurize_percepts, featurize_window
from .losses import component_weight_vector, focal_loss, focal_loss_grad, joint_loss
from .network import ModelDims, PolicyNetwork, euler_sample
from .params import PolicyParams, load_checkpoint, save_checkpoint
from .model import CognitiveFlowPolicy
from .scripted import ScriptedController, scripted_policy
from .training import (
    TrainingData,
    build_training_data,
    three_stage_train,
    train_stage,
)

__all__ = [
    "InstructionVocab", "PERCEPT_FEATURE_DIM", "featurize_percepts",
    "featurize_window", "component_weight_vector", "focal_loss",
    "focal_loss_grad", "joint_loss", "ModelDims", "PolicyNetwork",
    "euler_sample", "PolicyParams", "load_checkpoint", "save_checkpoint",
    "CognitiveFlowPolicy", "ScriptedController", "scripted_policy",
    "TrainingData", "build_training_data", "three_stage_train", "train_stage",
]
