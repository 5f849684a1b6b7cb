"""Confidence-based self-labeling anomaly detection on a small numpy engine."""
from .classifier import ClassifierModel, ClassifierTrainConfig, predict_logits, train_classifier
from .config import ExperimentConfig, ScenarioConfig, mnist_desk_preset, preset_for, synthetic_preset
from .datasets import (
    LabeledDataset, Scenario, ScenarioOracle, ScenarioSpec, build_scenario, load_idx, load_mnist,
)
from .detector import AnomalyScores, DetectorConfig, detect, score
from .evaluation import EvaluationReport, ScoredTestSet, auroc, one_class_baseline
from .features import AutoencoderConfig, AutoencoderModel, encode, train_autoencoder
from .pipeline import CladResult, StageError, load_scenario, run_clad
from .selflabel import ClusterModel, ClusteringConfig, PseudoLabels, cluster

__all__ = [
    "AnomalyScores", "AutoencoderConfig", "AutoencoderModel", "CladResult", "ClassifierModel",
    "ClassifierTrainConfig", "ClusterModel", "ClusteringConfig", "DetectorConfig",
    "EvaluationReport", "ExperimentConfig", "LabeledDataset", "PseudoLabels", "Scenario",
    "ScenarioConfig", "ScenarioOracle", "ScenarioSpec", "ScoredTestSet", "StageError", "auroc",
    "build_scenario", "cluster", "detect", "encode", "load_idx", "load_mnist", "load_scenario",
    "mnist_desk_preset", "one_class_baseline", "predict_logits", "preset_for", "run_clad", "score",
    "synthetic_preset", "train_autoencoder", "train_classifier",
]
