"""Confidence-based anomaly scoring with temperature scaling and input perturbation.

The score of ``x`` is the largest temperature-scaled softmax probability of
the classifier on a perturbed input ``x_tilde``. ``x_tilde`` moves each input
coordinate by ``epsilon`` in the direction that raises the log-probability
of the predicted class, then is clamped to the valid input range.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass

import numpy as np

from .classifier import ClassifierModel, predict_logits
from .engine import softmax_with_temperature


@dataclass
class DetectorConfig:
    temperature: float = 1000.0
    epsilon: float = 0.0014
    threshold: float = 0.5
    clip_lo: float | None = 0.0
    clip_hi: float | None = 1.0
    batch_size: int = 1024

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")

    def to_dict(self):
        return asdict(self)


@dataclass
class AnomalyScores:
    """Per-sample confidence ``s``, predicted pseudo-class and perturbation flag."""

    s: np.ndarray
    y_hat: np.ndarray
    perturbed: bool

    def __len__(self):
        return self.s.shape[0]

    @property
    def evidence(self) -> np.ndarray:
        return 1.0 - self.s


def _as_batch(model: ClassifierModel, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.shape == model.sample_shape
    if single:
        x = x[None]
    elif x.shape[1:] != model.sample_shape:
        raise ValueError(f"sample shape {x.shape[1:] or x.shape} != model input {model.sample_shape}")
    return x, single


def log_prob_input_gradient(model: ClassifierModel, x, temperature: float) -> np.ndarray:
    """Gradient of ``log softmax(F(x)/T)[y_hat]`` w.r.t. the raw input batch."""
    net = model.net
    mode = net.mode
    net.eval()
    try:
        logits, trace = net.forward(model.scaler.transform(x))
        p = softmax_with_temperature(logits, temperature)
        onehot = np.zeros_like(p)
        onehot[np.arange(p.shape[0]), p.argmax(1)] = 1.0
        _, grad_scaled = net.backward(trace, (onehot - p) / temperature)
    finally:
        net.mode = mode
    return grad_scaled / model.scaler.scale


def perturb_input(model: ClassifierModel, x, cfg: DetectorConfig) -> np.ndarray:
    """``x - eps * sign(-grad log p_yhat(x; T))``, clamped to ``[clip_lo, clip_hi]``."""
    x, single = _as_batch(model, x)
    if cfg.epsilon == 0:
        out = x.copy()
    else:
        parts = []
        for start in range(0, x.shape[0], cfg.batch_size):
            xb = x[start:start + cfg.batch_size]
            grad = log_prob_input_gradient(model, xb, cfg.temperature)
            parts.append(xb - cfg.epsilon * np.sign(-grad))
        out = np.concatenate(parts)
        if cfg.clip_lo is not None or cfg.clip_hi is not None:
            out = np.clip(out, cfg.clip_lo, cfg.clip_hi)
    return out[0] if single else out


def score(model: ClassifierModel, x, cfg: DetectorConfig) -> AnomalyScores:
    x, _ = _as_batch(model, x)
    x_tilde = perturb_input(model, x, cfg)
    p = softmax_with_temperature(predict_logits(model, x_tilde), cfg.temperature)
    return AnomalyScores(p.max(1), p.argmax(1), cfg.epsilon > 0)


def detect(s, threshold: float):
    """0 (normal) where ``s > threshold``, else 1 (abnormal)."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    s = np.asarray(s)
    return np.where(s > threshold, 0, 1) if s.ndim else int(not s > threshold)


def write_scores_csv(path, scores: AnomalyScores, y_true) -> None:
    """Columns: sample_index, s, y_hat, true_binary_label. Floats use repr for exact round-trip."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_index", "s", "y_hat", "true_binary_label"])
        for i, (s, y_hat, y) in enumerate(zip(scores.s, scores.y_hat, y_true)):
            writer.writerow([i, repr(float(s)), int(y_hat), int(y)])


def read_scores_csv(path) -> tuple[AnomalyScores, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no score rows")
    s = np.array([float(r["s"]) for r in rows])
    y_hat = np.array([int(r["y_hat"]) for r in rows])
    y = np.array([int(r["true_binary_label"]) for r in rows])
    return AnomalyScores(s, y_hat, False), y


def grid_search(model: ClassifierModel, x, y, temperatures, epsilons,
                base: DetectorConfig | None = None):
    """Pick (T, eps) maximizing AUROC on a labeled validation set.

    Returns ``(best_config, table)`` with one ``(T, eps, auroc)`` row per setting.
    """
    from .evaluation import ScoredTestSet, auroc

    base = base or DetectorConfig()
    table = []
    best = None
    for t in temperatures:
        for eps in epsilons:
            cfg = DetectorConfig(**{**base.to_dict(), "temperature": t, "epsilon": eps})
            value = auroc(ScoredTestSet.from_scores(score(model, x, cfg), y))
            table.append((t, eps, value))
            if best is None or value > best[1]:
                best = (cfg, value)
    return best[0], table
