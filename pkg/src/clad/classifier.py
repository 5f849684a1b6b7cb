"""Supervised classifier trained on pseudo-labels."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .engine import (
    Conv2D, CrossEntropyLoss, Dense, Dropout, Flatten, Network, ReLU, Reshape, make_optimizer, predict,
)
from .features import InputScaler
from .selflabel import PseudoLabels


@dataclass
class ClassifierTrainConfig:
    preset: str = "mlp"
    hidden_widths: tuple = (256, 128)
    epochs: int = 100
    batch_size: int = 64
    optimizer: str = "adam"
    learning_rate: float = 0.0001
    keep_prob: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.hidden_widths = tuple(int(w) for w in self.hidden_widths)
        if not 0.0 < self.keep_prob <= 1.0:
            raise ValueError("keep_prob must lie in (0, 1]")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.preset not in ("mlp", "conv"):
            raise ValueError(f"unknown classifier preset {self.preset!r}")

    def to_dict(self):
        d = asdict(self)
        d["hidden_widths"] = list(self.hidden_widths)
        return d


@dataclass
class ClassifierModel:
    net: Network
    n_classes: int
    scaler: InputScaler
    accuracy_history: list = field(default_factory=list)

    @property
    def sample_shape(self) -> tuple:
        return self.net.input_shape


def build_classifier(sample_shape, n_classes: int, cfg: ClassifierTrainConfig, rng) -> Network:
    sample_shape = tuple(sample_shape)
    layers = []
    if cfg.preset == "conv":
        if len(sample_shape) == 2:
            layers.append(Reshape((1,) + sample_shape))
            channels = 1
        elif len(sample_shape) == 3:
            channels = sample_shape[0]
        else:
            raise ValueError(f"conv preset needs image samples, got shape {sample_shape}")
        layers += [Conv2D(channels, 8, 3, stride=1, rng=rng), ReLU(),
                   Conv2D(8, 16, 3, stride=2, rng=rng), ReLU(), Flatten()]
        width = Network(layers, sample_shape).output_shape[0]
        layers += [Dense(width, 64, rng), ReLU()]
        width = 64
    else:
        if len(sample_shape) > 1:
            layers.append(Flatten())
        width = int(np.prod(sample_shape))
        for w in cfg.hidden_widths:
            layers += [Dense(width, w, rng), ReLU()]
            if cfg.keep_prob < 1.0:
                layers.append(Dropout(cfg.keep_prob))
            width = w
    layers.append(Dense(width, n_classes, rng))
    return Network(layers, sample_shape, seed=int(rng.integers(2**31)))


def _accuracy(net, xs, labels) -> float:
    return float(np.mean(predict(net, xs).argmax(1) == labels))


def train_classifier(x_train, pseudo_labels: PseudoLabels, cfg: ClassifierTrainConfig | None = None,
                     scaler: InputScaler | None = None) -> ClassifierModel:
    """Minimize cross-entropy on (x, pseudo-label) pairs.

    ``scaler`` should be the autoencoder's input scaling so both networks see
    the same preprocessing; it is refitted on ``x_train`` when omitted.
    ``accuracy_history[e]`` is the eval-mode training accuracy after epoch ``e``.
    """
    cfg = cfg or ClassifierTrainConfig()
    x = np.asarray(x_train, dtype=np.float64)
    labels = pseudo_labels.labels
    if x.shape[0] != labels.shape[0]:
        raise ValueError(f"{x.shape[0]} samples but {labels.shape[0]} pseudo-labels")
    if np.unique(labels).size < 2:
        raise ValueError(
            "pseudo-labels contain a single class; raise the cluster count or inspect the clustering"
        )
    scaler = scaler or InputScaler.fit(x)
    xs = scaler.transform(x)
    rng = np.random.default_rng(cfg.seed)
    net = build_classifier(xs.shape[1:], pseudo_labels.n_labels, cfg, rng).train()
    opt = make_optimizer(cfg.optimizer, cfg.learning_rate)
    params = net.parameters()
    history = []
    n = xs.shape[0]
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            logits, trace = net.forward(xs[idx])
            _, grad, _ = CrossEntropyLoss(labels[idx])(logits)
            grads, _ = net.backward(trace, grad)
            opt.step(params, grads)
            net.mark_updated()
        history.append(_accuracy(net, xs, labels))
    net.eval()
    return ClassifierModel(net, pseudo_labels.n_labels, scaler, history)


def predict_logits(model: ClassifierModel, x) -> np.ndarray:
    """Raw logits for one sample (length L) or a batch (N, L)."""
    x = np.asarray(x, dtype=np.float64)
    shape = model.sample_shape
    single = x.shape == shape
    if single:
        x = x[None]
    elif x.shape[1:] != shape:
        raise ValueError(f"sample shape {x.shape[1:] or x.shape} != model input {shape}")
    logits = predict(model.net, model.scaler.transform(x))
    return logits[0] if single else logits
