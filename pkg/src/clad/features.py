"""Autoencoder feature extraction: train E and D on reconstruction, encode with E."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .engine import (
    Conv2D, Dense, Dropout, Flatten, MSELoss, Network, ReLU, Reshape, Sigmoid, make_optimizer,
    predict,
)
from .engine.losses import per_sample_mse

logger = logging.getLogger(__name__)


@dataclass
class AutoencoderConfig:
    hidden_dim: int = 100
    hidden_widths: tuple = (256,)
    preset: str = "mlp"
    epochs: int = 100
    batch_size: int = 64
    optimizer: str = "adam"
    learning_rate: float = 0.01
    keep_prob: float = 0.8
    sigmoid_output: bool = True
    seed: int = 0

    def __post_init__(self):
        self.hidden_widths = tuple(int(w) for w in self.hidden_widths)
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.preset not in ("mlp", "conv"):
            raise ValueError(f"unknown autoencoder preset {self.preset!r}")

    def to_dict(self):
        d = asdict(self)
        d["hidden_widths"] = list(self.hidden_widths)
        return d


@dataclass(frozen=True)
class InputScaler:
    """Global min-max scaling fitted on training data: ``(x - lo) / (hi - lo)``."""

    lo: float = 0.0
    hi: float = 1.0

    @classmethod
    def fit(cls, x) -> "InputScaler":
        lo, hi = float(np.min(x)), float(np.max(x))
        if hi <= lo:
            hi = lo + 1.0
        return cls(lo, hi)

    @property
    def scale(self) -> float:
        return self.hi - self.lo

    def transform(self, x):
        if self.lo == 0.0 and self.hi == 1.0:
            return np.asarray(x, dtype=np.float64)
        return (np.asarray(x, dtype=np.float64) - self.lo) / self.scale

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi}


@dataclass
class AutoencoderModel:
    encoder: Network
    decoder: Network
    scaler: InputScaler
    loss_history: list = field(default_factory=list)

    @property
    def hidden_dim(self) -> int:
        return self.encoder.output_shape[0]

    @property
    def sample_shape(self) -> tuple:
        return self.encoder.input_shape


def build_encoder(sample_shape, cfg: AutoencoderConfig, rng) -> Network:
    """Dropout follows each hidden layer of the encoder."""
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
        for out_ch in (8, 16):
            layers += [Conv2D(channels, out_ch, 3, stride=2, rng=rng), ReLU(),
                       Dropout(cfg.keep_prob)]
            channels = out_ch
        layers.append(Flatten())
        width = Network(layers, sample_shape).output_shape[0]
    else:
        if len(sample_shape) > 1:
            layers.append(Flatten())
        width = int(np.prod(sample_shape))
        for w in cfg.hidden_widths:
            layers += [Dense(width, w, rng), ReLU(), Dropout(cfg.keep_prob)]
            width = w
    layers.append(Dense(width, cfg.hidden_dim, rng))
    return Network(layers, sample_shape, seed=int(rng.integers(2**31)))


def build_decoder(sample_shape, cfg: AutoencoderConfig, rng) -> Network:
    sample_shape = tuple(sample_shape)
    size = int(np.prod(sample_shape))
    layers = []
    width = cfg.hidden_dim
    for w in reversed(cfg.hidden_widths):
        layers += [Dense(width, w, rng), ReLU()]
        width = w
    layers.append(Dense(width, size, rng))
    if cfg.sigmoid_output:
        layers.append(Sigmoid())
    if len(sample_shape) > 1:
        layers.append(Reshape(sample_shape))
    return Network(layers, (cfg.hidden_dim,), seed=int(rng.integers(2**31)))


def _check_samples(x_train) -> np.ndarray:
    x = np.asarray(x_train, dtype=np.float64)
    if x.ndim < 2 or x.shape[0] == 0:
        raise ValueError("training set is empty")
    return x


def reconstruction_loss(model: AutoencoderModel, x) -> np.ndarray:
    """Per-sample MSE of the eval-mode reconstruction (in scaled units)."""
    xs = model.scaler.transform(x)
    recon = predict(model.decoder, predict(model.encoder, xs))
    return per_sample_mse(recon, xs)


def _eval_loss(encoder, decoder, xs) -> float:
    recon = predict(decoder, predict(encoder, xs))
    return float(np.mean(per_sample_mse(recon, xs)))


def train_autoencoder(x_train, cfg: AutoencoderConfig | None = None) -> AutoencoderModel:
    """Minimize reconstruction MSE of the scaled inputs with minibatch training.

    ``loss_history[e]`` is the mean per-sample MSE over the whole training set,
    measured in eval mode (no dropout) at the end of epoch ``e``.
    """
    cfg = cfg or AutoencoderConfig()
    x = _check_samples(x_train)
    if not np.all(np.isfinite(x)):
        raise ValueError("training samples contain non-finite values")
    scaler = InputScaler.fit(x)
    xs = scaler.transform(x)
    rng = np.random.default_rng(cfg.seed)
    encoder = build_encoder(xs.shape[1:], cfg, rng)
    decoder = build_decoder(xs.shape[1:], cfg, rng)
    opt = make_optimizer(cfg.optimizer, cfg.learning_rate)
    params = encoder.parameters() + decoder.parameters()
    encoder.train()
    decoder.train()
    history = []
    n = xs.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = xs[order[start:start + cfg.batch_size]]
            z, enc_trace = encoder.forward(batch)
            recon, dec_trace = decoder.forward(z)
            _, grad, _ = MSELoss(batch)(recon)
            dec_grads, grad_z = decoder.backward(dec_trace, grad)
            enc_grads, _ = encoder.backward(enc_trace, grad_z)
            opt.step(params, enc_grads + dec_grads)
            encoder.mark_updated()
            decoder.mark_updated()
        history.append(_eval_loss(encoder, decoder, xs))
        if (epoch + 1) % 10 == 0 or epoch == 0:
            logger.debug("autoencoder epoch %d loss %.6f", epoch + 1, history[-1])
    encoder.eval()
    decoder.eval()
    return AutoencoderModel(encoder, decoder, scaler, history)


def encode(model: AutoencoderModel, x) -> np.ndarray:
    """Latent features of one sample ``(*shape)`` or a batch ``(N, *shape)``."""
    x = np.asarray(x, dtype=np.float64)
    shape = model.sample_shape
    single = x.shape == shape
    if single:
        x = x[None]
    elif x.shape[1:] != shape:
        raise ValueError(f"sample shape {x.shape[1:] or x.shape} != model input {shape}")
    z = predict(model.encoder, model.scaler.transform(x))
    return z[0] if single else z
