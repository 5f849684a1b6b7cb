"""Layer vocabulary for the numpy network engine.

Every layer implements ``forward(x, train, rng) -> (out, cache)`` and
``backward(cache, grad_out) -> (param_grads, grad_in)``. Parameters are
float64 arrays held in ``layer.params`` (a dict, insertion ordered) and are
updated in place by the optimizers.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ShapeError(ValueError):
    """Raised when an input does not compose with a layer."""


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}

    def hyperparameters(self) -> dict:
        return {}

    def output_shape(self, input_shape: tuple) -> tuple:
        """Per-sample output shape; raises ShapeError if ``input_shape`` is invalid."""
        return tuple(input_shape)

    def forward(self, x, train=False, rng=None):
        raise NotImplementedError

    def backward(self, cache, grad_out):
        raise NotImplementedError

    def __repr__(self):
        hp = ", ".join(f"{k}={v}" for k, v in self.hyperparameters().items())
        return f"{type(self).__name__}({hp})"


class Dense(Layer):
    """Affine map ``x @ W.T + b`` with ``W`` of shape (out_width, in_width)."""

    kind = "dense"

    def __init__(self, in_width: int, out_width: int, rng=None):
        super().__init__()
        if in_width < 1 or out_width < 1:
            raise ValueError("dense widths must be positive")
        self.in_width = int(in_width)
        self.out_width = int(out_width)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params["weight"] = glorot_uniform(
            rng, (self.out_width, self.in_width), self.in_width, self.out_width
        )
        self.params["bias"] = np.zeros(self.out_width)

    def hyperparameters(self):
        return {"in_width": self.in_width, "out_width": self.out_width}

    def output_shape(self, input_shape):
        if tuple(input_shape) != (self.in_width,):
            raise ShapeError(f"dense expects ({self.in_width},), got {tuple(input_shape)}")
        return (self.out_width,)

    def forward(self, x, train=False, rng=None):
        return x @ self.params["weight"].T + self.params["bias"], x

    def backward(self, x, grad_out):
        grads = {"weight": grad_out.T @ x, "bias": grad_out.sum(axis=0)}
        return grads, grad_out @ self.params["weight"]


class Conv2D(Layer):
    """Valid-padding 2-D convolution on (N, C, H, W) batches.

    Weight shape is (out_channels, in_channels, k, k). No dilation.
    """

    kind = "conv2d"

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 stride: int = 1, rng=None):
        super().__init__()
        if min(in_channels, out_channels, kernel_size, stride) < 1:
            raise ValueError("conv2d hyperparameters must be positive")
        self.in_channels = int(in_channels)
        self.out_channels = int(out_channels)
        self.kernel_size = int(kernel_size)
        self.stride = int(stride)
        rng = rng if rng is not None else np.random.default_rng(0)
        k = self.kernel_size
        self.params["weight"] = glorot_uniform(
            rng,
            (self.out_channels, self.in_channels, k, k),
            self.in_channels * k * k,
            self.out_channels * k * k,
        )
        self.params["bias"] = np.zeros(self.out_channels)

    def hyperparameters(self):
        return {
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel_size": self.kernel_size,
            "stride": self.stride,
        }

    def output_shape(self, input_shape):
        if len(input_shape) != 3 or input_shape[0] != self.in_channels:
            raise ShapeError(
                f"conv2d expects ({self.in_channels}, H, W), got {tuple(input_shape)}"
            )
        _, h, w = input_shape
        k, s = self.kernel_size, self.stride
        if h < k or w < k:
            raise ShapeError(f"conv2d kernel {k} larger than input {h}x{w}")
        return (self.out_channels, (h - k) // s + 1, (w - k) // s + 1)

    def forward(self, x, train=False, rng=None):
        s = self.stride
        # (N, C, Ho, Wo, k, k)
        windows = sliding_window_view(x, (self.kernel_size, self.kernel_size), axis=(2, 3))
        windows = windows[:, :, ::s, ::s]
        out = np.einsum("nchwij,fcij->nfhw", windows, self.params["weight"], optimize=True)
        out += self.params["bias"][None, :, None, None]
        return out, (x.shape, windows)

    def backward(self, cache, grad_out):
        x_shape, windows = cache
        w = self.params["weight"]
        grads = {
            "weight": np.einsum("nfhw,nchwij->fcij", grad_out, windows, optimize=True),
            "bias": grad_out.sum(axis=(0, 2, 3)),
        }
        grad_in = np.zeros(x_shape)
        s, k = self.stride, self.kernel_size
        ho, wo = grad_out.shape[2], grad_out.shape[3]
        for i in range(k):
            for j in range(k):
                grad_in[:, :, i:i + s * (ho - 1) + 1:s, j:j + s * (wo - 1) + 1:s] += np.einsum(
                    "nfhw,fc->nchw", grad_out, w[:, :, i, j], optimize=True
                )
        return grads, grad_in


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, train=False, rng=None):
        mask = x > 0
        return np.where(mask, x, 0.0), mask

    def backward(self, mask, grad_out):
        return {}, np.where(mask, grad_out, 0.0)


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x, train=False, rng=None):
        # split by sign so exp never overflows
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out, out

    def backward(self, out, grad_out):
        return {}, grad_out * out * (1.0 - out)


class Dropout(Layer):
    """Inverted dropout: scaled by 1/keep_prob at train time, identity in eval."""

    kind = "dropout"

    def __init__(self, keep_prob: float = 0.8):
        super().__init__()
        if not 0.0 < keep_prob <= 1.0:
            raise ValueError(f"keep_prob must be in (0, 1], got {keep_prob}")
        self.keep_prob = float(keep_prob)

    def hyperparameters(self):
        return {"keep_prob": self.keep_prob}

    def forward(self, x, train=False, rng=None):
        if not train or self.keep_prob == 1.0:
            return x, None
        if rng is None:
            raise ValueError("dropout in train mode needs a random generator")
        mask = (rng.random(x.shape) < self.keep_prob) / self.keep_prob
        return x * mask, mask

    def backward(self, mask, grad_out):
        if mask is None:
            return {}, grad_out
        return {}, grad_out * mask


class Reshape(Layer):
    """Reshape each sample; ``Reshape((-1,))`` flattens."""

    kind = "reshape"

    def __init__(self, shape):
        super().__init__()
        self.shape = tuple(int(d) for d in shape)

    def hyperparameters(self):
        return {"shape": list(self.shape)}

    def output_shape(self, input_shape):
        size = int(np.prod(input_shape))
        try:
            return np.empty(size, dtype=np.int8).reshape(self.shape).shape
        except ValueError as exc:
            raise ShapeError(f"cannot reshape {tuple(input_shape)} to {self.shape}") from exc

    def forward(self, x, train=False, rng=None):
        return x.reshape((x.shape[0],) + self.shape), x.shape

    def backward(self, in_shape, grad_out):
        return {}, grad_out.reshape(in_shape)


def Flatten() -> Reshape:
    return Reshape((-1,))


LAYER_KINDS = {
    cls.kind: cls for cls in (Dense, Conv2D, ReLU, Sigmoid, Dropout, Reshape)
}


def layer_from_spec(kind: str, hyperparameters: dict) -> Layer:
    try:
        cls = LAYER_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown layer kind {kind!r}") from None
    if kind == "reshape":
        return Reshape(hyperparameters["shape"])
    return cls(**hyperparameters)
