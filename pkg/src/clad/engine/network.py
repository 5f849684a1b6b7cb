from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import Layer, ShapeError


class CompositionError(ShapeError):
    """An input or layer does not compose with the layer at ``layer_index``."""

    def __init__(self, layer_index: int, message: str):
        super().__init__(f"layer {layer_index}: {message}")
        self.layer_index = layer_index


class StaleTraceError(RuntimeError):
    pass


@dataclass
class Trace:
    """Per-layer caches recorded by :meth:`Network.forward`."""

    network_id: int
    version: int
    caches: list = field(default_factory=list)


class Network:
    """Ordered stack of layers with explicit forward/backward passes.

    ``input_shape`` is the per-sample shape; batches carry a leading sample axis.
    """

    def __init__(self, layers: list[Layer], input_shape, seed: int | None = 0):
        self.layers = list(layers)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.mode = "train"
        self.rng = np.random.default_rng(seed)
        self._version = 0
        self.output_shape = self._check_composition()

    def _check_composition(self) -> tuple:
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            try:
                shape = layer.output_shape(shape)
            except ShapeError as exc:
                raise CompositionError(i, str(exc)) from None
        return tuple(shape)

    def train(self) -> "Network":
        self.mode = "train"
        return self

    def eval(self) -> "Network":
        self.mode = "eval"
        return self

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params.values()]

    def parameter_names(self) -> list[str]:
        return [f"{i}.{name}" for i, layer in enumerate(self.layers) for name in layer.params]

    def mark_updated(self):
        """Invalidate outstanding traces after an in-place parameter change."""
        self._version += 1

    def forward(self, batch: np.ndarray, rng: np.random.Generator | None = None):
        batch = np.asarray(batch, dtype=np.float64)
        if batch.shape[1:] != self.input_shape:
            raise CompositionError(
                0, f"batch sample shape {batch.shape[1:]} != network input {self.input_shape}"
            )
        train = self.mode == "train"
        rng = rng if rng is not None else self.rng
        trace = Trace(id(self), self._version)
        out = batch
        for layer in self.layers:
            out, cache = layer.forward(out, train=train, rng=rng)
            trace.caches.append(cache)
        return out, trace

    def __call__(self, batch: np.ndarray) -> np.ndarray:
        return self.forward(batch)[0]

    def backward(self, trace: Trace, output_gradient: np.ndarray):
        """Return (parameter gradients in ``parameters()`` order, input gradient)."""
        if trace.network_id != id(self) or len(trace.caches) != len(self.layers):
            raise StaleTraceError("trace was produced by a different network")
        if trace.version != self._version:
            raise StaleTraceError("parameters changed since this trace was recorded")
        grad = np.asarray(output_gradient, dtype=np.float64)
        per_layer = []
        for layer, cache in zip(reversed(self.layers), reversed(trace.caches)):
            grads, grad = layer.backward(cache, grad)
            per_layer.append([grads[name] for name in layer.params])
        param_grads = [g for grads in reversed(per_layer) for g in grads]
        return param_grads, grad

    def __repr__(self):
        body = ", ".join(repr(layer) for layer in self.layers)
        return f"Network(input_shape={self.input_shape}, layers=[{body}])"


def forward(net: Network, batch, rng=None):
    return net.forward(batch, rng=rng)


def backward(net: Network, trace: Trace, output_gradient):
    return net.backward(trace, output_gradient)


def predict(net: Network, batch: np.ndarray, batch_size: int = 1024) -> np.ndarray:
    """Eval-mode forward in chunks; restores the previous mode."""
    mode = net.mode
    net.eval()
    try:
        outs = [net.forward(batch[i:i + batch_size])[0] for i in range(0, len(batch), batch_size)]
    finally:
        net.mode = mode
    if not outs:
        return np.empty((0,) + net.output_shape)
    return np.concatenate(outs, axis=0)
