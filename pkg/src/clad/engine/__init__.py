"""Small double-precision network engine with explicit backpropagation."""
from .functional import softmax_with_temperature
from .gradcheck import grad_check
from .layers import Conv2D, Dense, Dropout, Flatten, Layer, ReLU, Reshape, ShapeError, Sigmoid
from .losses import ClusteringKLLoss, CrossEntropyLoss, MSELoss
from .network import CompositionError, Network, StaleTraceError, Trace, backward, forward, predict
from .optim import SGD, Adam, Optimizer, make_optimizer, optimizer_step
from .serialize import load_bundle, load_network, save_bundle, save_network

__all__ = [
    "Adam", "ClusteringKLLoss", "CompositionError", "Conv2D", "CrossEntropyLoss", "Dense",
    "Dropout", "Flatten", "Layer", "MSELoss", "Network", "Optimizer", "ReLU", "Reshape", "SGD",
    "ShapeError", "Sigmoid", "StaleTraceError", "Trace", "backward", "forward", "grad_check",
    "load_bundle", "load_network", "make_optimizer", "optimizer_step", "predict", "save_bundle",
    "save_network", "softmax_with_temperature",
]
