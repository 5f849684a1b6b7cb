"""In-place first-order optimizers.

Accumulators are allocated on the first step and must keep matching the
parameter shapes afterwards.
"""
from __future__ import annotations

import numpy as np


class Optimizer:
    def __init__(self, learning_rate: float):
        if learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        self.learning_rate = float(learning_rate)
        self.step_count = 0
        self.state: list[dict[str, np.ndarray]] | None = None

    def _check(self, parameters, gradients):
        if len(parameters) != len(gradients):
            raise ValueError(f"{len(parameters)} parameters but {len(gradients)} gradients")
        for i, (p, g) in enumerate(zip(parameters, gradients)):
            if p.shape != g.shape:
                raise ValueError(f"parameter {i}: shape {p.shape} != gradient shape {g.shape}")
        if self.state is None:
            self.state = [self._init_state(p) for p in parameters]
        elif len(self.state) != len(parameters):
            raise ValueError("optimizer state was built for a different parameter list")
        for i, (p, st) in enumerate(zip(parameters, self.state)):
            for acc in st.values():
                if acc.shape != p.shape:
                    raise ValueError(f"accumulator {i}: shape {acc.shape} != parameter {p.shape}")

    def _init_state(self, p):
        raise NotImplementedError

    def step(self, parameters: list[np.ndarray], gradients: list[np.ndarray]) -> None:
        self._check(parameters, gradients)
        self.step_count += 1
        for p, g, st in zip(parameters, gradients, self.state):
            self._update(p, g, st)

    def _update(self, p, g, st):
        raise NotImplementedError

    def config(self) -> dict:
        raise NotImplementedError


class SGD(Optimizer):
    """Heavy-ball momentum: ``v <- m*v + g``; ``theta <- theta - lr*v``."""

    def __init__(self, learning_rate: float = 0.01, momentum: float = 0.9):
        super().__init__(learning_rate)
        self.momentum = float(momentum)

    def _init_state(self, p):
        return {"velocity": np.zeros_like(p)}

    def _update(self, p, g, st):
        v = st["velocity"]
        v *= self.momentum
        v += g
        p -= self.learning_rate * v

    def config(self):
        return {"algorithm": "sgd_momentum", "learning_rate": self.learning_rate,
                "momentum": self.momentum}


class Adam(Optimizer):
    def __init__(self, learning_rate: float = 0.001, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        super().__init__(learning_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)

    def _init_state(self, p):
        return {"m": np.zeros_like(p), "v": np.zeros_like(p)}

    def _update(self, p, g, st):
        m, v = st["m"], st["v"]
        m *= self.beta1
        m += (1.0 - self.beta1) * g
        v *= self.beta2
        v += (1.0 - self.beta2) * g * g
        m_hat = m / (1.0 - self.beta1 ** self.step_count)
        v_hat = v / (1.0 - self.beta2 ** self.step_count)
        p -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)

    def config(self):
        return {"algorithm": "adam", "learning_rate": self.learning_rate,
                "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps}


def make_optimizer(algorithm: str, learning_rate: float, momentum: float = 0.9) -> Optimizer:
    if algorithm == "adam":
        return Adam(learning_rate)
    if algorithm in ("sgd", "sgd_momentum"):
        return SGD(learning_rate, momentum)
    raise ValueError(f"unknown optimizer {algorithm!r}")


def optimizer_step(state: Optimizer, parameters, gradients) -> None:
    state.step(parameters, gradients)
