from __future__ import annotations

import numpy as np

from .losses import Loss
from .network import Network

_RNG_SEED = 12345


def _relative_error(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def grad_check(net: Network, loss: Loss, batch, fd_step: float = 1e-6) -> float:
    """Worst elementwise relative error between analytic and central-difference
    gradients, over every network parameter, every loss parameter and the input.

    Dropout masks are frozen by replaying the same generator seed on every
    evaluation, so train-mode networks are checked too.
    """
    if not fd_step > 0:
        raise ValueError("fd_step must be positive")
    batch = np.array(batch, dtype=np.float64)

    def evaluate(x):
        out, _ = net.forward(x, rng=np.random.default_rng(_RNG_SEED))
        return loss(out)[0]

    out, trace = net.forward(batch, rng=np.random.default_rng(_RNG_SEED))
    _, grad_out, loss_param_grads = loss(out)
    param_grads, input_grad = net.backward(trace, grad_out)

    targets = list(zip(net.parameters(), param_grads))
    targets += list(zip(loss.params, loss_param_grads))
    targets.append((batch, input_grad))

    worst = 0.0
    for tensor, analytic in targets:
        numeric = np.zeros_like(tensor)
        flat = tensor.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + fd_step
            plus = evaluate(batch)
            flat[i] = orig - fd_step
            minus = evaluate(batch)
            flat[i] = orig
            numeric.reshape(-1)[i] = (plus - minus) / (2.0 * fd_step)
        worst = max(worst, _relative_error(analytic, numeric))
    return worst
