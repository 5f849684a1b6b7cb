"""Losses as callables returning ``(value, output_gradient, extra_param_grads)``.

``extra_param_grads`` lines up with ``loss.params``: trainable tensors owned by
the loss itself (cluster centroids for the KL loss), empty for the others.
"""
from __future__ import annotations

import numpy as np

from .functional import safe_log, softmax_with_temperature


class Loss:
    params: list = []

    def __call__(self, output: np.ndarray):
        raise NotImplementedError


class MSELoss(Loss):
    """Batch mean of per-sample mean squared error."""

    def __init__(self, target):
        self.target = np.asarray(target, dtype=np.float64)
        self.params = []

    def __call__(self, output):
        n = output.shape[0]
        diff = (output - self.target).reshape(n, -1)
        d = diff.shape[1]
        value = float(np.mean(np.mean(diff ** 2, axis=1)))
        grad = (2.0 / (n * d)) * diff
        return value, grad.reshape(output.shape), []


def per_sample_mse(output, target) -> np.ndarray:
    n = output.shape[0]
    return np.mean(((output - target).reshape(n, -1)) ** 2, axis=1)


class CrossEntropyLoss(Loss):
    """Mean negative log-likelihood of integer ``labels`` under softmax(logits)."""

    def __init__(self, labels):
        self.labels = np.asarray(labels, dtype=np.int64)
        self.params = []

    def __call__(self, logits):
        n = logits.shape[0]
        p = softmax_with_temperature(logits, 1.0)
        rows = np.arange(n)
        value = float(-np.mean(safe_log(p[rows, self.labels])))
        grad = p.copy()
        grad[rows, self.labels] -= 1.0
        return value, grad / n, []


def student_t_kernel(z, centroids):
    """Unnormalized Student-t (one degree of freedom) similarities, shape (N, K)."""
    d2 = ((z[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return 1.0 / (1.0 + d2)


class ClusteringKLLoss(Loss):
    """Batch mean of KL(P || Q) where Q is the Student-t soft assignment of the
    network output to ``centroids`` and P is a fixed target distribution.

    The centroids are trainable: their gradient is returned as the extra
    parameter gradient.
    """

    def __init__(self, centroids, target):
        self.centroids = centroids
        self.target = np.asarray(target, dtype=np.float64)
        self.params = [self.centroids]

    def __call__(self, z):
        n = z.shape[0]
        p = self.target
        w = student_t_kernel(z, self.centroids)
        q = w / w.sum(axis=1, keepdims=True)
        pos = p > 0
        value = float(np.sum(p[pos] * (np.log(p[pos]) - np.log(q[pos])))) / n
        # d/dz_i sum_j p_ij log(p_ij/q_ij) = 2 sum_j w_ij (p_ij - q_ij)(z_i - mu_j)
        coef = 2.0 * w * (p - q) / n
        diff = z[:, None, :] - self.centroids[None, :, :]
        grad_z = np.einsum("nk,nkd->nd", coef, diff)
        grad_mu = -np.einsum("nk,nkd->kd", coef, diff)
        return value, grad_z, [grad_mu]
