"""Self-labeling by deep embedded clustering.

Centroids are initialized by k-means on the latent features, then refined
jointly with the encoder by minimizing KL(P || Q), where Q is the Student-t
soft assignment and P the sharpened target distribution. Pseudo-labels are the
argmax of Q (0-based cluster indices).
"""
from __future__ import annotations

import copy
import csv
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .engine import ClusteringKLLoss, SGD, predict
from .engine.losses import student_t_kernel
from .features import AutoencoderModel, encode

logger = logging.getLogger(__name__)

DISTINCT_TOL = 1e-9


@dataclass
class ClusterModel:
    centroids: np.ndarray

    def __post_init__(self):
        c = np.array(self.centroids, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] < 2:
            raise ValueError(f"need at least 2 centroids, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("centroids must be finite")
        d = np.sqrt(((c[:, None] - c[None]) ** 2).sum(-1))
        d[np.diag_indices_from(d)] = np.inf
        if d.min() <= DISTINCT_TOL:
            raise ValueError("centroids must be pairwise distinct")
        self.centroids = c

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]


@dataclass
class ClusteringConfig:
    n_clusters: int = 10
    n_init: int = 20
    kmeans_max_iter: int = 300
    epochs: int = 100
    batch_size: int = 256
    learning_rate: float = 0.01
    momentum: float = 0.9
    target_update: str = "epoch"
    seed: int = 0

    def __post_init__(self):
        if self.n_clusters < 2:
            raise ValueError("n_clusters must be at least 2")
        if self.target_update not in ("epoch", "batch"):
            raise ValueError("target_update must be 'epoch' or 'batch'")

    def to_dict(self):
        return asdict(self)


@dataclass
class PseudoLabels:
    labels: np.ndarray
    n_labels: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_labels):
            raise ValueError("pseudo-label out of range")

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_labels)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["sample_index", "pseudo_label"])
            for i, y in enumerate(self.labels):
                writer.writerow([i, int(y)])

    @classmethod
    def from_csv(cls, path, n_labels: int) -> "PseudoLabels":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(np.array([int(r["pseudo_label"]) for r in rows], dtype=np.int64), n_labels)


# -- k-means ---------------------------------------------------------------------

def _sq_dists(x, c):
    return np.maximum((x * x).sum(1)[:, None] - 2.0 * x @ c.T + (c * c).sum(1)[None, :], 0.0)


def _kmeans_pp(x, k, rng):
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = _sq_dists(x, centers[:1])[:, 0]
    for i in range(1, k):
        total = closest.sum()
        if total <= 0:
            # every point coincides with a chosen center
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=closest / total)
        centers[i] = x[idx]
        closest = np.minimum(closest, _sq_dists(x, centers[i:i + 1])[:, 0])
    return centers


def _lloyd(x, centers, max_iter):
    k = centers.shape[0]
    for _ in range(max_iter):
        d = _sq_dists(x, centers)
        labels = d.argmin(1)
        new = np.empty_like(centers)
        counts = np.bincount(labels, minlength=k)
        spread = d[np.arange(len(x)), labels]
        for j in range(k):
            if counts[j]:
                new[j] = x[labels == j].mean(0)
            else:
                # refill from the point farthest from its center
                far = spread.argmax()
                new[j] = x[far]
                spread[far] = -1.0
        if np.array_equal(new, centers):
            break
        centers = new
    d = _sq_dists(x, centers)
    return centers, d.min(1).sum()


def kmeans(x, n_clusters: int, n_init: int = 20, max_iter: int = 300, seed=0):
    """Lloyd's algorithm from k-means++ seeds; best inertia over ``n_init`` restarts."""
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(seed)
    best, best_inertia = None, np.inf
    for _ in range(n_init):
        centers, inertia = _lloyd(x, _kmeans_pp(x, n_clusters, rng), max_iter)
        if inertia < best_inertia:
            best, best_inertia = centers, inertia
    return best, best_inertia


def init_centroids(z, n_clusters: int, seed=0, n_init: int = 20, max_iter: int = 300) -> ClusterModel:
    z = np.asarray(z, dtype=np.float64)
    if n_clusters < 2:
        raise ValueError("n_clusters must be at least 2")
    if z.shape[0] < n_clusters:
        raise ValueError(f"{z.shape[0]} samples cannot seed {n_clusters} clusters")
    if np.unique(z, axis=0).shape[0] < n_clusters:
        raise ValueError(f"fewer than {n_clusters} distinct points")
    centers, _ = kmeans(z, n_clusters, n_init=n_init, max_iter=max_iter, seed=seed)
    return ClusterModel(centers)


# -- soft assignment and KL objective ---------------------------------------------

def soft_assign(z, model: ClusterModel) -> np.ndarray:
    """Student-t soft assignment; a single vector gives one row, a batch gives (N, K)."""
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    z2 = z[None] if single else z
    if z2.shape[1] != model.centroids.shape[1]:
        raise ValueError(f"feature length {z2.shape[1]} != centroid length {model.centroids.shape[1]}")
    q = _soft_assign(z2, model.centroids)
    return q[0] if single else q


def _soft_assign(z, centroids):
    w = student_t_kernel(z, centroids)
    return w / w.sum(1, keepdims=True)


def target_distribution(q) -> np.ndarray:
    """p_ij = (q_ij^2 / f_j) / sum_j' (q_ij'^2 / f_j'), with f_j = sum_i q_ij."""
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    weight = q ** 2 / q.sum(0)
    return weight / weight.sum(1, keepdims=True)


def kl_loss(p, q) -> float:
    """sum_ij p_ij log(p_ij / q_ij), with 0 log 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {q.shape}")
    pos = p > 0
    return float(np.sum(p[pos] * (np.log(p[pos]) - np.log(q[pos]))))


# -- refinement ------------------------------------------------------------------

@dataclass
class RefineResult:
    autoencoder: AutoencoderModel
    clusters: ClusterModel
    kl_history: list = field(default_factory=list)
    reseeded: list = field(default_factory=list)


def _reseed_empty(z, q, centroids, epoch, reseeded):
    hard = q.argmax(1)
    counts = np.bincount(hard, minlength=centroids.shape[0])
    empty = np.flatnonzero(counts == 0)
    if empty.size == 0:
        return False
    order = np.argsort(q.max(1), kind="stable")
    for j, i in zip(empty, order):
        centroids[j] = z[i]
        reseeded.append((epoch, int(j), int(i)))
        logger.info("epoch %d: cluster %d empty, reseeded at sample %d", epoch, j, i)
    return True


def refine(ae: AutoencoderModel, model: ClusterModel, x_train,
           cfg: ClusteringConfig | None = None) -> RefineResult:
    """Jointly fine-tune the encoder and the centroids on the KL clustering loss.

    Inputs are left untouched; the result holds copies. ``kl_history[0]`` is the
    mean per-sample KL before training, ``kl_history[e]`` the value at the start
    of epoch ``e`` (after the target refresh), and the last entry the value after
    the final epoch. The encoder runs without dropout.
    """
    cfg = cfg or ClusteringConfig(n_clusters=model.n_clusters)
    x = np.asarray(x_train, dtype=np.float64)
    if x.ndim < 2 or x.shape[0] == 0:
        raise ValueError("training set is empty")
    xs = ae.scaler.transform(x)
    encoder = copy.deepcopy(ae.encoder).eval()
    centroids = model.centroids.copy()
    rng = np.random.default_rng(cfg.seed)
    opt = SGD(cfg.learning_rate, cfg.momentum)
    params = encoder.parameters() + [centroids]
    n = xs.shape[0]
    history, reseeded = [], []

    def full_q():
        z = predict(encoder, xs)
        return z, _soft_assign(z, centroids)

    for epoch in range(cfg.epochs):
        z, q = full_q()
        if epoch > 0 and _reseed_empty(z, q, centroids, epoch, reseeded):
            z, q = full_q()
        p = target_distribution(q)
        history.append(kl_loss(p, q) / n)
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if cfg.target_update == "batch":
                p = target_distribution(full_q()[1])
            out, trace = encoder.forward(xs[idx])
            loss = ClusteringKLLoss(centroids, p[idx])
            _, grad_z, (grad_mu,) = loss(out)
            enc_grads, _ = encoder.backward(trace, grad_z)
            opt.step(params, enc_grads + [grad_mu])
            encoder.mark_updated()
    z, q = full_q()
    history.append(kl_loss(target_distribution(q), q) / n)
    refined = AutoencoderModel(encoder, ae.decoder, ae.scaler, list(ae.loss_history))
    return RefineResult(refined, ClusterModel(centroids), history, reseeded)


def assign_pseudo_labels(ae: AutoencoderModel, model: ClusterModel, x_train) -> PseudoLabels:
    """Hard labels ``argmax_j q_ij``; ties go to the lowest cluster index."""
    q = soft_assign(encode(ae, np.asarray(x_train, dtype=np.float64)), model)
    return PseudoLabels(q.argmax(1), model.n_clusters)


def cluster(ae: AutoencoderModel, x_train, cfg: ClusteringConfig | None = None):
    """k-means initialization, KL refinement and labeling in one call."""
    cfg = cfg or ClusteringConfig()
    z = encode(ae, np.asarray(x_train, dtype=np.float64))
    init = init_centroids(z, cfg.n_clusters, seed=cfg.seed, n_init=cfg.n_init,
                          max_iter=cfg.kmeans_max_iter)
    result = refine(ae, init, x_train, cfg)
    labels = assign_pseudo_labels(result.autoencoder, result.clusters, x_train)
    return result, labels
