"""AUROC, threshold sweeps, the single-centroid baseline and ablation sweeps.

Anomaly evidence is oriented so that larger means more abnormal; for the
confidence detector it is ``a = 1 - s``.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .detector import AnomalyScores, detect
from .features import AutoencoderModel, encode

REPORT_SCHEMA_VERSION = 1
EVIDENCE_ORIENTATION = "evidence = 1 - s; larger evidence = more abnormal; label 1 = abnormal"


@dataclass
class ScoredTestSet:
    evidence: np.ndarray
    labels: np.ndarray
    scores: np.ndarray | None = None

    def __post_init__(self):
        self.evidence = np.asarray(self.evidence, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.evidence.shape != self.labels.shape or self.evidence.ndim != 1:
            raise ValueError("evidence and labels must be aligned 1-D arrays")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0 (normal) or 1 (abnormal)")

    @classmethod
    def from_scores(cls, scores: AnomalyScores | np.ndarray, labels) -> "ScoredTestSet":
        s = scores.s if isinstance(scores, AnomalyScores) else np.asarray(scores, dtype=np.float64)
        return cls(1.0 - s, labels, s)

    def has_both_classes(self) -> bool:
        return 0 < self.labels.sum() < self.labels.size


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks, ties sharing the mean of the ranks they span."""
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    boundaries = np.flatnonzero(np.diff(sorted_vals)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [values.size]))
    # mean of ranks start+1 .. end
    group_rank = (starts + 1 + ends) / 2.0
    ranks = np.empty(values.size)
    ranks[order] = np.repeat(group_rank, ends - starts)
    return ranks


def auroc(scored: ScoredTestSet) -> float:
    """P(a_abnormal > a_normal) + 0.5 P(tie), via the rank-sum statistic in O(n log n)."""
    if not scored.has_both_classes():
        raise ValueError("AUROC needs at least one normal and one abnormal sample")
    pos = scored.labels == 1
    n_pos = int(pos.sum())
    n_neg = scored.labels.size - n_pos
    ranks = _average_ranks(scored.evidence)
    # rank sums are integers or half-integers, so this is exact before the division
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class ThresholdSweep:
    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray
    accuracy: np.ndarray
    best_threshold: float

    def rows(self):
        return list(zip(self.thresholds.tolist(), self.tpr.tolist(), self.fpr.tolist(),
                        self.accuracy.tolist()))


def threshold_sweep(scored: ScoredTestSet, grid) -> ThresholdSweep:
    """Hard-decision rates at each confidence threshold delta.

    A sample is flagged abnormal when ``s <= delta``; TPR is the flagged share of
    abnormal samples, FPR the flagged share of normal ones. ``best_threshold``
    maximizes Youden's J = TPR - FPR (first maximum in sorted order).
    """
    grid = np.sort(np.asarray(list(grid), dtype=np.float64))
    if grid.size == 0:
        raise ValueError("threshold grid is empty")
    if scored.scores is None:
        raise ValueError("threshold sweep needs confidence scores")
    if not scored.has_both_classes():
        raise ValueError("threshold sweep needs both classes")
    abnormal = scored.labels == 1
    tpr, fpr, acc = [], [], []
    for delta in grid:
        flagged = detect(scored.scores, float(delta)) == 1
        tpr.append(flagged[abnormal].mean())
        fpr.append(flagged[~abnormal].mean())
        acc.append(np.mean(flagged == abnormal))
    tpr, fpr, acc = np.array(tpr), np.array(fpr), np.array(acc)
    best = float(grid[np.argmax(tpr - fpr)])
    return ThresholdSweep(grid, tpr, fpr, acc, best)


def one_class_baseline(ae: AutoencoderModel, x_train, x_test, y_test) -> ScoredTestSet:
    """Distance of each encoded test sample to the mean encoded training sample."""
    center = encode(ae, np.asarray(x_train)).mean(axis=0)
    z = encode(ae, np.asarray(x_test))
    return ScoredTestSet(np.sqrt(((z - center) ** 2).sum(axis=1)), y_test)


def score_histograms(scored: ScoredTestSet, bins: int = 20) -> dict:
    edges = np.histogram_bin_edges(scored.evidence, bins=bins)
    out = {"bin_edges": edges.tolist()}
    for label, name in ((0, "normal"), (1, "abnormal")):
        counts, _ = np.histogram(scored.evidence[scored.labels == label], bins=edges)
        out[name] = counts.tolist()
    return out


@dataclass
class EvaluationReport:
    auroc: float
    histograms: dict
    config: dict
    runtime_seconds: float
    composition: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    schema_version: int = REPORT_SCHEMA_VERSION
    orientation: str = EVIDENCE_ORIENTATION

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "EvaluationReport":
        with open(path) as fh:
            data = json.load(fh)
        if data.get("schema_version") != REPORT_SCHEMA_VERSION:
            raise ValueError(f"{path}: unsupported report schema {data.get('schema_version')}")
        return cls(**data)


def evaluate(scored: ScoredTestSet, config: dict, runtime_seconds: float = 0.0,
             composition: dict | None = None, extra: dict | None = None) -> EvaluationReport:
    return EvaluationReport(auroc(scored), score_histograms(scored), config, runtime_seconds,
                            composition or {}, extra or {})


@dataclass
class AblationRow:
    n_clusters: int
    hidden_dim: int
    auroc: float
    runtime_seconds: float


ABLATION_COLUMNS = ("n_clusters", "hidden_dim", "auroc", "runtime_seconds")


def ablation_sweep(scenario, cluster_counts, hidden_dims, base_cfg, completed=None,
                   on_row=None, settings=None) -> list[AblationRow]:
    """Run the full pipeline once per (cluster count, hidden dim) pair.

    The pairs are the Cartesian product of ``cluster_counts`` and ``hidden_dims``
    unless ``settings`` lists them explicitly. ``completed`` maps already-finished
    ``(K, hidden_dim)`` pairs to their rows, which are reused instead of rerun;
    ``on_row`` is called after each new row. Settings sharing a hidden size
    share one trained autoencoder, since extraction does not depend on K.
    """
    from .pipeline import run_clad, stage_extract

    completed = dict(completed or {})
    if settings is None:
        settings = [(k, dim) for k in cluster_counts for dim in hidden_dims]
    rows = []
    extractors = {}
    for k, dim in settings:
        key = (int(k), int(dim))
        if key in completed:
            rows.append(completed[key])
            continue
        cfg = base_cfg.with_overrides(n_clusters=key[0], hidden_dim=key[1])
        start = time.perf_counter()
        if key[1] not in extractors:
            extractors = {key[1]: stage_extract(scenario, cfg)}
        result = run_clad(scenario, cfg, autoencoder=extractors[key[1]])
        row = AblationRow(key[0], key[1], result.report.auroc, time.perf_counter() - start)
        rows.append(row)
        if on_row is not None:
            on_row(row)
    return rows
