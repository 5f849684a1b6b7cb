"""On-disk artifacts for trained models, built on the network container format."""
from __future__ import annotations

import numpy as np

from .classifier import ClassifierModel
from .engine import load_bundle, save_bundle
from .features import AutoencoderModel, InputScaler
from .selflabel import ClusterModel, RefineResult


def save_autoencoder(path, ae: AutoencoderModel) -> None:
    save_bundle(path, {"encoder": ae.encoder, "decoder": ae.decoder},
                extra={"kind": "autoencoder", "scaler": ae.scaler.to_dict(),
                       "loss_history": [float(v) for v in ae.loss_history]})


def _expect(extra, kind, path):
    if extra.get("kind") != kind:
        raise ValueError(f"{path}: expected a {kind} artifact, found {extra.get('kind')!r}")


def load_autoencoder(path) -> AutoencoderModel:
    nets, extra, _ = load_bundle(path)
    _expect(extra, "autoencoder", path)
    return AutoencoderModel(nets["encoder"], nets["decoder"], InputScaler(**extra["scaler"]),
                            extra["loss_history"])


def save_refined(path, result: RefineResult) -> None:
    ae = result.autoencoder
    save_bundle(path, {"encoder": ae.encoder, "decoder": ae.decoder},
                extra={"kind": "clusters", "scaler": ae.scaler.to_dict(),
                       "loss_history": [float(v) for v in ae.loss_history],
                       "kl_history": [float(v) for v in result.kl_history],
                       "reseeded": [list(r) for r in result.reseeded]},
                arrays={"centroids": result.clusters.centroids})


def load_refined(path) -> RefineResult:
    nets, extra, arrays = load_bundle(path)
    _expect(extra, "clusters", path)
    ae = AutoencoderModel(nets["encoder"], nets["decoder"], InputScaler(**extra["scaler"]),
                          extra["loss_history"])
    return RefineResult(ae, ClusterModel(np.asarray(arrays["centroids"], dtype=np.float64)),
                        extra["kl_history"], [tuple(r) for r in extra["reseeded"]])


def save_classifier(path, model: ClassifierModel) -> None:
    save_bundle(path, {"net": model.net},
                extra={"kind": "classifier", "n_classes": model.n_classes,
                       "scaler": model.scaler.to_dict(),
                       "accuracy_history": [float(v) for v in model.accuracy_history]})


def load_classifier(path) -> ClassifierModel:
    nets, extra, _ = load_bundle(path)
    _expect(extra, "classifier", path)
    return ClassifierModel(nets["net"], int(extra["n_classes"]), InputScaler(**extra["scaler"]),
                           extra["accuracy_history"])
