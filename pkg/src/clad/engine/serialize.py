"""Network container format.

A single ``.npz`` archive holding a JSON header under ``__meta__`` and one
array per parameter under ``"<layer>.<name>"``. The header records the format
version, the input shape, every layer kind with its hyperparameters, and the
shape of each parameter tensor; ``extra`` carries caller metadata. Arrays are
stored as raw float64, so save -> load is value-exact. Pickle is never used.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .layers import layer_from_spec
from .network import Network

FORMAT = "clad-network"
FORMAT_VERSION = 1


def network_to_arrays(net: Network, prefix: str = "") -> tuple[dict, dict[str, np.ndarray]]:
    layers = []
    arrays = {}
    for i, layer in enumerate(net.layers):
        shapes = {}
        for name, value in layer.params.items():
            arrays[f"{prefix}{i}.{name}"] = value
            shapes[name] = list(value.shape)
        layers.append({"kind": layer.kind, "hyperparameters": layer.hyperparameters(),
                       "parameter_shapes": shapes})
    meta = {"input_shape": list(net.input_shape), "layers": layers}
    return meta, arrays


def network_from_arrays(meta: dict, arrays, prefix: str = "") -> Network:
    layers = []
    for i, spec in enumerate(meta["layers"]):
        layer = layer_from_spec(spec["kind"], spec["hyperparameters"])
        for name, shape in spec["parameter_shapes"].items():
            value = np.array(arrays[f"{prefix}{i}.{name}"], dtype=np.float64)
            if list(value.shape) != list(shape):
                raise ValueError(f"layer {i} {name}: stored shape {value.shape} != header {shape}")
            layer.params[name] = value
        layers.append(layer)
    net = Network(layers, meta["input_shape"])
    return net.eval()


def save_bundle(path, networks: dict[str, Network], extra: dict | None = None,
                arrays: dict[str, np.ndarray] | None = None) -> Path:
    """Write several named networks plus free-form arrays into one container."""
    path = Path(path)
    header = {"format": FORMAT, "version": FORMAT_VERSION, "networks": {}, "extra": extra or {},
              "arrays": {}}
    payload = {}
    for key, net in networks.items():
        meta, net_arrays = network_to_arrays(net, prefix=f"{key}/")
        header["networks"][key] = meta
        payload.update(net_arrays)
    for key, value in (arrays or {}).items():
        value = np.asarray(value)
        header["arrays"][key] = {"shape": list(value.shape), "dtype": str(value.dtype)}
        payload[f"array/{key}"] = value
    payload["__meta__"] = np.frombuffer(json.dumps(header).encode("utf-8"), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **payload)
    return path


def load_bundle(path) -> tuple[dict[str, Network], dict, dict[str, np.ndarray]]:
    with np.load(Path(path), allow_pickle=False) as data:
        header = json.loads(data["__meta__"].tobytes().decode("utf-8"))
        if header.get("format") != FORMAT:
            raise ValueError(f"{path}: not a {FORMAT} container")
        if header.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported container version {header.get('version')}")
        networks = {
            key: network_from_arrays(meta, data, prefix=f"{key}/")
            for key, meta in header["networks"].items()
        }
        arrays = {key: np.array(data[f"array/{key}"]) for key in header["arrays"]}
    return networks, header["extra"], arrays


def save_network(path, net: Network, extra: dict | None = None) -> Path:
    return save_bundle(path, {"net": net}, extra=extra)


def load_network(path) -> Network:
    networks, _, _ = load_bundle(path)
    return networks["net"]
