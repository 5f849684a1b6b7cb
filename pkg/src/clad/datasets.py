"""Dataset ingestion and latent-class anomaly-detection scenarios.

A scenario picks a super-category (a set of original class labels) as the
normal data. The pipeline only ever sees :class:`Scenario`, which carries the
unlabeled training samples and binary test labels. True class labels live in
:class:`ScenarioOracle` and are meant for diagnostics only.
"""
from __future__ import annotations

import csv
import gzip
import json
import struct
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IDXFormatError(ValueError):
    """Base class for malformed IDX files."""


class IDXMagicError(IDXFormatError):
    pass


class IDXPayloadSizeError(IDXFormatError):
    pass


class IDXShortLabelsError(IDXFormatError):
    pass


class IDXCountMismatchError(IDXFormatError):
    pass


class IDXDimensionError(IDXFormatError):
    pass


class VectorFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledDataset:
    samples: np.ndarray
    labels: np.ndarray
    split: str = "train"

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if samples.ndim < 2:
            raise ValueError("samples must have a leading sample axis")
        if labels.shape != (samples.shape[0],):
            raise ValueError(f"{labels.shape[0]} labels for {samples.shape[0]} samples")
        if self.split not in ("train", "test"):
            raise ValueError(f"split must be 'train' or 'test', got {self.split!r}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def sample_shape(self) -> tuple:
        return self.samples.shape[1:]


# -- IDX ---------------------------------------------------------------------

def _read_bytes(path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def _parse_header(raw: bytes, magic: int, path) -> tuple[tuple[int, ...], int]:
    if len(raw) < 4:
        raise IDXPayloadSizeError(f"{path}: file too short for an IDX header")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise IDXMagicError(f"{path}: bad magic 0x{found:08x}, expected 0x{magic:08x}")
    ndim = magic & 0xFF
    header_len = 4 + 4 * ndim
    if len(raw) < header_len:
        raise IDXPayloadSizeError(f"{path}: truncated header")
    dims = struct.unpack(">" + "I" * ndim, raw[4:header_len])
    return tuple(dims), header_len


def load_idx(images_path, labels_path, sample_shape: tuple | None = None,
             split: str = "train") -> LabeledDataset:
    """Read an IDX image/label pair (plain or gzipped) into a dataset scaled to [0, 1].

    ``sample_shape`` (e.g. ``(28, 28)`` for MNIST) is enforced when given.
    """
    raw_images = _read_bytes(images_path)
    raw_labels = _read_bytes(labels_path)
    dims, offset = _parse_header(raw_images, IMAGES_MAGIC, images_path)
    n_images, rows, cols = dims
    if rows == 0 or cols == 0:
        raise IDXDimensionError(f"{images_path}: empty image dimensions {rows}x{cols}")
    if sample_shape is not None and (rows, cols) != tuple(sample_shape):
        raise IDXDimensionError(
            f"{images_path}: images are {rows}x{cols}, expected {tuple(sample_shape)}"
        )
    expected = n_images * rows * cols
    payload = len(raw_images) - offset
    if payload != expected:
        raise IDXPayloadSizeError(
            f"{images_path}: payload has {payload} bytes, header declares {expected}"
        )
    (n_labels,), label_offset = _parse_header(raw_labels, LABELS_MAGIC, labels_path)
    if n_labels != n_images:
        raise IDXCountMismatchError(
            f"{labels_path} declares {n_labels} labels but {images_path} has {n_images} images"
        )
    if len(raw_labels) - label_offset != n_labels:
        raise IDXShortLabelsError(
            f"{labels_path}: {len(raw_labels) - label_offset} label bytes, expected {n_labels}"
        )
    pixels = np.frombuffer(raw_images, dtype=np.uint8, offset=offset).reshape(n_images, rows, cols)
    labels = np.frombuffer(raw_labels, dtype=np.uint8, offset=label_offset)
    return LabeledDataset(pixels.astype(np.float64) / 255.0, labels.astype(np.int64), split)


def write_idx(images_path, labels_path, images: np.ndarray, labels: np.ndarray) -> None:
    """Write uint8 images (N, rows, cols) and labels (N,) as uncompressed IDX."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGES_MAGIC, n, rows, cols))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", LABELS_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def load_mnist(directory, split: str = "train") -> LabeledDataset:
    """Load the official MNIST split from ``directory`` (plain or ``.gz`` files)."""
    directory = Path(directory)
    paths = []
    for name in MNIST_FILES[split]:
        path = directory / name
        if not path.exists() and (directory / (name + ".gz")).exists():
            path = directory / (name + ".gz")
        paths.append(path)
    return load_idx(paths[0], paths[1], sample_shape=(28, 28), split=split)


# -- generic vectors -----------------------------------------------------------

def import_labeled_vectors(path, split: str = "train") -> LabeledDataset:
    """Read a headerless CSV whose rows are ``label, v1, ..., vd``.

    Values are taken as-is. Errors name the 1-based line number.
    """
    labels = []
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if width is None:
                width = len(row)
                if width < 2:
                    raise VectorFormatError(f"{path}:{lineno}: need a label and at least one value")
            elif len(row) != width:
                raise VectorFormatError(
                    f"{path}:{lineno}: ragged row with {len(row) - 1} values, expected {width - 1}"
                )
            try:
                label = int(row[0])
            except ValueError:
                raise VectorFormatError(f"{path}:{lineno}: label {row[0]!r} is not an integer") from None
            try:
                values = [float(cell) for cell in row[1:]]
            except ValueError:
                raise VectorFormatError(f"{path}:{lineno}: non-numeric value") from None
            labels.append(label)
            rows.append(values)
    if not rows:
        raise VectorFormatError(f"{path}: no data rows")
    return LabeledDataset(np.array(rows), np.array(labels), split)


def export_labeled_vectors(path, dataset: LabeledDataset) -> None:
    flat = dataset.samples.reshape(len(dataset), -1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for label, values in zip(dataset.labels, flat):
            writer.writerow([int(label)] + [repr(float(v)) for v in values])


# -- synthetic ------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianMode:
    mean: tuple
    variance: tuple
    count: int
    label: int


def synth_gaussian_mixture(modes, seed: int = 0, split: str = "train") -> LabeledDataset:
    """Sample exactly ``mode.count`` points from each axis-aligned Gaussian mode.

    ``modes`` is a sequence of :class:`GaussianMode` or ``(mean, variance, count,
    label)`` tuples; ``variance`` may be a scalar or per-dimension.
    """
    rng = np.random.default_rng(seed)
    samples, labels = [], []
    for mode in modes:
        mode = mode if isinstance(mode, GaussianMode) else GaussianMode(*mode)
        mean = np.atleast_1d(np.asarray(mode.mean, dtype=np.float64))
        var = np.broadcast_to(np.asarray(mode.variance, dtype=np.float64), mean.shape)
        if np.any(var <= 0):
            raise ValueError(f"mode {mode.label}: variances must be positive")
        if mode.count < 0:
            raise ValueError("mode counts must be non-negative")
        samples.append(mean + np.sqrt(var) * rng.standard_normal((mode.count, mean.size)))
        labels.append(np.full(mode.count, mode.label))
    return LabeledDataset(np.concatenate(samples), np.concatenate(labels), split)


TRIMODAL_NORMAL = ((-4.0, 0.0), (4.0, 0.0), (0.0, 6.0))
# first abnormal mode sits halfway between two normal modes, i.e. close to the
# mean of all normal data; the second lies on the same class boundary, far out
TRIMODAL_ABNORMAL = ((0.0, 0.0), (0.0, -6.0))


def trimodal_scenario_data(n_train: int = 300, n_test: int = 500, variance: float = 0.5,
                           seed: int = 0) -> tuple[LabeledDataset, LabeledDataset]:
    """2-D mixture with three normal modes (labels 0-2) and two abnormal modes (3, 4)."""
    per_train = np.full(3, n_train // 3)
    per_train[: n_train % 3] += 1
    n_test_normal = n_test * 3 // 5
    per_test = np.full(3, n_test_normal // 3)
    per_test[: n_test_normal % 3] += 1
    per_abn = np.full(2, (n_test - n_test_normal) // 2)
    per_abn[: (n_test - n_test_normal) % 2] += 1
    train_modes = [(m, variance, int(c), k) for k, (m, c) in enumerate(zip(TRIMODAL_NORMAL, per_train))]
    test_modes = [(m, variance, int(c), k) for k, (m, c) in enumerate(zip(TRIMODAL_NORMAL, per_test))]
    test_modes += [(m, variance, int(c), 3 + k) for k, (m, c) in enumerate(zip(TRIMODAL_ABNORMAL, per_abn))]
    seeds = np.random.SeedSequence(seed).spawn(2)
    train = synth_gaussian_mixture(train_modes, seed=seeds[0], split="train")
    test = synth_gaussian_mixture(test_modes, seed=seeds[1], split="test")
    return train, test


# -- scenarios -----------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    dataset: str
    normal_labels: tuple
    class_names: tuple = ()

    def __post_init__(self):
        labels = tuple(sorted(int(v) for v in self.normal_labels))
        if not labels:
            raise ValueError(f"scenario {self.name!r}: normal set is empty")
        object.__setattr__(self, "normal_labels", labels)
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @classmethod
    def one_class(cls, dataset: str, label: int, name: str | None = None) -> "ScenarioSpec":
        return cls(name or f"{dataset}-class-{label}", dataset, (label,))

    def to_dict(self) -> dict:
        return {"name": self.name, "dataset": self.dataset,
                "normal_labels": list(self.normal_labels), "class_names": list(self.class_names)}


@dataclass(frozen=True)
class Scenario:
    """Pipeline-facing view: unlabeled training data and binary test labels only."""

    x_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    spec: ScenarioSpec

    @property
    def sample_shape(self) -> tuple:
        return self.x_train.shape[1:]

    def composition(self) -> dict:
        n_abnormal = int(self.y_test.sum())
        n = int(self.y_test.size)
        return {"n_train": int(self.x_train.shape[0]), "n_test": n,
                "n_test_normal": n - n_abnormal, "n_test_abnormal": n_abnormal,
                "abnormal_ratio": n_abnormal / n}


@dataclass(frozen=True)
class ScenarioOracle:
    """True latent class labels, aligned with ``Scenario.x_train`` / ``x_test``."""

    train_labels: np.ndarray
    test_labels: np.ndarray
    normal_labels: tuple = field(default=())


def build_scenario(train: LabeledDataset, test: LabeledDataset, spec: ScenarioSpec,
                   max_train: int | None = None, max_test: int | None = None,
                   seed: int = 0) -> tuple[Scenario, ScenarioOracle]:
    """Split datasets into a normal-only training set and a binary-labeled test set.

    Optional ``max_train`` / ``max_test`` draw a seeded subsample (order kept).
    """
    normal = np.array(spec.normal_labels)
    for ds in (train, test):
        missing = sorted(set(spec.normal_labels) - set(np.unique(ds.labels).tolist()))
        if missing:
            raise ValueError(f"scenario {spec.name}: labels {missing} absent from {ds.split} split")
    train_idx = np.flatnonzero(np.isin(train.labels, normal))
    test_idx = np.arange(len(test))
    rng = np.random.default_rng(seed)
    if max_train is not None and train_idx.size > max_train:
        train_idx = np.sort(rng.choice(train_idx, size=max_train, replace=False))
    if max_test is not None and test_idx.size > max_test:
        test_idx = np.sort(rng.choice(test_idx, size=max_test, replace=False))
    if train_idx.size == 0:
        raise ValueError(f"scenario {spec.name}: no training samples in the normal set")
    test_latent = test.labels[test_idx]
    y_test = (~np.isin(test_latent, normal)).astype(np.int64)
    if y_test.min() == y_test.max():
        raise ValueError(f"scenario {spec.name}: test set contains only one class")
    scenario = Scenario(train.samples[train_idx], test.samples[test_idx], y_test, spec)
    oracle = ScenarioOracle(train.labels[train_idx], test_latent, spec.normal_labels)
    return scenario, oracle


def _catalog_data() -> dict:
    text = resources.files("clad").joinpath("data/scenarios.json").read_text(encoding="utf-8")
    return json.loads(text)


def dataset_classes(dataset: str) -> list[str]:
    return list(_catalog_data()["datasets"][dataset]["classes"])


def builtin_scenario_tables() -> dict[str, ScenarioSpec]:
    """All super-category scenarios, keyed ``"<dataset>:<name>"``.

    Class labels are positions in the dataset's class list (MNIST: the digit).
    """
    data = _catalog_data()
    catalog = {}
    for entry in data["scenarios"]:
        classes = data["datasets"][entry["dataset"]]["classes"]
        labels = tuple(classes.index(name) for name in entry["classes"])
        spec = ScenarioSpec(entry["name"], entry["dataset"], labels, tuple(entry["classes"]))
        catalog[f"{entry['dataset']}:{entry['name']}"] = spec
    return catalog


def get_scenario_spec(key: str) -> ScenarioSpec:
    """Look up ``"mnist:CUR"`` style keys; ``"mnist:5"`` gives a one-class spec."""
    catalog = builtin_scenario_tables()
    if key in catalog:
        return catalog[key]
    dataset, _, name = key.partition(":")
    if dataset in _catalog_data()["datasets"]:
        classes = dataset_classes(dataset)
        if name in classes:
            return ScenarioSpec.one_class(dataset, classes.index(name), name=f"{dataset}:{name}")
    raise KeyError(f"unknown scenario {key!r}")
