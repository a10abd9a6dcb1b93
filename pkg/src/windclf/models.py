"""The three classifier families behind one train/predict interface.

KNN and the feed-forward network consume plain per-record signal vectors;
the CNN consumes time-window matrices. A trained model travels as a
ModelBundle: kind, architecture, parameters, signal list, label vocabulary
and alignment provenance, serialized as a one-line JSON header followed by
a flat little-endian float64 blob with an offset table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .baseline import AlignmentParams
from .data import UNLABELED, FarmDataset
from .errors import SchemaError, VocabularyError
from .nn import (
    DEFAULT_BATCH_SIZE,
    ADAM_LEARNING_RATE,
    Conv1DLayer,
    DenseLayer,
    Flatten,
    Network,
    network_from_specs,
    softmax,
    train_network,
)
from .windows import DEFAULT_WINDOW_SIGNALS, WindowSpec, make_windows, stack_windows

BUNDLE_FORMAT = "windclf-bundle"
BUNDLE_VERSION = 1

DEFAULT_VECTOR_SIGNALS = ("wind_speed", "power", "pitch")


@dataclass(frozen=True)
class KnnConfig:
    n_neighbors: int = 50
    signal_names: tuple[str, ...] = DEFAULT_VECTOR_SIGNALS


@dataclass(frozen=True)
class FfnConfig:
    hidden: tuple[int, ...] = (12, 6, 6)
    signal_names: tuple[str, ...] = DEFAULT_VECTOR_SIGNALS
    epochs: int = 50

    def __post_init__(self):
        if any(h < 1 for h in self.hidden):
            raise ValueError(f"hidden sizes must be >= 1, got {self.hidden}")


@dataclass(frozen=True)
class CnnConfig:
    conv_channels: tuple[int, ...] = (32, 32)
    kernel_width: int = 3
    head: tuple[int, ...] = (64, 32)
    window_half_width: int = 4
    window_mode: str = "centered"
    signal_names: tuple[str, ...] = DEFAULT_WINDOW_SIGNALS
    epochs: int = 30

    @property
    def window(self) -> WindowSpec:
        return WindowSpec(self.window_half_width, self.window_mode, self.signal_names)


ModelConfig = Union[KnnConfig, FfnConfig, CnnConfig]

_CONFIG_KINDS = {"knn": KnnConfig, "ffn": FfnConfig, "cnn": CnnConfig}


def config_kind(config: ModelConfig) -> str:
    for kind, cls in _CONFIG_KINDS.items():
        if isinstance(config, cls):
            return kind
    raise TypeError(f"unknown model config {type(config).__name__}")


def config_to_dict(config: ModelConfig) -> dict:
    out = {"kind": config_kind(config)}
    for name in config.__dataclass_fields__:
        value = getattr(config, name)
        out[name] = list(value) if isinstance(value, tuple) else value
    return out


def config_from_dict(raw: dict) -> ModelConfig:
    raw = dict(raw)
    kind = raw.pop("kind", None)
    if kind not in _CONFIG_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    cls = _CONFIG_KINDS[kind]
    for name, f in cls.__dataclass_fields__.items():
        if name in raw and isinstance(raw[name], list):
            raw[name] = tuple(raw[name])
    return cls(**raw)


@dataclass
class TrainParams:
    """Run-specific training knobs; the seed is mandatory."""

    seed: int
    epochs: int | None = None  # None -> the config's default
    batch_size: int = DEFAULT_BATCH_SIZE
    learning_rate: float = ADAM_LEARNING_RATE


@dataclass(frozen=True, eq=False)
class KnnModel:
    """Memorized training set for k-nearest-neighbor classification."""

    k: int
    points: np.ndarray  # (n, p)
    labels: np.ndarray  # (n,)
    signal_names: tuple[str, ...]
    n_classes: int

    def __post_init__(self):
        if self.k > len(self.points):
            raise ValueError(f"k={self.k} exceeds training set size {len(self.points)}")


def knn_predict_proba(model: KnnModel, x: np.ndarray, chunk: int = 64) -> np.ndarray:
    """Class probabilities as neighbor-label fractions, for queries x (m, p).

    Distances are Euclidean; the neighbor set is the k smallest by
    (distance, training index), so ties at the k-th distance go to the
    lower training index. Probabilities over classes sum to 1.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.points.shape[1]:
        raise ValueError(
            f"query dimension {x.shape[1]} does not match model dimension "
            f"{model.points.shape[1]}"
        )
    k = model.k
    probs = np.empty((len(x), model.n_classes))
    for start in range(0, len(x), chunk):
        block = x[start : start + chunk]
        diff = block[:, None, :] - model.points[None, :, :]
        d2 = np.einsum("qnp,qnp->qn", diff, diff)
        kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
        for i, row in enumerate(d2):
            cand = np.flatnonzero(row <= kth[i])
            if len(cand) > k:
                order = np.lexsort((cand, row[cand]))
                cand = cand[order[:k]]
            counts = np.bincount(model.labels[cand], minlength=model.n_classes)
            probs[start + i] = counts / k
    return probs


@dataclass
class ModelBundle:
    """A trained classifier plus everything needed to apply and audit it."""

    kind: str  # "knn" | "ffn" | "cnn"
    config: ModelConfig
    signal_names: tuple[str, ...]
    label_vocab: tuple[str, ...]
    knn: KnnModel | None = None
    network: Network | None = None
    window: WindowSpec | None = None
    alignment: AlignmentParams | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return len(self.label_vocab)


@dataclass(frozen=True, eq=False)
class Predictions:
    """Per-record predictions over the eligible records of one dataset."""

    label_vocab: tuple[str, ...]
    turbine_ids: tuple[str, ...]
    timestamps: np.ndarray  # (n,)
    true_labels: np.ndarray  # (n,) indices into label_vocab, -1 unlabeled
    probabilities: np.ndarray  # (n, n_classes)
    predicted: np.ndarray  # (n,)
    n_records_total: int
    n_unpredicted: int

    def __len__(self) -> int:
        return len(self.predicted)

    def scored(self) -> tuple[np.ndarray, np.ndarray]:
        """(true, predicted) over labeled eligible records."""
        mask = self.true_labels != UNLABELED
        return self.true_labels[mask], self.predicted[mask]


def _check_unit_range(ds: FarmDataset, signals: tuple[str, ...]) -> None:
    for name in signals:
        col = ds.signal_column(name)
        if len(col) and (col.min() < -1e-9 or col.max() > 1.0 + 1e-9):
            raise ValueError(
                f"signal {name!r} is outside [0, 1]; min-max normalize the dataset first"
            )


def _vector_training_set(ds: FarmDataset, signals: tuple[str, ...]):
    cols = [ds.signal_index(name) for name in signals]
    xs, ys = [], []
    for t in ds.turbines:
        mask = t.labels != UNLABELED
        xs.append(t.values[np.ix_(mask.nonzero()[0], cols)])
        ys.append(t.labels[mask])
    x = np.concatenate(xs) if xs else np.empty((0, len(cols)))
    y = np.concatenate(ys) if ys else np.empty(0, dtype=np.int64)
    return x, y


def _missing_classes(ds: FarmDataset) -> list[str]:
    counts = ds.label_counts()
    return [name for name in ds.label_vocab if counts[name] == 0]


def build_ffn_network(n_in: int, hidden: tuple[int, ...], n_classes: int,
                      rng: np.random.Generator) -> Network:
    layers = []
    prev = n_in
    for h in hidden:
        layers.append(DenseLayer(prev, h, "relu", rng))
        prev = h
    layers.append(DenseLayer(prev, n_classes, "identity", rng))
    return Network(layers)


def build_cnn_network(n_signals: int, width: int, config: CnnConfig, n_classes: int,
                      rng: np.random.Generator) -> Network:
    layers = []
    prev_ch, w = n_signals, width
    for ch in config.conv_channels:
        layers.append(Conv1DLayer(prev_ch, ch, config.kernel_width, rng))
        prev_ch = ch
        w = w - config.kernel_width + 1
        if w < 1:
            raise ValueError(
                f"window width {width} too small for {len(config.conv_channels)} "
                f"convolutions of kernel {config.kernel_width}"
            )
    layers.append(Flatten())
    prev = prev_ch * w
    for h in config.head:
        layers.append(DenseLayer(prev, h, "relu", rng))
        prev = h
    layers.append(DenseLayer(prev, n_classes, "identity", rng))
    return Network(layers)


def train(
    config: ModelConfig,
    train_ds: FarmDataset,
    params: TrainParams,
    alignment: AlignmentParams | None = None,
) -> ModelBundle:
    """Fit a classifier of the configured kind on a labeled, normalized farm.

    Classes listed in the vocabulary but absent from the data are recorded
    as a warning in the bundle metadata (the model keeps an output slot for
    them; it just never sees positive examples).
    """
    kind = config_kind(config)
    _check_unit_range(train_ds, config.signal_names)
    n_classes = len(train_ds.label_vocab)
    metadata: dict = {
        "seed": params.seed,
        "batch_size": params.batch_size,
        "training_farm_id": train_ds.farm_id,
        "missing_classes": _missing_classes(train_ds),
    }
    bundle = ModelBundle(
        kind=kind,
        config=config,
        signal_names=tuple(config.signal_names),
        label_vocab=train_ds.label_vocab,
        alignment=alignment,
        metadata=metadata,
    )

    if kind == "knn":
        x, y = _vector_training_set(train_ds, config.signal_names)
        if len(x) == 0:
            raise ValueError("knn training requires labeled records")
        bundle.knn = KnnModel(
            k=config.n_neighbors,
            points=x,
            labels=y,
            signal_names=tuple(config.signal_names),
            n_classes=n_classes,
        )
        return bundle

    epochs = params.epochs if params.epochs is not None else config.epochs
    metadata["epochs"] = epochs
    rng = np.random.default_rng(params.seed)

    if kind == "ffn":
        x, y = _vector_training_set(train_ds, config.signal_names)
        if len(x) == 0:
            raise ValueError("ffn training requires labeled records")
        net = build_ffn_network(len(config.signal_names), config.hidden, n_classes, rng)
    else:
        samples = make_windows(train_ds, config.window, require_label=True)
        if not samples:
            raise ValueError("cnn training requires at least one valid window sample")
        x, y = stack_windows(samples)
        net = build_cnn_network(len(config.signal_names), config.window.width, config,
                                n_classes, rng)

    metadata["loss_history"] = train_network(
        net, x, y,
        epochs=epochs,
        batch_size=params.batch_size,
        seed=params.seed,
        learning_rate=params.learning_rate,
    )
    bundle.network = net
    if kind == "cnn":
        bundle.window = config.window
    return bundle


def _map_true_labels(ds: FarmDataset, vocab: tuple[str, ...]) -> np.ndarray:
    """Translate the dataset's label indices into the model's vocabulary."""
    mapping = np.full(len(ds.label_vocab), -2, dtype=np.int64)
    for i, name in enumerate(ds.label_vocab):
        if name in vocab:
            mapping[i] = vocab.index(name)
    out = []
    for t in ds.turbines:
        mapped = np.where(t.labels == UNLABELED, UNLABELED, mapping[t.labels])
        bad = np.flatnonzero(mapped == -2)
        if len(bad):
            name = ds.label_vocab[t.labels[bad[0]]]
            raise VocabularyError(
                f"dataset label {name!r} is not in the model vocabulary {vocab}; "
                "unify label spaces before predicting"
            )
        out.append(mapped)
    return np.concatenate(out) if out else np.empty(0, dtype=np.int64)


def _network_proba(net: Network, x: np.ndarray, chunk: int = 4096) -> np.ndarray:
    parts = [softmax(net.forward(x[i : i + chunk])) for i in range(0, len(x), chunk)]
    return np.concatenate(parts) if parts else np.empty((0, 0))


def predict(bundle: ModelBundle, ds: FarmDataset) -> Predictions:
    """Classify every eligible record of a dataset.

    KNN/FFN predict every record; the CNN predicts records whose full time
    window exists (the rest are counted as unpredicted). Deterministic.
    """
    missing = [s for s in bundle.signal_names if s not in ds.signal_names]
    if missing:
        raise SchemaError(
            f"dataset {ds.farm_id!r} lacks signals {missing} required by the model"
        )
    _check_unit_range(ds, bundle.signal_names)
    n_total = ds.n_records

    if bundle.kind == "cnn":
        samples = make_windows(ds, bundle.window, require_label=False)
        if samples:
            x, _ = stack_windows(samples)
            probs = _network_proba(bundle.network, x)
        else:
            probs = np.empty((0, bundle.n_classes))
        raw_true = np.array([s.label_index for s in samples], dtype=np.int64)
        # window labels are in the dataset's vocabulary; remap by name
        mapping = np.full(len(ds.label_vocab), -2, dtype=np.int64)
        for i, name in enumerate(ds.label_vocab):
            if name in bundle.label_vocab:
                mapping[i] = bundle.label_vocab.index(name)
        true = np.where(raw_true == UNLABELED, UNLABELED, mapping[raw_true])
        bad = np.flatnonzero(true == -2)
        if len(bad):
            name = ds.label_vocab[raw_true[bad[0]]]
            raise VocabularyError(
                f"dataset label {name!r} is not in the model vocabulary "
                f"{bundle.label_vocab}; unify label spaces before predicting"
            )
        turbine_ids = tuple(s.turbine_id for s in samples)
        timestamps = np.array([s.timestamp for s in samples], dtype=np.int64)
    else:
        cols = [ds.signal_index(name) for name in bundle.signal_names]
        xs = [t.values[:, cols] for t in ds.turbines]
        x = np.concatenate(xs) if xs else np.empty((0, len(cols)))
        if bundle.kind == "knn":
            probs = knn_predict_proba(bundle.knn, x) if len(x) else np.empty((0, bundle.n_classes))
        else:
            probs = _network_proba(bundle.network, x) if len(x) else np.empty((0, bundle.n_classes))
        true = _map_true_labels(ds, bundle.label_vocab)
        turbine_ids = tuple(
            t.turbine_id for t in ds.turbines for _ in range(len(t))
        )
        timestamps = (
            np.concatenate([t.timestamps for t in ds.turbines])
            if ds.turbines
            else np.empty(0, dtype=np.int64)
        )

    predicted = probs.argmax(axis=1) if len(probs) else np.empty(0, dtype=np.int64)
    return Predictions(
        label_vocab=bundle.label_vocab,
        turbine_ids=turbine_ids,
        timestamps=timestamps,
        true_labels=true,
        probabilities=probs,
        predicted=predicted.astype(np.int64),
        n_records_total=n_total,
        n_unpredicted=n_total - len(probs),
    )


def save_bundle(bundle: ModelBundle, path: str | Path, provenance: dict | None = None) -> None:
    """Write a bundle: one JSON header line, then the float64 parameter blob."""
    entries = []
    arrays: list[np.ndarray] = []
    offset = 0

    def add(name: str, arr: np.ndarray):
        nonlocal offset
        arr = np.asarray(arr, dtype="<f8")
        entries.append({"name": name, "offset": offset, "shape": list(arr.shape)})
        arrays.append(arr)
        offset += arr.size

    if bundle.kind == "knn":
        add("points", bundle.knn.points)
        add("labels", bundle.knn.labels.astype(np.float64))
        layers = None
    else:
        layers = bundle.network.specs()
        for i, layer in enumerate(bundle.network.layers):
            for j, p in enumerate(layer.params):
                add(f"layer{i}.param{j}", p)

    header = {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "kind": bundle.kind,
        "config": config_to_dict(bundle.config),
        "signal_names": list(bundle.signal_names),
        "label_vocab": list(bundle.label_vocab),
        "layers": layers,
        "alignment": bundle.alignment.to_dict() if bundle.alignment else None,
        "metadata": bundle.metadata,
        "dtype": "<f8",
        "entries": entries,
    }
    if provenance:
        header["provenance"] = provenance
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_bundle(path: str | Path) -> ModelBundle:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("format") != BUNDLE_FORMAT:
        raise ValueError(f"{path} is not a {BUNDLE_FORMAT} file")
    flat = np.frombuffer(blob, dtype="<f8")
    tensors: dict[str, np.ndarray] = {}
    for e in header["entries"]:
        size = int(np.prod(e["shape"])) if e["shape"] else 1
        tensors[e["name"]] = flat[e["offset"] : e["offset"] + size].reshape(e["shape"]).copy()

    config = config_from_dict(header["config"])
    bundle = ModelBundle(
        kind=header["kind"],
        config=config,
        signal_names=tuple(header["signal_names"]),
        label_vocab=tuple(header["label_vocab"]),
        alignment=AlignmentParams.from_dict(header["alignment"]) if header["alignment"] else None,
        metadata=header["metadata"],
    )
    if bundle.kind == "knn":
        bundle.knn = KnnModel(
            k=config.n_neighbors,
            points=tensors["points"],
            labels=tensors["labels"].astype(np.int64),
            signal_names=bundle.signal_names,
            n_classes=len(bundle.label_vocab),
        )
    else:
        net = network_from_specs(header["layers"])
        values = [tensors[e["name"]] for e in header["entries"]]
        net.set_params(values)
        bundle.network = net
        if bundle.kind == "cnn":
            bundle.window = config.window
    return bundle
