"""SCADA data model: typed records, CSV ingestion, min-max scaling, splitting.

A farm dataset holds one time-ordered series per turbine, stored columnar
(numpy arrays) for speed. Labels are kept as dense integer indices into the
farm's label vocabulary; index -1 marks an unlabeled record. The vocabulary
is always ordered ("normal", middle classes sorted by name, "other") so that
report columns are stable across farms.

Datasets are immutable: every transforming operation returns a new dataset.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import (
    DegenerateSignalError,
    InsufficientDataError,
    IntegrityError,
    ParseError,
    SchemaError,
)

NORMAL_CLASS = "normal"
OTHER_CLASS = "other"
UNLABELED = -1

#: default SCADA sampling period (10-minute records)
DEFAULT_PERIOD_MINUTES = 10


def canonical_vocab(names: Iterable[str]) -> tuple[str, ...]:
    """Order class names canonically: "normal" first, "other" last.

    Middle classes are sorted by name. "normal" and "other" are always
    included, even when absent from `names`.
    """
    middles = sorted(set(names) - {NORMAL_CLASS, OTHER_CLASS})
    return (NORMAL_CLASS, *middles, OTHER_CLASS)


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary parts (ints, strings).

    Uses SHA-256 so derived seeds are reproducible across platforms and
    Python processes, unlike the builtin `hash`.
    """
    text = ":".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


@dataclass(frozen=True)
class ScadaRecord:
    """One 10-minute SCADA sample. Timestamps are integer minutes since epoch."""

    timestamp: int
    turbine_id: str
    signals: dict[str, float]
    label: str | None = None


@dataclass(frozen=True, eq=False)
class TurbineSeries:
    """Time-ordered samples of one turbine.

    `values` has one row per record and one column per farm signal;
    `labels` holds vocabulary indices (-1 = unlabeled).
    """

    turbine_id: str
    timestamps: np.ndarray  # (n,) int64, strictly increasing
    values: np.ndarray  # (n, p) float64
    labels: np.ndarray  # (n,) int64

    def __len__(self) -> int:
        return len(self.timestamps)


@dataclass(frozen=True, eq=False)
class FarmDataset:
    """All SCADA series of one wind farm plus its label vocabulary.

    `normalization_ranges` records the per-signal (min, max) used by
    `min_max_normalize`, enabling the inverse mapping; it is None for raw
    (unnormalized) data.
    """

    farm_id: str
    signal_names: tuple[str, ...]
    label_vocab: tuple[str, ...]
    turbines: tuple[TurbineSeries, ...]
    normalization_ranges: dict[str, tuple[float, float]] | None = None
    period_minutes: int = DEFAULT_PERIOD_MINUTES

    def __post_init__(self):
        if self.label_vocab[0] != NORMAL_CLASS or self.label_vocab[-1] != OTHER_CLASS:
            raise IntegrityError(
                f"label vocabulary must start with {NORMAL_CLASS!r} and end with "
                f"{OTHER_CLASS!r}, got {self.label_vocab}"
            )
        n_classes = len(self.label_vocab)
        for series in self.turbines:
            n = len(series.timestamps)
            if series.values.shape != (n, len(self.signal_names)):
                raise IntegrityError(
                    f"turbine {series.turbine_id!r}: values shape "
                    f"{series.values.shape} does not match {n} records x "
                    f"{len(self.signal_names)} signals"
                )
            if n > 1 and not np.all(np.diff(series.timestamps) > 0):
                raise IntegrityError(
                    f"turbine {series.turbine_id!r}: timestamps not strictly increasing"
                )
            if len(series.labels) != n:
                raise IntegrityError(f"turbine {series.turbine_id!r}: label length mismatch")
            if n and (series.labels.max(initial=UNLABELED) >= n_classes
                      or series.labels.min(initial=UNLABELED) < UNLABELED):
                raise IntegrityError(
                    f"turbine {series.turbine_id!r}: label index outside vocabulary"
                )

    @property
    def n_records(self) -> int:
        return sum(len(t) for t in self.turbines)

    @property
    def turbine_ids(self) -> tuple[str, ...]:
        return tuple(t.turbine_id for t in self.turbines)

    def signal_index(self, name: str) -> int:
        try:
            return self.signal_names.index(name)
        except ValueError:
            raise SchemaError(
                f"farm {self.farm_id!r} has no signal {name!r}; available: "
                f"{self.signal_names}"
            ) from None

    def signal_column(self, name: str) -> np.ndarray:
        """Concatenated values of one signal over all turbines."""
        j = self.signal_index(name)
        if not self.turbines:
            return np.empty(0)
        return np.concatenate([t.values[:, j] for t in self.turbines])

    def all_labels(self) -> np.ndarray:
        if not self.turbines:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([t.labels for t in self.turbines])

    def label_counts(self) -> dict[str, int]:
        labels = self.all_labels()
        counts = np.bincount(labels[labels >= 0], minlength=len(self.label_vocab))
        return {name: int(c) for name, c in zip(self.label_vocab, counts)}

    def records(self) -> Iterator[ScadaRecord]:
        """Iterate over records as ScadaRecord objects (convenience view)."""
        for series in self.turbines:
            for i in range(len(series)):
                label_idx = int(series.labels[i])
                yield ScadaRecord(
                    timestamp=int(series.timestamps[i]),
                    turbine_id=series.turbine_id,
                    signals={
                        name: float(series.values[i, j])
                        for j, name in enumerate(self.signal_names)
                    },
                    label=None if label_idx == UNLABELED else self.label_vocab[label_idx],
                )


@dataclass(frozen=True)
class SplitSpec:
    """Deterministic train/test split parameters."""

    test_fraction: float = 1.0 / 3.0
    seed: int = 0
    strategy: str = "by_record"  # or "by_contiguous_block"

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        if self.strategy not in ("by_record", "by_contiguous_block"):
            raise ValueError(f"unknown split strategy {self.strategy!r}")


def _parse_header(header: list[str], schema: list[str] | None) -> tuple[str, ...]:
    if len(header) < 3 or header[0] != "timestamp" or header[1] != "turbine_id" or header[-1] != "label":
        raise SchemaError(
            "header must be 'timestamp,turbine_id,<signal...>,label', got "
            + ",".join(header)
        )
    signals = tuple(header[2:-1])
    if schema is not None and tuple(schema) != signals:
        raise SchemaError(f"file signals {signals} do not match requested schema {tuple(schema)}")
    if not signals:
        raise SchemaError("no signal columns in header")
    return signals


def load_csv(
    path: str | Path,
    schema: list[str] | None = None,
    label_vocab: tuple[str, ...] | None = None,
    farm_id: str | None = None,
) -> FarmDataset:
    """Load a farm dataset from CSV (see `save_csv` for the format).

    When `label_vocab` is given, unknown labels raise ParseError; otherwise
    the vocabulary is inferred from the labels present in the file. A
    `<name>.ranges.json` sidecar, if present, restores normalization ranges.
    """
    path = Path(path)
    if farm_id is None:
        farm_id = path.stem

    per_turbine: dict[str, list[tuple[int, list[float], str]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row") from None
        signals = _parse_header(header, schema)
        n_cols = len(header)
        for line_no, row in enumerate(reader, start=2):
            if len(row) != n_cols:
                raise ParseError(f"expected {n_cols} columns, got {len(row)}", line_no)
            try:
                ts = int(row[0])
            except ValueError:
                raise ParseError(f"non-integer timestamp {row[0]!r}", line_no) from None
            turbine = row[1]
            try:
                vals = [float(v) for v in row[2:-1]]
            except ValueError:
                bad = next(v for v in row[2:-1] if not _is_float(v))
                raise ParseError(f"non-numeric signal value {bad!r}", line_no) from None
            label = row[-1]
            if label_vocab is not None and label and label not in label_vocab:
                raise ParseError(f"unknown label {label!r}", line_no)
            per_turbine.setdefault(turbine, []).append((ts, vals, label))

    if label_vocab is None:
        observed = {lab for rows in per_turbine.values() for _, _, lab in rows if lab}
        label_vocab = canonical_vocab(observed)
    label_index = {name: i for i, name in enumerate(label_vocab)}

    turbines = []
    for turbine, rows in per_turbine.items():
        ts = np.array([r[0] for r in rows], dtype=np.int64)
        if len(ts) > 1 and not np.all(np.diff(ts) > 0):
            raise IntegrityError(
                f"turbine {turbine!r}: timestamps not strictly increasing in file order"
            )
        values = np.array([r[1] for r in rows], dtype=np.float64).reshape(len(rows), len(signals))
        labels = np.array(
            [label_index[r[2]] if r[2] else UNLABELED for r in rows], dtype=np.int64
        )
        turbines.append(TurbineSeries(turbine, ts, values, labels))

    ranges = None
    sidecar = path.with_name(path.stem + ".ranges.json")
    if sidecar.exists():
        with open(sidecar, encoding="utf-8") as fh:
            raw = json.load(fh)
        ranges = {k: (float(v[0]), float(v[1])) for k, v in raw["ranges"].items()}

    return FarmDataset(
        farm_id=farm_id,
        signal_names=signals,
        label_vocab=label_vocab,
        turbines=tuple(turbines),
        normalization_ranges=ranges,
    )


def _is_float(v: str) -> bool:
    try:
        float(v)
        return True
    except ValueError:
        return False


def save_csv(ds: FarmDataset, path: str | Path) -> None:
    """Write a farm dataset as CSV: header `timestamp,turbine_id,<signal...>,label`.

    Floats are written with `repr` so reloading reproduces them exactly.
    Normalization ranges, when present, go to a `<name>.ranges.json` sidecar.
    """
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp", "turbine_id", *ds.signal_names, "label"])
        for series in ds.turbines:
            for i in range(len(series)):
                label_idx = int(series.labels[i])
                writer.writerow(
                    [
                        int(series.timestamps[i]),
                        series.turbine_id,
                        *[repr(float(v)) for v in series.values[i]],
                        "" if label_idx == UNLABELED else ds.label_vocab[label_idx],
                    ]
                )
    if ds.normalization_ranges is not None:
        sidecar = path.with_name(path.stem + ".ranges.json")
        payload = {"ranges": {k: list(v) for k, v in ds.normalization_ranges.items()}}
        with open(sidecar, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def min_max_normalize(ds: FarmDataset) -> FarmDataset:
    """Scale every signal to [0, 1] over the whole farm.

    Ranges are computed per farm (not per turbine) and recorded on the
    result for the inverse mapping. A constant signal raises
    DegenerateSignalError.
    """
    if ds.n_records == 0:
        raise InsufficientDataError("cannot normalize an empty dataset")
    ranges: dict[str, tuple[float, float]] = {}
    for j, name in enumerate(ds.signal_names):
        col = ds.signal_column(name)
        lo, hi = float(col.min()), float(col.max())
        if hi == lo:
            raise DegenerateSignalError(name)
        ranges[name] = (lo, hi)

    lows = np.array([ranges[n][0] for n in ds.signal_names])
    spans = np.array([ranges[n][1] - ranges[n][0] for n in ds.signal_names])
    turbines = tuple(
        replace(t, values=(t.values - lows) / spans) for t in ds.turbines
    )
    return replace(ds, turbines=turbines, normalization_ranges=ranges)


def denormalize(ds: FarmDataset) -> FarmDataset:
    """Invert `min_max_normalize` using the stored ranges."""
    if ds.normalization_ranges is None:
        raise SchemaError("dataset has no stored normalization ranges")
    lows = np.array([ds.normalization_ranges[n][0] for n in ds.signal_names])
    spans = np.array(
        [ds.normalization_ranges[n][1] - ds.normalization_ranges[n][0] for n in ds.signal_names]
    )
    turbines = tuple(replace(t, values=t.values * spans + lows) for t in ds.turbines)
    return replace(ds, turbines=turbines, normalization_ranges=None)


def split(ds: FarmDataset, spec: SplitSpec) -> tuple[FarmDataset, FarmDataset]:
    """Partition a dataset into (train, test), deterministically per seed.

    The test partition holds round(test_fraction * n) records of each
    turbine. `by_record` samples records uniformly; `by_contiguous_block`
    reserves one contiguous time block per turbine so that window samples
    never straddle the boundary.
    """
    if ds.n_records == 0:
        raise InsufficientDataError("cannot split an empty dataset")
    train_series, test_series = [], []
    for series in ds.turbines:
        n = len(series)
        n_test = int(round(spec.test_fraction * n))
        rng = np.random.default_rng(derive_seed(spec.seed, ds.farm_id, series.turbine_id))
        if spec.strategy == "by_record":
            test_idx = np.sort(rng.choice(n, size=n_test, replace=False))
        else:
            start = int(rng.integers(0, n - n_test + 1)) if n_test < n else 0
            test_idx = np.arange(start, start + n_test)
        mask = np.zeros(n, dtype=bool)
        mask[test_idx] = True
        test_series.append(_take(series, mask))
        train_series.append(_take(series, ~mask))
    train = replace(ds, turbines=tuple(train_series))
    test = replace(ds, turbines=tuple(test_series))
    return train, test


def _take(series: TurbineSeries, mask: np.ndarray) -> TurbineSeries:
    return TurbineSeries(
        turbine_id=series.turbine_id,
        timestamps=series.timestamps[mask],
        values=series.values[mask],
        labels=series.labels[mask],
    )


def relabel(ds: FarmDataset, vocab: tuple[str, ...]) -> FarmDataset:
    """Re-index labels against a new vocabulary (superset by name)."""
    mapping = np.full(len(ds.label_vocab) + 1, UNLABELED, dtype=np.int64)
    for i, name in enumerate(ds.label_vocab):
        if name not in vocab:
            raise SchemaError(f"class {name!r} missing from target vocabulary {vocab}")
        mapping[i] = vocab.index(name)
    turbines = []
    for t in ds.turbines:
        labels = np.where(t.labels == UNLABELED, UNLABELED, mapping[t.labels])
        turbines.append(replace(t, labels=labels))
    return replace(ds, label_vocab=vocab, turbines=tuple(turbines))


def concatenate(datasets: list[FarmDataset], farm_id: str) -> FarmDataset:
    """Concatenate farms sharing signal set and vocabulary.

    Turbine ids are prefixed with their farm id so series never collide.
    """
    if not datasets:
        raise InsufficientDataError("nothing to concatenate")
    first = datasets[0]
    for ds in datasets[1:]:
        if ds.signal_names != first.signal_names:
            raise SchemaError("signal sets differ between farms")
        if ds.label_vocab != first.label_vocab:
            raise SchemaError("label vocabularies differ; unify them first")
        if ds.period_minutes != first.period_minutes:
            raise SchemaError("sampling periods differ between farms")
    turbines = tuple(
        replace(t, turbine_id=f"{ds.farm_id}/{t.turbine_id}")
        for ds in datasets
        for t in ds.turbines
    )
    return FarmDataset(
        farm_id=farm_id,
        signal_names=first.signal_names,
        label_vocab=first.label_vocab,
        turbines=turbines,
        normalization_ranges=None,
        period_minutes=first.period_minutes,
    )
