"""Accuracy metrics, label-space unification, mixed datasets, transfer runs.

Reports follow the class-imbalance-aware convention: the overall accuracy
is the fraction of exactly correct predictions, and the headline macro
accuracy is the unweighted mean of per-class recalls over classes that
actually occur in the test data. Classes with zero support render as "-"
and never enter the macro mean.

The transfer harness trains once per training farm on a 1/3-held-out
split, scores the held-out subset in-farm and entire foreign farms
cross-farm, optionally aligning each foreign test farm onto the training
farm first (the simple-model protocol; the CNN protocol uses no alignment).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baseline import AlignmentParams, GridSearchSpec, apply_alignment, fit_alignment
from .data import (
    FarmDataset,
    SplitSpec,
    canonical_vocab,
    concatenate,
    derive_seed,
    relabel,
    split,
)
from .errors import AlignmentQualityError, InsufficientDataError, VocabularyError
from .models import ModelConfig, Predictions, TrainParams, config_to_dict, predict, train

ABSENT_MARK = "-"


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows = true class, columns = predicted class."""

    counts: np.ndarray  # (n, n) int64
    label_vocab: tuple[str, ...]

    @classmethod
    def from_labels(
        cls, true: np.ndarray, predicted: np.ndarray, label_vocab: tuple[str, ...]
    ) -> "ConfusionMatrix":
        n = len(label_vocab)
        true = np.asarray(true, dtype=np.int64)
        predicted = np.asarray(predicted, dtype=np.int64)
        if true.shape != predicted.shape:
            raise ValueError(f"length mismatch: {true.shape} vs {predicted.shape}")
        if len(true) and (true.min() < 0 or true.max() >= n
                          or predicted.min() < 0 or predicted.max() >= n):
            raise ValueError("label index outside vocabulary")
        counts = np.bincount(true * n + predicted, minlength=n * n).reshape(n, n)
        return cls(counts=counts, label_vocab=label_vocab)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def supports(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def to_csv(self, path: str | Path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["true\\predicted", *self.label_vocab])
            for name, row in zip(self.label_vocab, self.counts):
                writer.writerow([name, *row.tolist()])


@dataclass(frozen=True)
class ClassAccuracy:
    label: str
    recall: float | None  # None when the class has no test support
    support: int


@dataclass(frozen=True)
class AccuracyReport:
    """Overall accuracy plus per-class recalls and their macro mean."""

    overall_accuracy: float
    macro_accuracy: float
    per_class: tuple[ClassAccuracy, ...]
    n_scored: int

    def recall(self, label: str) -> float | None:
        for entry in self.per_class:
            if entry.label == label:
                return entry.recall
        raise KeyError(label)

    def macro_over(self, labels) -> float:
        """Unweighted mean recall over the given classes (skipping absent ones)."""
        recalls = [self.recall(lab) for lab in labels]
        recalls = [r for r in recalls if r is not None]
        if not recalls:
            raise InsufficientDataError("none of the requested classes has test support")
        return float(np.mean(recalls))

    def format_row(self) -> str:
        """Paper-style cell: overall percent, then per-class percents, "-" if absent."""
        parts = [
            ABSENT_MARK if c.recall is None else f"{100 * c.recall:.0f}"
            for c in self.per_class
        ]
        return f"{100 * self.overall_accuracy:.0f} ({', '.join(parts)})"

    def to_dict(self) -> dict:
        return {
            "overall_accuracy": self.overall_accuracy,
            "macro_accuracy": self.macro_accuracy,
            "n_scored": self.n_scored,
            "per_class": [
                {"label": c.label, "recall": c.recall, "support": c.support}
                for c in self.per_class
            ],
        }


def score(
    true: np.ndarray, predicted: np.ndarray, label_vocab: tuple[str, ...]
) -> AccuracyReport:
    """Overall accuracy (mean exact agreement), per-class recalls, macro mean."""
    cm = ConfusionMatrix.from_labels(true, predicted, label_vocab)
    return score_confusion(cm)


def score_confusion(cm: ConfusionMatrix) -> AccuracyReport:
    total = cm.total
    if total == 0:
        raise InsufficientDataError("nothing to score")
    overall = float(np.trace(cm.counts) / total)
    per_class = []
    recalls = []
    for i, name in enumerate(cm.label_vocab):
        support = int(cm.supports[i])
        if support == 0:
            per_class.append(ClassAccuracy(name, None, 0))
        else:
            r = float(cm.counts[i, i] / support)
            per_class.append(ClassAccuracy(name, r, support))
            recalls.append(r)
    return AccuracyReport(
        overall_accuracy=overall,
        macro_accuracy=float(np.mean(recalls)),
        per_class=tuple(per_class),
        n_scored=total,
    )


def score_predictions(preds: Predictions) -> AccuracyReport:
    true, predicted = preds.scored()
    return score(true, predicted, preds.label_vocab)


def unify_label_space(datasets: list[FarmDataset]) -> list[FarmDataset]:
    """Re-index all farms against the union vocabulary in canonical order.

    Farms lacking a class end up with zero support for it; a model trained
    on any of the results has one output column per union class.
    """
    for ds in datasets:
        if ds.label_vocab[0] != "normal" or ds.label_vocab[-1] != "other":
            raise VocabularyError(
                f"farm {ds.farm_id!r} vocabulary must start with 'normal' and end "
                f"with 'other', got {ds.label_vocab}"
            )
    union = canonical_vocab(name for ds in datasets for name in ds.label_vocab)
    return [relabel(ds, union) for ds in datasets]


@dataclass(frozen=True)
class MixedResult:
    dataset: FarmDataset
    alignments: dict[str, AlignmentParams]


def build_mixed(
    datasets: list[FarmDataset],
    reference_farm_id: str,
    grid: GridSearchSpec | None = None,
    max_objective: float = 1.0,
    farm_id: str = "mixed",
) -> MixedResult:
    """Align every farm onto the reference and concatenate under a unified
    label space. Alignment quality above `max_objective` aborts, naming the
    offending farm (L1 distance between unit-mass histograms, so 2 is the
    maximum possible)."""
    if len(datasets) < 2:
        raise InsufficientDataError("mixing requires at least two farms")
    ids = [ds.farm_id for ds in datasets]
    if reference_farm_id not in ids:
        raise ValueError(f"reference farm {reference_farm_id!r} not among {ids}")
    unified = unify_label_space(datasets)
    reference = unified[ids.index(reference_farm_id)]
    aligned = []
    alignments: dict[str, AlignmentParams] = {}
    for ds in unified:
        if ds.farm_id == reference_farm_id:
            aligned.append(ds)
            continue
        params = fit_alignment(ds, reference, grid)
        if params.objective_value > max_objective:
            raise AlignmentQualityError(ds.farm_id, params.objective_value, max_objective)
        alignments[ds.farm_id] = params
        aligned.append(apply_alignment(ds, params))
    return MixedResult(dataset=concatenate(aligned, farm_id), alignments=alignments)


@dataclass(frozen=True)
class TransferCell:
    train_farm_id: str
    test_farm_id: str
    report: AccuracyReport
    alignment: AlignmentParams | None


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    """Accuracy reports for every (training farm, test farm) pair."""

    train_farm_ids: tuple[str, ...]
    test_farm_ids: tuple[str, ...]
    cells: dict[tuple[str, str], TransferCell]
    label_vocab: tuple[str, ...]
    config: dict
    seed: int
    aligned: bool

    def report(self, train_id: str, test_id: str) -> AccuracyReport:
        return self.cells[(train_id, test_id)].report

    def render(self) -> str:
        """Aligned-text table: rows are training farms, cells are
        "overall (per-class...)" percents with "-" for absent classes."""
        header = ["Test set"] + list(self.test_farm_ids)
        rows = [header]
        for tid in self.train_farm_ids:
            row = [f"{tid} [train]"]
            for kid in self.test_farm_ids:
                row.append(self.cells[(tid, kid)].report.format_row())
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
                 for row in rows]
        legend = "classes: " + ", ".join(self.label_vocab)
        return "\n".join([legend, *lines]) + "\n"

    def to_dict(self) -> dict:
        return {
            "train_farm_ids": list(self.train_farm_ids),
            "test_farm_ids": list(self.test_farm_ids),
            "label_vocab": list(self.label_vocab),
            "config": self.config,
            "seed": self.seed,
            "aligned": self.aligned,
            "cells": [
                {
                    "train_farm_id": c.train_farm_id,
                    "test_farm_id": c.test_farm_id,
                    "report": c.report.to_dict(),
                    "alignment": c.alignment.to_dict() if c.alignment else None,
                }
                for c in self.cells.values()
            ],
        }

    def save_json(self, path: str | Path, provenance: dict | None = None) -> None:
        payload = self.to_dict()
        if provenance:
            payload["provenance"] = provenance
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def transfer_experiment(
    train_farms: list[FarmDataset],
    test_farms: list[FarmDataset],
    config: ModelConfig,
    seed: int,
    align: bool = False,
    test_fraction: float = 1.0 / 3.0,
    epochs: int | None = None,
    batch_size: int | None = None,
    split_strategy: str = "by_contiguous_block",
    grid: GridSearchSpec | None = None,
) -> TransferMatrix:
    """Train on each training farm, score on every test farm.

    The in-farm cell (same farm id) scores the held-out 1/3 split; foreign
    farms are scored in full. With `align`, each foreign test farm is first
    remapped onto the training farm by a fitted affine wind-speed transform.
    Fully deterministic given the farm data, the seed and the config.
    """
    all_farms = list(train_farms) + [f for f in test_farms
                                     if f.farm_id not in {t.farm_id for t in train_farms}]
    unified = unify_label_space(all_farms)
    by_id = {ds.farm_id: ds for ds in unified}
    train_ids = tuple(ds.farm_id for ds in train_farms)
    test_ids = tuple(ds.farm_id for ds in test_farms)

    cells: dict[tuple[str, str], TransferCell] = {}
    vocab = unified[0].label_vocab
    for tid in train_ids:
        farm = by_id[tid]
        spec = SplitSpec(
            test_fraction=test_fraction,
            seed=derive_seed(seed, tid, "split"),
            strategy=split_strategy,
        )
        train_part, heldout = split(farm, spec)
        params = TrainParams(seed=derive_seed(seed, tid, "train"), epochs=epochs)
        if batch_size is not None:
            params.batch_size = batch_size
        bundle = train(config, train_part, params)
        for kid in test_ids:
            if kid == tid:
                eval_ds, alignment = heldout, None
            else:
                eval_ds = by_id[kid]
                alignment = None
                if align:
                    alignment = fit_alignment(eval_ds, train_part, grid)
                    eval_ds = apply_alignment(eval_ds, alignment)
            report = score_predictions(predict(bundle, eval_ds))
            cells[(tid, kid)] = TransferCell(tid, kid, report, alignment)

    return TransferMatrix(
        train_farm_ids=train_ids,
        test_farm_ids=test_ids,
        cells=cells,
        label_vocab=vocab,
        config=config_to_dict(config),
        seed=seed,
        aligned=align,
    )
