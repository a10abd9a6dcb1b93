"""Time-window samples: each record becomes a signals x timesteps matrix.

A centered window of half-width k spans t-k .. t+k around the labeled
record; a causal window spans t-k .. t and suits online classification.
Windows require contiguous timestamps (one sampling period between
neighboring columns), never span turbines, and are dropped (not padded)
near series boundaries and data gaps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import FarmDataset
from .errors import SchemaError

DEFAULT_WINDOW_SIGNALS = ("wind_speed", "power", "rotor_speed", "pitch")


@dataclass(frozen=True)
class WindowSpec:
    """Window geometry: half-width k and centered/causal mode."""

    half_width: int = 4
    mode: str = "centered"  # or "causal"
    signal_names: tuple[str, ...] = DEFAULT_WINDOW_SIGNALS

    def __post_init__(self):
        if self.half_width < 0:
            raise ValueError(f"half_width must be >= 0, got {self.half_width}")
        if self.mode not in ("centered", "causal"):
            raise ValueError(f"unknown window mode {self.mode!r}")

    @property
    def width(self) -> int:
        return 2 * self.half_width + 1 if self.mode == "centered" else self.half_width + 1

    @property
    def n_signals(self) -> int:
        return len(self.signal_names)


@dataclass(frozen=True, eq=False)
class WindowSample:
    """One p x w matrix (rows = signals, columns = time order) plus provenance.

    The label belongs to the central column for centered windows and to the
    final column for causal windows.
    """

    matrix: np.ndarray  # (p, w)
    label_index: int
    timestamp: int
    turbine_id: str


def make_windows(
    ds: FarmDataset, spec: WindowSpec, require_label: bool = True
) -> list[WindowSample]:
    """Extract all valid window samples from a dataset.

    With `require_label` (the training default) only labeled records produce
    samples; for prediction, pass False to window every record whose
    neighborhood exists (label_index is then -1 for unlabeled ones).
    """
    cols = [ds.signal_index(name) for name in spec.signal_names]
    k = spec.half_width
    before = k
    after = k if spec.mode == "centered" else 0
    width = spec.width
    step = ds.period_minutes

    samples: list[WindowSample] = []
    for series in ds.turbines:
        n = len(series)
        if n < width:
            continue
        sub = np.ascontiguousarray(series.values[:, cols])
        ts = series.timestamps
        # boundaries of runs with contiguous timestamps
        breaks = np.flatnonzero(np.diff(ts) != step)
        starts = np.concatenate(([0], breaks + 1))
        ends = np.concatenate((breaks + 1, [n]))
        for a, b in zip(starts, ends):
            first = a + before
            last = b - after  # exclusive
            if first >= last:
                continue
            centers = np.arange(first, last)
            if require_label:
                centers = centers[series.labels[centers] >= 0]
            for c in centers:
                samples.append(
                    WindowSample(
                        matrix=sub[c - before : c + after + 1].T,
                        label_index=int(series.labels[c]),
                        timestamp=int(ts[c]),
                        turbine_id=series.turbine_id,
                    )
                )
    return samples


def stack_windows(samples: list[WindowSample]) -> tuple[np.ndarray, np.ndarray]:
    """Stack samples into (n, p, w) inputs and (n,) label indices."""
    if not samples:
        raise ValueError("no window samples to stack")
    x = np.stack([s.matrix for s in samples])
    y = np.array([s.label_index for s in samples], dtype=np.int64)
    return x, y


def save_window_cache(path, samples: list[WindowSample]) -> None:
    """Binary cache of window tensors to skip re-windowing between runs."""
    x, y = stack_windows(samples)
    ts = np.array([s.timestamp for s in samples], dtype=np.int64)
    turbines = np.array([s.turbine_id for s in samples])
    np.savez_compressed(path, x=x, y=y, timestamps=ts, turbine_ids=turbines)


def load_window_cache(path) -> list[WindowSample]:
    data = np.load(path, allow_pickle=False)
    return [
        WindowSample(
            matrix=data["x"][i],
            label_index=int(data["y"][i]),
            timestamp=int(data["timestamps"][i]),
            turbine_id=str(data["turbine_ids"][i]),
        )
        for i in range(len(data["y"]))
    ]
