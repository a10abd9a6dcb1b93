"""Power-curve baselines and affine wind-speed alignment between farms.

The characteristic power curve of a farm is learned from operational data
by a 2D wind-speed x power histogram: for each power bin, the baseline is
the wind-speed bin center with maximum frequency. Farms with different
turbine types have different baselines; an affine transform of the wind
speed (scale alpha, shift beta) is fitted to superimpose one farm's
histogrammed distribution onto a reference farm's by minimizing the L1
distance between the density-normalized histograms.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .data import NORMAL_CLASS, FarmDataset
from .errors import InsufficientDataError, SchemaError

DEFAULT_BINS = 64

WIND_SPEED = "wind_speed"
POWER = "power"


@dataclass(frozen=True, eq=False)
class Histogram2D:
    """Counts of (wind_speed, power) pairs on a uniform grid over [0, 1]^2."""

    ws_edges: np.ndarray  # (n_ws + 1,) ascending
    pw_edges: np.ndarray  # (n_pw + 1,) ascending
    counts: np.ndarray  # (n_ws, n_pw) int64

    @property
    def n_ws(self) -> int:
        return len(self.ws_edges) - 1

    @property
    def n_pw(self) -> int:
        return len(self.pw_edges) - 1

    @property
    def ws_centers(self) -> np.ndarray:
        return 0.5 * (self.ws_edges[:-1] + self.ws_edges[1:])

    @property
    def pw_centers(self) -> np.ndarray:
        return 0.5 * (self.pw_edges[:-1] + self.pw_edges[1:])

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True, eq=False)
class PowerCurveBaseline:
    """Mode wind speed per power bin. NaN marks bins with too little support."""

    pw_bin_centers: np.ndarray  # (n_pw,)
    ws_mode: np.ndarray  # (n_pw,) bin-center wind speed, NaN where unsupported
    support_counts: np.ndarray  # (n_pw,) points per power bin

    @property
    def supported(self) -> np.ndarray:
        return ~np.isnan(self.ws_mode)

    def to_csv(self, path: str | Path, header_comment: str | None = None) -> None:
        """Two-column CSV (power_bin_center, ws_mode) for plotting."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["power_bin_center", "ws_mode"])
            for p, w in zip(self.pw_bin_centers, self.ws_mode):
                writer.writerow([repr(float(p)), "" if np.isnan(w) else repr(float(w))])


@dataclass(frozen=True)
class AlignmentParams:
    """Affine wind-speed transform mapping a source farm onto a reference."""

    alpha: float
    beta: float
    objective_value: float
    reference_farm_id: str
    source_farm_id: str

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "objective_value": self.objective_value,
            "reference_farm_id": self.reference_farm_id,
            "source_farm_id": self.source_farm_id,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "AlignmentParams":
        return cls(
            alpha=float(raw["alpha"]),
            beta=float(raw["beta"]),
            objective_value=float(raw["objective_value"]),
            reference_farm_id=str(raw["reference_farm_id"]),
            source_farm_id=str(raw["source_farm_id"]),
        )

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        payload = self.to_dict()
        if extra:
            payload.update(extra)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


@dataclass(frozen=True)
class GridSearchSpec:
    """Coarse grid for the alignment search, refined by Nelder-Mead."""

    alpha_range: tuple[float, float] = (0.5, 2.0)
    beta_range: tuple[float, float] = (-0.5, 0.5)
    n_alpha: int = 31
    n_beta: int = 21
    n_bins: int = DEFAULT_BINS
    refine: bool = True


def _ws_power(ds: FarmDataset) -> tuple[np.ndarray, np.ndarray]:
    for name in (WIND_SPEED, POWER):
        if name not in ds.signal_names:
            raise SchemaError(f"farm {ds.farm_id!r} lacks required signal {name!r}")
    return ds.signal_column(WIND_SPEED), ds.signal_column(POWER)


def _bin_index(values: np.ndarray, n_bins: int) -> np.ndarray:
    """Uniform [0, 1] binning: right-closed final bin, out-of-range clipped."""
    idx = np.floor(values * n_bins).astype(np.int64)
    return np.clip(idx, 0, n_bins - 1)


def histogram2d(ds: FarmDataset, n_ws: int = DEFAULT_BINS, n_pw: int = DEFAULT_BINS) -> Histogram2D:
    """2D histogram of (wind_speed, power) over uniform bins on [0, 1]^2.

    The dataset must already be min-max normalized. Every record is counted:
    values outside [0, 1] are clipped into the edge bins.
    """
    if n_ws < 2 or n_pw < 2:
        raise ValueError(f"need at least 2 bins per axis, got {n_ws} x {n_pw}")
    ws, pw = _ws_power(ds)
    counts = np.zeros((n_ws, n_pw), dtype=np.int64)
    if len(ws):
        flat = _bin_index(ws, n_ws) * n_pw + _bin_index(pw, n_pw)
        counts = np.bincount(flat, minlength=n_ws * n_pw).reshape(n_ws, n_pw)
    return Histogram2D(
        ws_edges=np.linspace(0.0, 1.0, n_ws + 1),
        pw_edges=np.linspace(0.0, 1.0, n_pw + 1),
        counts=counts,
    )


def extract_baseline(h: Histogram2D, min_support: int = 10) -> PowerCurveBaseline:
    """Mode wind-speed per power bin; ties broken toward lower wind speed.

    Power bins whose column total is below `min_support` are marked absent
    (NaN) instead of extrapolated.
    """
    support = h.counts.sum(axis=0)
    mode_idx = h.counts.argmax(axis=0)  # first maximum = lowest wind speed
    ws_mode = h.ws_centers[mode_idx]
    ws_mode = np.where(support >= max(min_support, 1), ws_mode, np.nan)
    return PowerCurveBaseline(
        pw_bin_centers=h.pw_centers.copy(),
        ws_mode=ws_mode,
        support_counts=support,
    )


def normal_records_only(ds: FarmDataset) -> FarmDataset:
    """Keep only records labeled "normal"; pass through if nothing is labeled.

    The baseline can be learned from all data because turbines run normally
    most of the time, but when labels exist, filtering is strictly better.
    """
    if not any((t.labels >= 0).any() for t in ds.turbines):
        return ds
    normal_idx = ds.label_vocab.index(NORMAL_CLASS)
    turbines = []
    for t in ds.turbines:
        mask = t.labels == normal_idx
        turbines.append(
            replace(t, timestamps=t.timestamps[mask], values=t.values[mask], labels=t.labels[mask])
        )
    return replace(ds, turbines=tuple(turbines))


def learn_baseline(
    ds: FarmDataset,
    n_ws: int = DEFAULT_BINS,
    n_pw: int = DEFAULT_BINS,
    min_support: int = 10,
) -> PowerCurveBaseline:
    """Histogram + mode extraction on normal-operation records."""
    return extract_baseline(histogram2d(normal_records_only(ds), n_ws, n_pw), min_support)


class _AlignmentObjective:
    """L1 distance between density-normalized 2D histograms, as a function
    of the affine wind-speed transform applied to the source."""

    def __init__(self, source: FarmDataset, reference: FarmDataset, n_bins: int):
        ws_ref, pw_ref = _ws_power(reference)
        ws_src, pw_src = _ws_power(source)
        if len(ws_ref) == 0 or len(ws_src) == 0:
            raise InsufficientDataError("alignment requires non-empty source and reference")
        self.n_bins = n_bins
        ref_flat = _bin_index(ws_ref, n_bins) * n_bins + _bin_index(pw_ref, n_bins)
        self.ref_density = np.bincount(ref_flat, minlength=n_bins * n_bins) / len(ws_ref)
        self.ws_src = ws_src
        self.pw_src_idx = _bin_index(pw_src, n_bins)
        self.src_total = len(ws_src)

    def __call__(self, params) -> float:
        alpha, beta = params
        if alpha <= 0:
            return np.inf
        flat = _bin_index(alpha * self.ws_src + beta, self.n_bins) * self.n_bins + self.pw_src_idx
        src_density = np.bincount(flat, minlength=self.n_bins * self.n_bins) / self.src_total
        return float(np.abs(self.ref_density - src_density).sum())


def fit_alignment(
    source: FarmDataset,
    reference: FarmDataset,
    grid: GridSearchSpec | None = None,
) -> AlignmentParams:
    """Fit (alpha, beta) so that `alpha * ws + beta` superimposes the source's
    (wind_speed, power) distribution onto the reference's.

    Both datasets must be min-max normalized. The optimization is a coarse
    grid search followed by Nelder-Mead refinement from the best grid point.
    """
    grid = grid or GridSearchSpec()
    objective = _AlignmentObjective(source, reference, grid.n_bins)

    alphas = np.linspace(*grid.alpha_range, grid.n_alpha)
    betas = np.linspace(*grid.beta_range, grid.n_beta)
    best = (1.0, 0.0)
    best_value = np.inf
    for a in alphas:
        for b in betas:
            value = objective((a, b))
            if value < best_value:
                best_value = value
                best = (float(a), float(b))

    alpha, beta = best
    if grid.refine:
        da = (grid.alpha_range[1] - grid.alpha_range[0]) / max(grid.n_alpha - 1, 1)
        db = (grid.beta_range[1] - grid.beta_range[0]) / max(grid.n_beta - 1, 1)
        result = minimize(
            objective,
            x0=np.array(best),
            method="Nelder-Mead",
            options={
                "initial_simplex": np.array(
                    [best, (alpha + da, beta), (alpha, beta + db)]
                ),
                "xatol": 1e-4,
                "fatol": 1e-6,
                "maxiter": 400,
            },
        )
        if result.fun <= best_value and result.x[0] > 0:
            alpha, beta = float(result.x[0]), float(result.x[1])
            best_value = float(result.fun)

    return AlignmentParams(
        alpha=alpha,
        beta=beta,
        objective_value=best_value,
        reference_farm_id=reference.farm_id,
        source_farm_id=source.farm_id,
    )


def apply_alignment(ds: FarmDataset, params: AlignmentParams) -> FarmDataset:
    """Remap wind speed by `clip(alpha * ws + beta, 0, 1)`; other signals and
    labels are untouched."""
    j = ds.signal_index(WIND_SPEED)
    turbines = []
    for t in ds.turbines:
        values = t.values.copy()
        values[:, j] = np.clip(params.alpha * values[:, j] + params.beta, 0.0, 1.0)
        turbines.append(replace(t, values=values))
    return replace(ds, turbines=tuple(turbines))


def export_scatter_csv(
    ds: FarmDataset,
    path: str | Path,
    max_points: int | None = 20000,
    seed: int = 0,
    header_comment: str | None = None,
) -> None:
    """(wind_speed, power, label) triples for external scatter plotting.

    Subsamples deterministically when the farm exceeds `max_points`.
    """
    ws, pw = _ws_power(ds)
    labels = ds.all_labels()
    n = len(ws)
    idx = np.arange(n)
    if max_points is not None and n > max_points:
        idx = np.sort(np.random.default_rng(seed).choice(n, max_points, replace=False))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["wind_speed", "power", "label"])
        for i in idx:
            name = "" if labels[i] < 0 else ds.label_vocab[labels[i]]
            writer.writerow([repr(float(ws[i])), repr(float(pw[i])), name])
