"""Synthetic labeled farm generator.

Produces SCADA-like 10-minute series per turbine: wind speed follows an
autocorrelated process with a Weibull marginal, power follows the turbine's
ideal curve plus truncated Gaussian noise, and pitch / rotor speed are
deterministic functions of wind speed plus noise. Abnormal-status episodes
(anemometer icing, derating, unavailability, partial output, spurious
scatter) are injected as non-overlapping intervals so that the per-class
record fractions match the requested mix almost exactly.

Everything is a pure function of the profile: per-turbine streams use
sub-seeds derived from (seed, turbine_id), so farms are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtr

from .data import FarmDataset, TurbineSeries, canonical_vocab, derive_seed
from .errors import ConfigError

SIGNALS = ("wind_speed", "power", "rotor_speed", "pitch", "ambient_temp")

SAMPLES_PER_DAY = 144  # 10-minute sampling
SAMPLES_PER_MONTH = 30 * SAMPLES_PER_DAY

#: effect applied to records of each abnormal class
DEFAULT_CLASS_EFFECTS = {
    "C1": "icing_bias",
    "C2": "spurious_scatter",
    "C3": "derate_cap",
    "C4": "zero_power",
    "other": "partial_power",
}

EFFECTS = ("icing_bias", "derate_cap", "zero_power", "partial_power", "spurious_scatter")

#: episode length bounds: 1 hour to 3 days, drawn log-uniform
MIN_EPISODE_SAMPLES = 6
MAX_EPISODE_SAMPLES = 3 * SAMPLES_PER_DAY

ICING_SPEED_FACTOR = 0.6
DERATE_CAP_RANGE = (0.3, 0.6)  # fraction of rated power
PARTIAL_POWER_RANGE = (0.2, 0.8)
FEATHER_PITCH = 87.0  # deg; blades feather when the turbine is stopped

AR_COEFFICIENT = 0.95  # 10-minute wind persistence


def default_noise_sd(rated_power: float) -> dict[str, float]:
    return {
        "wind_speed": 0.15,
        "power": 0.008 * rated_power,
        "rotor_speed": 0.15,
        "pitch": 0.3,
        "ambient_temp": 1.5,
    }


@dataclass(frozen=True)
class FarmProfile:
    """Parameters of one synthetic farm."""

    farm_id: str
    cut_in: float = 3.0
    rated_speed: float = 12.0
    cut_out: float = 25.0
    rated_power: float = 2000.0
    n_turbines: int = 5
    months: int = 18
    class_mix: dict[str, float] = field(default_factory=lambda: {"normal": 1.0})
    noise_sd: dict[str, float] | None = None
    seed: int = 0
    # wind climate and drivetrain constants (not varied by paired_profiles)
    weibull_shape: float = 2.0
    weibull_scale: float | None = None  # None -> 0.8 * rated_speed
    rotor_rated: float = 15.0  # rpm
    pitch_max: float = 25.0  # deg
    class_effects: dict[str, str] | None = None  # None -> DEFAULT_CLASS_EFFECTS

    def __post_init__(self):
        if not 0 < self.cut_in < self.rated_speed < self.cut_out:
            raise ConfigError(
                "need 0 < cut_in < rated_speed < cut_out, got "
                f"cut_in={self.cut_in}, rated_speed={self.rated_speed}, "
                f"cut_out={self.cut_out}"
            )
        if self.rated_power <= 0:
            raise ConfigError(f"rated_power must be positive, got {self.rated_power}")
        if self.n_turbines < 1:
            raise ConfigError(f"n_turbines must be >= 1, got {self.n_turbines}")
        if self.months < 1:
            raise ConfigError(f"months must be >= 1, got {self.months}")
        total = sum(self.class_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"class_mix fractions must sum to 1, got {total}")
        if any(f < 0 for f in self.class_mix.values()):
            raise ConfigError("class_mix fractions must be non-negative")
        if self.class_mix.get("normal", 0.0) < 0.7:
            raise ConfigError(
                "'normal' fraction must be at least 0.7, got "
                f"{self.class_mix.get('normal', 0.0)}"
            )
        effects = self.effects_map
        for name in self.class_mix:
            if name == "normal":
                continue
            if name not in effects:
                raise ConfigError(f"class {name!r} has no effect mapping")
            if effects[name] not in EFFECTS:
                raise ConfigError(f"class {name!r} maps to unknown effect {effects[name]!r}")
        if self.noise_sd is not None and any(v < 0 for v in self.noise_sd.values()):
            raise ConfigError("noise_sd values must be non-negative")

    @property
    def effects_map(self) -> dict[str, str]:
        return self.class_effects if self.class_effects is not None else DEFAULT_CLASS_EFFECTS

    @property
    def wind_scale(self) -> float:
        return self.weibull_scale if self.weibull_scale is not None else 0.8 * self.rated_speed

    @property
    def noise(self) -> dict[str, float]:
        base = default_noise_sd(self.rated_power)
        if self.noise_sd:
            base.update(self.noise_sd)
        return base

    @property
    def n_samples_per_turbine(self) -> int:
        return self.months * SAMPLES_PER_MONTH

    def to_dict(self) -> dict:
        return {
            "farm_id": self.farm_id,
            "cut_in": self.cut_in,
            "rated_speed": self.rated_speed,
            "cut_out": self.cut_out,
            "rated_power": self.rated_power,
            "n_turbines": self.n_turbines,
            "months": self.months,
            "class_mix": dict(self.class_mix),
            "noise_sd": dict(self.noise_sd) if self.noise_sd is not None else None,
            "seed": self.seed,
            "weibull_shape": self.weibull_shape,
            "weibull_scale": self.weibull_scale,
            "rotor_rated": self.rotor_rated,
            "pitch_max": self.pitch_max,
            "class_effects": dict(self.class_effects) if self.class_effects is not None else None,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "FarmProfile":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown profile fields: {sorted(unknown)}")
        if "farm_id" not in raw:
            raise ConfigError("profile requires a farm_id")
        return cls(**raw)


@dataclass(frozen=True)
class StatusEpisode:
    """One injected abnormal interval on one turbine (end exclusive)."""

    class_name: str
    turbine_id: str
    start: int  # timestamp, minutes
    end: int
    effect: str

    def __post_init__(self):
        if self.start >= self.end:
            raise ConfigError(f"episode start {self.start} must precede end {self.end}")


def ideal_power_curve(profile: FarmProfile, wind_speed) -> np.ndarray | float:
    """Ground-truth power (kW) at a given true wind speed (m/s).

    Zero below cut-in and at/above cut-out, rated on [rated_speed, cut_out),
    and a smooth cubic ramp in between.
    """
    v = np.asarray(wind_speed, dtype=np.float64)
    frac = np.clip((v - profile.cut_in) / (profile.rated_speed - profile.cut_in), 0.0, 1.0)
    power = profile.rated_power * frac**3
    power = np.where(v >= profile.cut_out, 0.0, power)
    if np.ndim(wind_speed) == 0:
        return float(power)
    return power


def inverse_power_curve(profile: FarmProfile, power) -> np.ndarray | float:
    """Wind speed on the ramp that produces a given power (analytic inverse).

    Only meaningful for power in [0, rated_power]; powers at or above rated
    map to rated_speed.
    """
    p = np.clip(np.asarray(power, dtype=np.float64) / profile.rated_power, 0.0, 1.0)
    v = profile.cut_in + (profile.rated_speed - profile.cut_in) * np.cbrt(p)
    if np.ndim(power) == 0:
        return float(v)
    return v


def paired_profiles(
    base: FarmProfile,
    shift: tuple[float, float],
    farm_id: str | None = None,
    seed: int | None = None,
) -> tuple[FarmProfile, FarmProfile]:
    """Create a (reference, shifted) profile pair.

    The second profile's turbine speed parameters (cut_in, rated_speed,
    cut_out) are `v -> a*v + b` of the first's; the wind climate, class mix
    and everything else stay the same, so the pair shares weather but has
    genuinely different power curves. With shift (1, 0) and no overrides the
    two profiles are identical.
    """
    a, b = shift
    moved = {
        "cut_in": a * base.cut_in + b,
        "rated_speed": a * base.rated_speed + b,
        "cut_out": a * base.cut_out + b,
    }
    if not 0 < moved["cut_in"] < moved["rated_speed"] < moved["cut_out"]:
        raise ConfigError(
            f"shift {shift} breaks speed ordering: {moved}"
        )
    if base.weibull_scale is None and moved["rated_speed"] != base.rated_speed:
        # pin the climate before the rated_speed-derived default moves with it
        moved["weibull_scale"] = base.wind_scale
    if farm_id is not None:
        moved["farm_id"] = farm_id
    if seed is not None:
        moved["seed"] = seed
    return base, replace(base, **moved)


def _draw_episode_length(rng: np.random.Generator, lo: int, hi: int) -> int:
    u = rng.uniform(math.log(lo), math.log(hi))
    return int(round(math.exp(u)))


def plan_episodes(
    rng: np.random.Generator,
    n_samples: int,
    class_mix: dict[str, float],
    effects_map: dict[str, str],
) -> list[tuple[str, int, int, str]]:
    """Place non-overlapping abnormal episodes covering round(frac * n) samples per class.

    Returns (class_name, start_index, end_index) tuples with end exclusive.
    Episode lengths are drawn log-uniform between one hour and three days,
    clipped to the remaining need and to the chosen free gap.
    """
    episodes: list[tuple[str, int, int, str]] = []
    gaps: list[tuple[int, int]] = [(0, n_samples)]
    for class_name in sorted(class_mix):
        if class_name == "normal":
            continue
        need = int(round(class_mix[class_name] * n_samples))
        while need > 0 and gaps:
            length = min(_draw_episode_length(rng, MIN_EPISODE_SAMPLES, MAX_EPISODE_SAMPLES), need)
            capacities = np.array([max(0, (g1 - g0) - length + 1) for g0, g1 in gaps])
            total = capacities.sum()
            if total == 0:
                # no gap fits: shrink to the largest gap
                widths = [g1 - g0 for g0, g1 in gaps]
                gi = int(np.argmax(widths))
                length = min(widths[gi], need)
                start = gaps[gi][0]
            else:
                gi = int(rng.choice(len(gaps), p=capacities / total))
                g0, g1 = gaps[gi]
                start = int(rng.integers(g0, g1 - length + 1))
            g0, g1 = gaps.pop(gi)
            end = start + length
            if start > g0:
                gaps.append((g0, start))
            if end < g1:
                gaps.append((end, g1))
            episodes.append((class_name, start, end, effects_map[class_name]))
            need -= length
    episodes.sort(key=lambda e: e[1])
    return episodes


def _simulate_wind(rng: np.random.Generator, profile: FarmProfile, n: int) -> np.ndarray:
    """AR(1) Gaussian process mapped through the Weibull quantile function."""
    eps = rng.standard_normal(n)
    z0 = rng.standard_normal()
    phi = AR_COEFFICIENT
    z, _ = lfilter([math.sqrt(1.0 - phi**2)], [1.0, -phi], eps, zi=[phi * z0])
    tail = ndtr(-z)  # 1 - Phi(z), computed stably
    return profile.wind_scale * (-np.log(tail)) ** (1.0 / profile.weibull_shape)


def simulate_turbine(
    profile: FarmProfile, turbine_id: str
) -> tuple[TurbineSeries, list[StatusEpisode]]:
    """Generate one turbine's series and its injected episodes."""
    n = profile.n_samples_per_turbine
    rng = np.random.default_rng(derive_seed(profile.seed, turbine_id))
    noise = profile.noise

    v_true = _simulate_wind(rng, profile, n)
    curve = ideal_power_curve(profile, v_true)

    # truncate power noise so normal records stay within 4 sigma of the curve
    pw_noise = np.clip(rng.standard_normal(n), -3.9, 3.9) * noise["power"]
    power = np.maximum(curve + pw_noise, 0.0)

    ws = np.maximum(v_true + rng.standard_normal(n) * noise["wind_speed"], 0.0)

    running = v_true < profile.cut_out
    rotor_base = np.where(
        running, profile.rotor_rated * np.minimum(v_true / profile.rated_speed, 1.0), 0.0
    )
    rotor = np.maximum(rotor_base + rng.standard_normal(n) * noise["rotor_speed"], 0.0)

    pitch_base = profile.pitch_max * np.clip(
        (v_true - profile.rated_speed) / (profile.cut_out - profile.rated_speed), 0.0, 1.0
    )
    pitch = np.maximum(pitch_base + rng.standard_normal(n) * noise["pitch"], 0.0)

    day = np.arange(n) / SAMPLES_PER_DAY
    temp = (
        12.0
        + 8.0 * np.sin(2.0 * math.pi * day / 365.0)
        + 4.0 * np.sin(2.0 * math.pi * day)
        + rng.standard_normal(n) * noise["ambient_temp"]
    )

    vocab = canonical_vocab(profile.class_mix)
    label_index = {name: i for i, name in enumerate(vocab)}
    labels = np.zeros(n, dtype=np.int64)  # all "normal" (index 0)

    plan = plan_episodes(rng, n, profile.class_mix, profile.effects_map)
    episodes = []
    for class_name, start, end, effect in plan:
        sl = slice(start, end)
        labels[sl] = label_index[class_name]
        if effect == "icing_bias":
            ws[sl] *= ICING_SPEED_FACTOR
        elif effect == "derate_cap":
            cap = rng.uniform(*DERATE_CAP_RANGE) * profile.rated_power
            power[sl] = np.minimum(power[sl], cap)
        elif effect == "zero_power":
            # a stopped turbine: no output, rotor at rest, blades feathered
            power[sl] = 0.0
            rotor[sl] = 0.0
            pitch[sl] = np.maximum(
                FEATHER_PITCH + rng.standard_normal(end - start) * noise["pitch"], 0.0
            )
        elif effect == "partial_power":
            power[sl] *= rng.uniform(*PARTIAL_POWER_RANGE)
        elif effect == "spurious_scatter":
            # garbage sensor readings: uniform over the observed weather range
            # (not over turbine constants, which differ between farm pairs)
            m = end - start
            ws[sl] = rng.uniform(0.0, float(v_true.max()), m)
            power[sl] = rng.uniform(0.0, profile.rated_power, m)
            rotor[sl] = rng.uniform(0.0, profile.rotor_rated, m)
            pitch[sl] = rng.uniform(0.0, FEATHER_PITCH, m)
        episodes.append(
            StatusEpisode(
                class_name=class_name,
                turbine_id=turbine_id,
                start=start * 10,
                end=end * 10,
                effect=effect,
            )
        )

    timestamps = np.arange(n, dtype=np.int64) * 10
    values = np.column_stack([ws, power, rotor, pitch, temp])
    series = TurbineSeries(turbine_id, timestamps, values, labels)
    return series, episodes


def generate_farm(profile: FarmProfile) -> FarmDataset:
    """Generate the full labeled farm dataset described by a profile."""
    turbines = []
    for i in range(profile.n_turbines):
        turbine_id = f"T{i + 1:02d}"
        series, _ = simulate_turbine(profile, turbine_id)
        turbines.append(series)
    return FarmDataset(
        farm_id=profile.farm_id,
        signal_names=SIGNALS,
        label_vocab=canonical_vocab(profile.class_mix),
        turbines=tuple(turbines),
    )
