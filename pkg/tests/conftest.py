import numpy as np
import pytest

from windclf.data import FarmDataset, TurbineSeries, min_max_normalize
from windclf.synth import FarmProfile, generate_farm


def build_farm(farm_id="toy", turbines=None, signal_names=("wind_speed", "power"),
               label_vocab=("normal", "other")):
    """Hand-rolled farm from {turbine_id: (timestamps, values, labels)}."""
    series = tuple(
        TurbineSeries(
            turbine_id=tid,
            timestamps=np.asarray(ts, dtype=np.int64),
            values=np.asarray(vals, dtype=np.float64).reshape(len(ts), len(signal_names)),
            labels=np.asarray(labels, dtype=np.int64),
        )
        for tid, (ts, vals, labels) in (turbines or {}).items()
    )
    return FarmDataset(
        farm_id=farm_id,
        signal_names=tuple(signal_names),
        label_vocab=tuple(label_vocab),
        turbines=series,
    )


SMALL_PROFILE = FarmProfile(
    farm_id="small",
    months=1,
    n_turbines=2,
    seed=1234,
    class_mix={"normal": 0.8, "C1": 0.1, "C4": 0.07, "C2": 0.03},
)


@pytest.fixture(scope="session")
def small_farm():
    """Two turbines, one month, all five signals, four classes."""
    return generate_farm(SMALL_PROFILE)


@pytest.fixture(scope="session")
def small_farm_normalized(small_farm):
    return min_max_normalize(small_farm)
