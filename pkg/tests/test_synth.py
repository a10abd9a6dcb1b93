import dataclasses

import numpy as np
import pytest

from windclf.data import min_max_normalize
from windclf.errors import ConfigError
from windclf.synth import (
    DEFAULT_CLASS_EFFECTS,
    FarmProfile,
    default_noise_sd,
    generate_farm,
    ideal_power_curve,
    paired_profiles,
    plan_episodes,
    simulate_turbine,
)

from conftest import SMALL_PROFILE


class TestIdealPowerCurve:
    profile = FarmProfile(farm_id="p", cut_in=3.0, rated_speed=12.0, cut_out=25.0,
                          rated_power=2000.0)

    def test_cut_in_gives_zero(self):
        assert ideal_power_curve(self.profile, 3.0) == 0.0
        assert ideal_power_curve(self.profile, 0.0) == 0.0

    def test_rated_speed_gives_rated_power(self):
        assert ideal_power_curve(self.profile, 12.0) == pytest.approx(2000.0)
        assert ideal_power_curve(self.profile, 20.0) == pytest.approx(2000.0)

    def test_ramp_midpoint_is_eighth_of_rated(self):
        assert ideal_power_curve(self.profile, 7.5) == pytest.approx(0.125 * 2000.0)

    def test_zero_above_cut_out(self):
        assert ideal_power_curve(self.profile, 25.0) == 0.0
        assert ideal_power_curve(self.profile, 30.0) == 0.0

    def test_monotone_on_ramp(self):
        v = np.linspace(3.0, 12.0, 100)
        p = ideal_power_curve(self.profile, v)
        assert (np.diff(p) >= 0).all()


class TestProfileValidation:
    def test_bad_speed_ordering(self):
        with pytest.raises(ConfigError) as exc:
            FarmProfile(farm_id="x", cut_in=13.0, rated_speed=12.0)
        assert "cut_in" in str(exc.value)

    def test_class_mix_must_sum_to_one(self):
        with pytest.raises(ConfigError):
            FarmProfile(farm_id="x", class_mix={"normal": 0.8, "C1": 0.1})

    def test_normal_fraction_floor(self):
        with pytest.raises(ConfigError):
            FarmProfile(farm_id="x", class_mix={"normal": 0.5, "C1": 0.5})

    def test_unmapped_class_rejected(self):
        with pytest.raises(ConfigError) as exc:
            FarmProfile(farm_id="x", class_mix={"normal": 0.9, "mystery": 0.1})
        assert "mystery" in str(exc.value)

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError):
            FarmProfile.from_dict({"farm_id": "x", "blades": 3})


class TestGenerateFarm:
    def test_all_normal_mix(self):
        profile = FarmProfile(farm_id="n", months=1, n_turbines=1, seed=3,
                              class_mix={"normal": 1.0})
        farm = generate_farm(profile)
        counts = farm.label_counts()
        assert counts["normal"] == farm.n_records

    def test_label_histogram_matches_mix(self, small_farm):
        counts = small_farm.label_counts()
        n = small_farm.n_records
        for name, frac in SMALL_PROFILE.class_mix.items():
            assert abs(counts[name] / n - frac) <= 0.02

    def test_determinism(self):
        a = generate_farm(SMALL_PROFILE)
        b = generate_farm(SMALL_PROFILE)
        for ta, tb in zip(a.turbines, b.turbines):
            np.testing.assert_array_equal(ta.values, tb.values)
            np.testing.assert_array_equal(ta.labels, tb.labels)

    def test_normal_power_within_four_sigma_of_curve(self):
        # the invariant is stated against the true wind speed, so switch off
        # the anemometer noise to observe it directly
        profile = FarmProfile(
            farm_id="clean4", months=2, n_turbines=2, seed=77,
            class_mix={"normal": 0.85, "C1": 0.1, "C2": 0.05},
            noise_sd={"wind_speed": 0.0},
        )
        sd = profile.noise["power"]
        farm = generate_farm(profile)
        iws = farm.signal_names.index("wind_speed")
        ipw = farm.signal_names.index("power")
        for t in farm.turbines:
            mask = t.labels == 0
            curve = ideal_power_curve(profile, t.values[mask, iws])
            assert np.all(np.abs(t.values[mask, ipw] - curve) <= 4.0 * sd)

    def test_true_wind_invariant_via_noiseless_profile(self):
        profile = FarmProfile(
            farm_id="clean", months=1, n_turbines=1, seed=11,
            class_mix={"normal": 0.8, "C4": 0.2},
            noise_sd={"wind_speed": 0.0, "power": 25.0},
        )
        farm = generate_farm(profile)
        t = farm.turbines[0]
        normal = t.labels == 0
        ws = t.values[normal, farm.signal_names.index("wind_speed")]
        pw = t.values[normal, farm.signal_names.index("power")]
        assert np.all(np.abs(pw - ideal_power_curve(profile, ws)) <= 4.0 * 25.0)

    def test_signals_present(self, small_farm):
        assert small_farm.signal_names == (
            "wind_speed", "power", "rotor_speed", "pitch", "ambient_temp"
        )

    def test_vocab_canonical(self, small_farm):
        assert small_farm.label_vocab == ("normal", "C1", "C2", "C4", "other")


class TestEpisodes:
    def test_intervals_never_overlap(self):
        _, episodes = simulate_turbine(SMALL_PROFILE, "T01")
        by_turbine = sorted(episodes, key=lambda e: e.start)
        for a, b in zip(by_turbine, by_turbine[1:]):
            assert a.end <= b.start

    def test_effects_follow_mapping(self):
        _, episodes = simulate_turbine(SMALL_PROFILE, "T01")
        for e in episodes:
            assert e.effect == DEFAULT_CLASS_EFFECTS[e.class_name]

    def test_plan_counts_exact(self):
        rng = np.random.default_rng(0)
        mix = {"normal": 0.8, "C1": 0.12, "C4": 0.08}
        n = 20_000
        plan = plan_episodes(rng, n, mix, DEFAULT_CLASS_EFFECTS)
        totals = {}
        for name, start, end, _ in plan:
            totals[name] = totals.get(name, 0) + (end - start)
        assert totals["C1"] == round(0.12 * n)
        assert totals["C4"] == round(0.08 * n)

    def test_zero_power_records_have_zero_power(self, small_farm):
        c4 = small_farm.label_vocab.index("C4")
        ipw = small_farm.signal_names.index("power")
        irot = small_farm.signal_names.index("rotor_speed")
        for t in small_farm.turbines:
            mask = t.labels == c4
            assert np.all(t.values[mask, ipw] == 0.0)
            assert np.all(t.values[mask, irot] == 0.0)

    def test_icing_speeds_lowered(self):
        profile = dataclasses.replace(
            SMALL_PROFILE, class_mix={"normal": 0.8, "C1": 0.2},
            noise_sd={"wind_speed": 0.0},
        )
        farm = generate_farm(profile)
        t = farm.turbines[0]
        c1 = farm.label_vocab.index("C1")
        iws = farm.signal_names.index("wind_speed")
        irot = farm.signal_names.index("rotor_speed")
        icing = t.values[t.labels == c1]
        # measured speed is 0.6x true wind; rotor still follows true wind
        expected_rotor = np.minimum(
            icing[:, iws] / 0.6 / profile.rated_speed, 1.0
        ) * profile.rotor_rated
        running = icing[:, iws] / 0.6 < profile.cut_out
        err = np.abs(icing[running, irot] - expected_rotor[running])
        assert np.quantile(err, 0.99) < 4 * profile.noise["rotor_speed"]


class TestPairedProfiles:
    def test_identity_shift(self):
        first, second = paired_profiles(SMALL_PROFILE, (1.0, 0.0))
        assert first == SMALL_PROFILE
        assert second == SMALL_PROFILE

    def test_speed_params_shifted(self):
        base = FarmProfile(farm_id="a", cut_in=3.0)
        _, moved = paired_profiles(base, (1.2, 0.5), farm_id="b", seed=9)
        assert moved.cut_in == pytest.approx(1.2 * 3.0 + 0.5)
        assert moved.rated_speed == pytest.approx(1.2 * base.rated_speed + 0.5)
        assert moved.cut_out == pytest.approx(1.2 * base.cut_out + 0.5)
        assert moved.farm_id == "b"
        assert moved.seed == 9
        # wind climate must not move with the turbine parameters
        assert moved.wind_scale == base.wind_scale

    def test_bad_shift_rejected(self):
        with pytest.raises(ConfigError):
            paired_profiles(FarmProfile(farm_id="a"), (0.0, -1.0))


def test_default_noise_scales_with_rated_power():
    assert default_noise_sd(2000.0)["power"] == pytest.approx(16.0)
    assert default_noise_sd(1000.0)["power"] == pytest.approx(8.0)
