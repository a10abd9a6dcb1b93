import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from windclf.data import min_max_normalize
from windclf.errors import AlignmentQualityError, InsufficientDataError
from windclf.evaluate import (
    ABSENT_MARK,
    AccuracyReport,
    ConfusionMatrix,
    build_mixed,
    score,
    score_confusion,
    transfer_experiment,
    unify_label_space,
)
from windclf.models import KnnConfig
from windclf.synth import FarmProfile, generate_farm, paired_profiles

from conftest import build_farm


VOCAB6 = ("normal", "C1", "C2", "C3", "C4", "other")


class TestScore:
    def test_all_correct(self):
        r = score(np.array([0, 1, 2]), np.array([0, 1, 2]), ("normal", "C1", "other"))
        assert r.overall_accuracy == 1.0
        assert r.macro_accuracy == 1.0
        assert all(c.recall == 1.0 for c in r.per_class if c.support)

    def test_worked_example(self):
        r = score(np.array([0, 0, 1, 1]), np.array([0, 1, 1, 1]), ("normal", "other"))
        assert r.overall_accuracy == 0.75
        assert r.recall("normal") == 0.5
        assert r.recall("other") == 1.0
        assert r.macro_accuracy == 0.75

    def test_zero_support_class_absent(self):
        r = score(np.array([0, 0]), np.array([0, 1]), ("normal", "C1", "other"))
        assert r.recall("C1") is None
        assert r.recall("other") is None
        assert r.macro_accuracy == 0.5  # only "normal" enters
        assert ABSENT_MARK in r.format_row()

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            score(np.array([0]), np.array([0, 1]), ("normal", "other"))

    def test_matches_confusion_matrix_oracle(self):
        rng = np.random.default_rng(99)
        true = rng.integers(0, 6, size=1000)
        pred = rng.integers(0, 6, size=1000)
        r = score(true, pred, VOCAB6)
        # independent counting
        counts = np.zeros((6, 6), dtype=int)
        for t, p in zip(true, pred):
            counts[t, p] += 1
        assert r.overall_accuracy == np.trace(counts) / 1000
        for i, name in enumerate(VOCAB6):
            assert r.recall(name) == counts[i, i] / counts[i].sum()

    def test_overall_equals_trace_over_total(self):
        rng = np.random.default_rng(5)
        true = rng.integers(0, 4, size=500)
        pred = rng.integers(0, 4, size=500)
        cm = ConfusionMatrix.from_labels(true, pred, VOCAB6[:4])
        r = score_confusion(cm)
        assert r.overall_accuracy == np.trace(cm.counts) / cm.total

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31), st.integers(1, 5))
    def test_macro_invariant_under_class_duplication(self, seed, dup):
        rng = np.random.default_rng(seed)
        true = rng.integers(0, 3, size=60)
        pred = rng.integers(0, 3, size=60)
        vocab = ("normal", "C1", "other")
        base = score(true, pred, vocab)
        # duplicate every record of class 1
        mask = true == 1
        true2 = np.concatenate([true] + [true[mask]] * dup)
        pred2 = np.concatenate([pred] + [pred[mask]] * dup)
        dup_r = score(true2, pred2, vocab)
        for name in vocab:
            if base.recall(name) is not None:
                assert dup_r.recall(name) == pytest.approx(base.recall(name))
        assert dup_r.macro_accuracy == pytest.approx(base.macro_accuracy)

    def test_macro_over_requires_support(self):
        r = score(np.array([0, 0]), np.array([0, 0]), ("normal", "C1", "other"))
        with pytest.raises(InsufficientDataError):
            r.macro_over(["C1"])


class TestConfusionMatrix:
    def test_row_sums_are_support(self):
        cm = ConfusionMatrix.from_labels(
            np.array([0, 0, 1]), np.array([0, 1, 1]), ("normal", "other")
        )
        np.testing.assert_array_equal(cm.supports, [2, 1])
        assert cm.total == 3

    def test_csv_export(self, tmp_path):
        cm = ConfusionMatrix.from_labels(
            np.array([0, 1]), np.array([0, 1]), ("normal", "other")
        )
        path = tmp_path / "cm.csv"
        cm.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "true\\predicted,normal,other"
        assert lines[1] == "normal,1,0"


class TestUnifyLabelSpace:
    def test_identical_vocabs_unchanged(self):
        a = build_farm(farm_id="a", turbines={"T1": ([0], [[1.0, 2.0]], [0])})
        b = build_farm(farm_id="b", turbines={"T1": ([0], [[1.0, 2.0]], [1])})
        ua, ub = unify_label_space([a, b])
        assert ua.label_vocab == ("normal", "other")
        np.testing.assert_array_equal(ub.turbines[0].labels, [1])

    def test_union_in_canonical_order(self):
        a = build_farm(farm_id="a", label_vocab=("normal", "C3", "other"),
                       turbines={"T1": ([0], [[1.0, 2.0]], [1])})
        b = build_farm(farm_id="b", label_vocab=("normal", "C4", "other"),
                       turbines={"T1": ([0], [[1.0, 2.0]], [1])})
        ua, ub = unify_label_space([a, b])
        assert ua.label_vocab == ("normal", "C3", "C4", "other")
        assert ub.label_vocab == ("normal", "C3", "C4", "other")
        # a's C3 stays C3, b's C4 re-indexed; a has zero C4 support
        assert ua.turbines[0].labels[0] == 1
        assert ub.turbines[0].labels[0] == 2
        assert ua.label_counts()["C4"] == 0

    def test_zero_support_prints_as_dash(self):
        r = score(np.array([0, 1]), np.array([0, 1]), ("normal", "C3", "C4", "other"))
        row = r.format_row()
        assert row.count(ABSENT_MARK) == 2  # C4 and other absent


@pytest.fixture(scope="module")
def mixable_farms():
    mix = {"normal": 0.8, "C1": 0.1, "C4": 0.07, "C2": 0.03}
    base = FarmProfile(farm_id="F1", months=1, n_turbines=2, seed=301, class_mix=mix)
    _, moved = paired_profiles(base, (1.15, 0.05), farm_id="F2", seed=302)
    return (
        min_max_normalize(generate_farm(base)),
        min_max_normalize(generate_farm(moved)),
    )


class TestBuildMixed:
    def test_self_mix_doubles_records(self, mixable_farms):
        f1, _ = mixable_farms
        twin = dataclasses.replace(f1, farm_id="F1b")
        mixed = build_mixed([f1, twin], "F1")
        assert mixed.dataset.n_records == 2 * f1.n_records
        assert abs(mixed.alignments["F1b"].alpha - 1.0) <= 0.02
        assert abs(mixed.alignments["F1b"].beta) <= 0.02

    def test_label_histogram_is_sum(self, mixable_farms):
        f1, f2 = mixable_farms
        mixed = build_mixed([f1, f2], "F1")
        u1, u2 = unify_label_space([f1, f2])
        c1, c2, cm = u1.label_counts(), u2.label_counts(), mixed.dataset.label_counts()
        for name in mixed.dataset.label_vocab:
            assert cm[name] == c1[name] + c2[name]

    def test_mixed_baseline_matches_reference(self, mixable_farms):
        from windclf.baseline import learn_baseline

        f1, f2 = mixable_farms
        mixed = build_mixed([f1, f2], "F1")
        b_ref = learn_baseline(f1, 64, 64, min_support=30)
        b_mix = learn_baseline(mixed.dataset, 64, 64, min_support=30)
        both = b_ref.supported & b_mix.supported
        err_bins = np.abs(b_ref.ws_mode[both] - b_mix.ws_mode[both]) * 64
        assert np.quantile(err_bins, 0.95) <= 2.0

    def test_alignment_ceiling_enforced(self, mixable_farms):
        f1, f2 = mixable_farms
        with pytest.raises(AlignmentQualityError) as exc:
            build_mixed([f1, f2], "F1", max_objective=1e-6)
        assert exc.value.farm_id == "F2"

    def test_needs_two_farms(self, mixable_farms):
        with pytest.raises(InsufficientDataError):
            build_mixed([mixable_farms[0]], "F1")


class TestTransferExperiment:
    def test_2x2_knn_matrix(self, mixable_farms):
        f1, f2 = mixable_farms
        matrix = transfer_experiment([f1, f2], [f1, f2], KnnConfig(), seed=11)
        assert set(matrix.cells) == {("F1", "F1"), ("F1", "F2"), ("F2", "F1"), ("F2", "F2")}
        # diagonal scores the held-out third
        diag = matrix.report("F1", "F1")
        assert diag.n_scored == pytest.approx(f1.n_records / 3, rel=0.02)
        # off-diagonal scores the full foreign farm
        assert matrix.report("F1", "F2").n_scored == f2.n_records

    def test_identically_seeded_copies_agree(self, mixable_farms):
        f1, _ = mixable_farms
        twin = dataclasses.replace(f1, farm_id="TWIN")
        # by_record keeps the held-out third an unbiased sample of every
        # episode, so in-farm and twin-farm recalls can be compared directly
        matrix = transfer_experiment([f1], [f1, twin], KnnConfig(), seed=3,
                                     split_strategy="by_record")
        own = matrix.report("F1", "F1")
        cross = matrix.report("F1", "TWIN")
        for name in ("normal", "C1"):
            assert abs(own.recall(name) - cross.recall(name)) <= 0.05

    def test_deterministic(self, mixable_farms):
        f1, f2 = mixable_farms
        a = transfer_experiment([f1], [f2], KnnConfig(), seed=5)
        b = transfer_experiment([f1], [f2], KnnConfig(), seed=5)
        assert a.report("F1", "F2").to_dict() == b.report("F1", "F2").to_dict()

    def test_render_contains_rows_and_dashes(self, mixable_farms):
        f1, f2 = mixable_farms
        matrix = transfer_experiment([f1], [f1, f2], KnnConfig(), seed=1)
        text = matrix.render()
        assert "F1 [train]" in text
        assert ABSENT_MARK in text  # "other" never occurs in these farms

    def test_alignment_flag_stores_params(self, mixable_farms):
        f1, f2 = mixable_farms
        matrix = transfer_experiment([f1], [f1, f2], KnnConfig(), seed=2, align=True)
        assert matrix.cells[("F1", "F2")].alignment is not None
        assert matrix.cells[("F1", "F1")].alignment is None

    def test_json_round_trip(self, tmp_path, mixable_farms):
        import json

        f1, f2 = mixable_farms
        matrix = transfer_experiment([f1], [f2], KnnConfig(), seed=8)
        path = tmp_path / "transfer.json"
        matrix.save_json(path)
        raw = json.loads(path.read_text())
        assert raw["train_farm_ids"] == ["F1"]
        assert raw["cells"][0]["report"]["overall_accuracy"] == (
            matrix.report("F1", "F2").overall_accuracy
        )
