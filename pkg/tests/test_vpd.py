import json

import numpy as np
import pytest

from stenokit.model import StenosisSpec
from stenokit.solver import NumericsConfig
from stenokit.vpd import (MMHG, CohortDefaults, HealthClass,
                          ParameterDistributions, apply_filters, build_vpd,
                          class_targets, extract_features, feature_names,
                          fit_fourier, fourier_reconstruct, load_dataset,
                          patient_rng, sample_patient, sample_stenosis,
                          save_dataset, standardize)

FAST = NumericsConfig(cells_per_vessel=32, samples_per_cycle=128)


class TestDistributions:
    def test_table_means(self):
        d = ParameterDistributions()
        assert d.aorta_length == 0.086
        assert d.iliac_length == 0.085
        assert d.aorta_wall_thickness == pytest.approx(1.03e-3)
        assert d.iliac_diameter == pytest.approx(0.012)
        assert d.proximal_resistance == pytest.approx(6.81e7)
        assert d.distal_resistance == pytest.approx(3.10e9)
        assert d.compliance == pytest.approx(3.67e-10)

    def test_stds_are_twenty_percent_of_means(self):
        d = ParameterDistributions()
        for name in ("aorta_length", "iliac_wall_thickness", "aorta_youngs_modulus",
                     "proximal_resistance", "distal_resistance", "compliance"):
            assert d.std_of(name) == pytest.approx(0.2 * getattr(d, name))

    def test_inlet_zero_mean_rule(self):
        means = (1e-5, 0.0) + (2e-6,) * 9
        d = ParameterDistributions(inlet_means=means)
        stds = d.inlet_stds()
        assert stds[0] == pytest.approx(0.2 * 1e-5)
        assert stds[1] == pytest.approx(0.05 * 0.2 * 1e-5)

    def test_positive_means_required(self):
        with pytest.raises(ValueError):
            ParameterDistributions(compliance=0.0)


class TestSamplePatient:
    def test_class_frequencies(self):
        rng = patient_rng(99, 0)
        counts = {cls: 0 for cls in HealthClass}
        n = 30000
        for _ in range(n):
            _, health = sample_patient(rng)
            counts[health] += 1
        assert counts[HealthClass.HEALTHY] / n == pytest.approx(0.5, abs=0.01)
        for cls in (HealthClass.AORTA, HealthClass.ILIAC1, HealthClass.ILIAC2):
            assert counts[cls] / n == pytest.approx(1 / 6, abs=0.008)

    def test_aorta_length_statistics(self):
        rng = patient_rng(7, 1)
        lengths = np.array([sample_patient(rng)[0].aorta.length
                            for _ in range(100_000)])
        assert lengths.mean() == pytest.approx(0.086, rel=0.01)
        assert lengths.std() == pytest.approx(0.2 * 0.086, rel=0.01)

    def test_disease_constraints_hold(self):
        rng = patient_rng(3, 5)
        for _ in range(2000):
            spec = sample_stenosis(rng)
            assert 0.2 <= spec.reference_location <= 0.8
            assert 0.1 <= spec.start <= spec.reference_location - 0.05
            assert spec.reference_location + 0.05 <= spec.end <= 0.9
            assert 0.5 <= spec.severity <= 0.9
            assert spec.end - spec.start >= 0.1

    def test_substreams_are_order_independent(self):
        a = sample_patient(patient_rng(42, 17))[0]
        _ = sample_patient(patient_rng(42, 16))
        b = sample_patient(patient_rng(42, 17))[0]
        assert a == b

    def test_stenosis_applies_to_one_iliac_only(self):
        rng = patient_rng(1, 2)
        while True:
            params, health = sample_patient(rng)
            if health == HealthClass.ILIAC1:
                break
        assert params.stenosis_of("iliac1") is not None
        assert params.stenosis_of("iliac2") is None
        assert params.stenosis_of("aorta") is None

    def test_retries_on_nonpositive_draw(self):
        class NegativeRng:
            def normal(self, mean, std):
                return -1.0

            def random(self):
                return 0.1

            def integers(self, n):
                return 0

            def uniform(self, lo, hi):
                return lo

        with pytest.raises(ValueError, match="positive"):
            sample_patient(NegativeRng())


class TestFilters:
    def test_constant_profile_accepted(self):
        assert apply_filters(np.full(64, 100.0 * MMHG)).accepted

    def test_high_peak_rejected_by_first_rule(self):
        signal = np.full(64, 100.0 * MMHG)
        signal[10] = 230.0 * MMHG
        verdict = apply_filters(signal)
        assert not verdict.accepted
        assert verdict.failed_rule == "max_pressure"

    def test_wide_pulse_rejected_by_third_rule(self):
        signal = np.linspace(30.0 * MMHG, 160.0 * MMHG, 64)
        verdict = apply_filters(signal)
        assert not verdict.accepted
        assert verdict.failed_rule == "pulse_pressure"

    def test_low_minimum_rejected_by_second_rule(self):
        signal = np.full(64, 80.0 * MMHG)
        signal[5] = 20.0 * MMHG
        assert apply_filters(signal).failed_rule == "min_pressure"

    def test_unit_conversion_is_exact(self):
        assert MMHG == 133.322387415


class TestFourierFeatures:
    def test_constant_signal(self):
        coeffs, err = fit_fourier(np.full(64, 3.25))
        assert coeffs[0] == pytest.approx(3.25, rel=1e-12)
        np.testing.assert_allclose(coeffs[1:], 0.0, atol=1e-12)
        assert err < 1e-12

    def test_single_harmonic(self):
        t = np.arange(128) / 128
        coeffs, _ = fit_fourier(np.sin(2 * np.pi * t))
        assert coeffs[1] == pytest.approx(1.0, abs=1e-10)
        others = np.delete(coeffs, 1)
        np.testing.assert_allclose(others, 0.0, atol=1e-10)

    def test_round_trip_recovery(self):
        rng = np.random.default_rng(8)
        truth = rng.normal(size=11)
        signal = fourier_reconstruct(truth, 128)
        coeffs, err = fit_fourier(signal)
        np.testing.assert_allclose(coeffs, truth, atol=1e-8)
        assert err < 1e-8

    def test_degenerate_sampling_rejected(self):
        with pytest.raises(ValueError):
            fit_fourier(np.ones(10))

    def test_feature_names_layout(self):
        names = feature_names()
        assert len(names) == 66
        assert names[0] == "q3_b0"
        assert names[11] == "q2_b0"
        assert names[-1] == "p1_b5"


class TestStandardize:
    def test_two_point_column(self):
        x = np.array([[1.0], [3.0]])
        out, mean, std = standardize(x, np.array([0, 1]))
        np.testing.assert_allclose(out[:, 0], [-1.0, 1.0])
        assert mean[0] == 2.0 and std[0] == 1.0

    def test_training_rows_have_zero_mean_unit_variance(self):
        rng = np.random.default_rng(0)
        x = rng.normal(5, 3, size=(40, 66))
        train = np.arange(25)
        out, _, _ = standardize(x, train)
        np.testing.assert_allclose(out[train].mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(out[train].var(axis=0), 1.0, atol=1e-12)

    def test_shifted_test_rows_keep_offset(self):
        rng = np.random.default_rng(1)
        col = rng.normal(size=30)
        delta = 0.7
        x = np.concatenate([col, col + delta])[:, None]
        train = np.arange(30)
        out, _, std = standardize(x, train)
        test_mean = out[30:, 0].mean()
        assert test_mean == pytest.approx(delta / std[0], rel=1e-10)

    def test_zero_variance_names_feature(self):
        x = np.ones((10, 66))
        x[:, 1:] = np.random.default_rng(2).normal(size=(10, 65))
        with pytest.raises(ValueError, match="q3_b0"):
            standardize(x, np.arange(10))

    def test_needs_two_training_rows(self):
        with pytest.raises(ValueError):
            standardize(np.ones((5, 2)), np.array([0]))


class TestClassTargets:
    def test_default_cohort_split(self):
        targets = class_targets(7128)
        assert targets[HealthClass.HEALTHY] == 3564
        assert all(targets[c] == 1188 for c in (HealthClass.AORTA,
                                                HealthClass.ILIAC1,
                                                HealthClass.ILIAC2))

    def test_scaled_cohort_split(self):
        targets = class_targets(1200)
        assert targets[HealthClass.HEALTHY] == 600
        assert targets[HealthClass.AORTA] == 200

    def test_remainders_spread_deterministically(self):
        targets = class_targets(8)
        assert targets[HealthClass.HEALTHY] == 4
        assert sum(targets.values()) == 8


class TestBuildVpd:
    @pytest.fixture(scope="class")
    def small(self):
        return build_vpd(8, seed=11, numerics=FAST, keep_waveforms=True)

    def test_deterministic_rebuild(self, small):
        again = build_vpd(8, seed=11, numerics=FAST, keep_waveforms=True)
        np.testing.assert_array_equal(small.features, again.features)
        assert [p.id for p in small.patients] == [p.id for p in again.patients]

    def test_worker_count_invariance(self, small):
        parallel = build_vpd(8, seed=11, numerics=FAST, workers=2,
                             keep_waveforms=True)
        np.testing.assert_array_equal(small.features, parallel.features)
        assert small.metadata["attempts"] == parallel.metadata["attempts"]
        assert small.metadata["rejections"] == parallel.metadata["rejections"]

    def test_rejection_bookkeeping(self, small):
        meta = small.metadata
        assert meta["attempts"] - len(small.patients) == sum(
            meta["rejections"].values())

    def test_class_quotas_met(self, small):
        counts = small.metadata["class_counts"]
        assert counts == small.metadata["class_targets"]

    def test_accepted_patients_pass_filters_from_stored_waveforms(self, small):
        for p in small.patients:
            assert apply_filters(p.waveforms.p1).accepted

    def test_health_class_consistent_with_stenosis(self, small):
        for p in small.patients:
            if p.health_class == HealthClass.HEALTHY:
                assert p.params.stenosis is None
            else:
                vessel = {HealthClass.AORTA: "aorta",
                          HealthClass.ILIAC1: "iliac1",
                          HealthClass.ILIAC2: "iliac2"}[p.health_class]
                assert p.params.stenosis[0] == vessel

    def test_feature_vector_layout(self, small):
        patient = small.patients[0]
        assert patient.features.shape == (66,)
        feats, errs = extract_features(patient.waveforms)
        np.testing.assert_array_equal(feats, patient.features)
        assert np.all(errs < 0.05)

    def test_standardization_metadata_from_training_rows_only(self, small):
        stats = small.metadata["standardization"]
        train_rows = np.asarray(stats["train_rows"])
        assert len(train_rows) < len(small.patients)
        out, mean, std = standardize(small.features, train_rows)
        np.testing.assert_allclose(mean, stats["mean"])
        np.testing.assert_allclose(std, stats["std"])

    def test_n_target_minimum(self):
        with pytest.raises(ValueError):
            build_vpd(3, seed=0, numerics=FAST)


class TestPersistence:
    def test_round_trip(self, tmp_path):
        dataset = build_vpd(8, seed=5, numerics=FAST)
        path = tmp_path / "cohort.csv"
        save_dataset(dataset, path)
        ids, classes, features, metadata = load_dataset(path)
        np.testing.assert_array_equal(features, dataset.features)
        np.testing.assert_array_equal(classes, dataset.classes)
        np.testing.assert_array_equal(ids, [p.id for p in dataset.patients])
        assert metadata["global_seed"] == 5
        meta_raw = json.loads((tmp_path / "cohort_meta.json").read_text())
        assert meta_raw["class_counts"] == dataset.metadata["class_counts"]

    def test_schema_mismatch_detected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,seed,class,wrong\n")
        with pytest.raises(ValueError, match="schema"):
            load_dataset(path)
