"""Synthetic cohort generation: decomposition, determinism, augmentation.

The generator exposes each record's generative parts, so the central
check recomputes features from those parts by plain arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from splitguard.errors import AlreadyAugmented, InvalidConfig, ParseError
from splitguard.manifest import DatasetManifest, RecordEntry
from splitguard.synth import (
    SynthConfig,
    augment_records,
    class_mean_vectors,
    generate_cohort,
    generate_feature_records,
    generate_holdout,
    identity_dominance_rate,
    load_synth_config,
)

SMALL = SynthConfig(
    n_classes=2,
    subjects_per_class=(3, 4),
    visits_per_subject=(2, 3),
    feature_dim=5,
    seed=11,
)


class TestConfig:
    def test_auto_labels(self):
        assert SynthConfig().labels() == ("c0", "c1", "c2")
        named = replace(SynthConfig(), class_labels=("cn", "mci", "ad"))
        assert named.labels() == ("cn", "mci", "ad")

    def test_multiplicity_defaults(self):
        assert SynthConfig().multiplicity_for("c1") == 2
        explicit = replace(SynthConfig(), augmentation_multiplicity={"c0": 4})
        assert explicit.multiplicity_for("c0") == 4
        # a class left out of an explicit map stays unaugmented
        assert explicit.multiplicity_for("c1") == 1

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_classes": 1},
            {"n_classes": 2, "class_labels": ("a",)},
            {"n_classes": 2, "class_labels": ("a", "a"), "subjects_per_class": (1, 1)},
            {"n_classes": 2, "class_labels": ("a", ""), "subjects_per_class": (1, 1)},
            {"subjects_per_class": (5, 5)},
            {"subjects_per_class": (5, 0, 5)},
            {"visits_per_subject": (0, 3)},
            {"visits_per_subject": (4, 2)},
            {"visits_per_subject": (2,)},
            {"feature_dim": 2},
            {"class_signal_scale": -1.0},
            {"noise_scale": float("nan")},
            {"augmentation_multiplicity": {"zz": 2}},
            {"augmentation_multiplicity": {"c0": 0}},
            {"seed": -3},
            {"seed": True},
            {"holdout_visit_offset": -1},
            {"holdout_subjects_per_class": (1, 1)},
            {"holdout_subjects_per_class": (1, -1, 1)},
            {"holdout_visits_per_subject": (3, 1)},
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(InvalidConfig):
            SynthConfig(**kwargs)

    def test_zero_holdout_subjects_allowed(self):
        cfg = replace(SynthConfig(), holdout_subjects_per_class=(2, 0, 2))
        assert cfg.holdout_subjects_per_class == (2, 0, 2)


class TestLoadConfig:
    def test_repo_default_file_matches_defaults(self):
        cfg = load_synth_config("configs/default.toml")
        assert cfg == SynthConfig(
            augmentation_multiplicity={"c0": 2, "c1": 2, "c2": 2}
        )

    def test_minimal_table(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text("[cohort]\nseed = 5\n")
        assert load_synth_config(p) == SynthConfig(seed=5)

    def test_lists_become_tuples(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text(
            "[cohort]\nn_classes = 2\nsubjects_per_class = [4, 6]\n"
            'class_labels = ["x", "y"]\n'
        )
        cfg = load_synth_config(p)
        assert cfg.subjects_per_class == (4, 6)
        assert cfg.class_labels == ("x", "y")

    def test_missing_table(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text("[other]\nseed = 1\n")
        with pytest.raises(InvalidConfig, match="cohort"):
            load_synth_config(p)

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text("[cohort]\nnoise = 0.5\n")
        with pytest.raises(InvalidConfig, match="unknown"):
            load_synth_config(p)

    def test_malformed_toml(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text("[cohort\nseed = 1")
        with pytest.raises(ParseError):
            load_synth_config(p)

    def test_scalar_where_array_expected(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text("[cohort]\nsubjects_per_class = 9\n")
        with pytest.raises(InvalidConfig, match="array"):
            load_synth_config(p)


class TestClassMeans:
    def test_axis_aligned_in_sorted_order(self):
        cfg = SynthConfig(
            n_classes=2,
            class_labels=("beta", "alpha"),
            subjects_per_class=(1, 1),
            feature_dim=4,
        )
        means = class_mean_vectors(cfg)
        np.testing.assert_array_equal(means["alpha"], [3.0, 0, 0, 0])
        np.testing.assert_array_equal(means["beta"], [0, 3.0, 0, 0])


class TestGeneration:
    def test_decomposition_identity(self):
        for fr in generate_feature_records(SMALL):
            want = (
                np.asarray(fr.class_mean)
                + np.asarray(fr.fingerprint)
                + fr.entry.visit_index * np.asarray(fr.drift)
                + np.asarray(fr.noise)
            )
            np.testing.assert_allclose(fr.entry.features, want, atol=1e-12)

    def test_deterministic(self):
        assert generate_cohort(SMALL) == generate_cohort(SMALL)

    def test_seed_changes_features(self):
        a = generate_cohort(SMALL)
        b = generate_cohort(replace(SMALL, seed=12))
        assert a.record_ids() != b.record_ids() or any(
            x.features != y.features for x, y in zip(a.records, b.records)
        )

    def test_cohort_shape(self):
        m = generate_cohort(SMALL)
        assert m.classes == ("c0", "c1")
        assert len([s for s in m.subjects if s.startswith("c0-")]) == 3
        assert len([s for s in m.subjects if s.startswith("c1-")]) == 4
        for sid, ids in m.subjects.items():
            assert 2 <= len(ids) <= 3
            visits = sorted(m.get(rid).visit_index for rid in ids)
            assert visits == list(range(len(ids)))
        assert "c0-s000-v00" in m.by_id

    def test_fixed_visit_count_when_range_collapsed(self):
        cfg = replace(SMALL, visits_per_subject=(3, 3))
        m = generate_cohort(cfg)
        assert all(len(ids) == 3 for ids in m.subjects.values())

    def test_fingerprint_constant_per_subject(self):
        by_subject: dict[str, set] = {}
        noises: dict[str, set] = {}
        for fr in generate_feature_records(SMALL):
            by_subject.setdefault(fr.entry.subject_id, set()).add(fr.fingerprint)
            noises.setdefault(fr.entry.subject_id, set()).add(fr.noise)
        assert all(len(v) == 1 for v in by_subject.values())
        # noise redraws per visit
        assert any(len(v) > 1 for v in noises.values())


class TestHoldout:
    def test_new_subjects_with_offset_visits(self):
        cohort = generate_cohort(SMALL)
        holdout = generate_holdout(SMALL)
        assert not set(cohort.subjects) & set(holdout.subjects)
        assert holdout.classes == cohort.classes
        assert min(r.visit_index for r in holdout.records) == SMALL.holdout_visit_offset
        for ids in holdout.subjects.values():
            visits = sorted(holdout.get(rid).visit_index for rid in ids)
            assert visits[0] == SMALL.holdout_visit_offset

    def test_override_counts(self):
        cfg = replace(SMALL, holdout_subjects_per_class=(1, 2))
        holdout = generate_holdout(cfg)
        assert len([s for s in holdout.subjects if s.startswith("c0-")]) == 1
        assert len([s for s in holdout.subjects if s.startswith("c1-")]) == 2

    def test_zero_subject_class_dropped_from_class_list(self):
        cfg = replace(SMALL, holdout_subjects_per_class=(2, 0))
        holdout = generate_holdout(cfg)
        assert holdout.classes == ("c0",)

    def test_identities_not_shared_with_cohort(self):
        # same seed, label, and ordinal, but a different stream namespace:
        # any fingerprint match would leak identity into the holdout
        from splitguard.synth import _subject_feature_records

        mean = class_mean_vectors(SMALL)["c0"]
        cohort = _subject_feature_records(
            SMALL, "cohort", "c0", "same-sid", SMALL.visits_per_subject, 0, mean
        )
        holdout = _subject_feature_records(
            SMALL, "holdout", "c0", "same-sid", SMALL.visits_per_subject, 0, mean
        )
        assert cohort[0].fingerprint != holdout[0].fingerprint

    def test_deterministic(self):
        assert generate_holdout(SMALL) == generate_holdout(SMALL)


class TestAugment:
    def test_counts_and_lineage(self):
        cfg = replace(SMALL, augmentation_multiplicity={"c0": 3, "c1": 1})
        base = generate_cohort(cfg)
        aug = augment_records(base, cfg)
        n0 = sum(1 for r in base.records if r.class_label == "c0")
        n1 = len(base.records) - n0
        assert len(aug.records) == 3 * n0 + n1
        for r in aug.records:
            if r.class_label == "c1":
                assert r.transform_tag is None
                assert r.source_record_id is None
            elif r.source_record_id is None:
                assert r.transform_tag == "orig"
            else:
                assert r.transform_tag in ("aug1", "aug2")
                assert r.record_id == f"{r.source_record_id}-{r.transform_tag}"

    def test_variant_offset_fixed_norm_and_shared(self):
        cfg = replace(SMALL, augmentation_multiplicity=None)
        base = generate_cohort(cfg)
        aug = augment_records(base, cfg)
        diffs = []
        for r in aug.records:
            if r.transform_tag == "aug1":
                src = aug.get(r.source_record_id)
                d = np.asarray(r.features) - np.asarray(src.features)
                diffs.append(d)
        assert len(diffs) == len(base.records)
        for d in diffs:
            assert math.isclose(float(np.linalg.norm(d)), cfg.augment_perturb_scale, rel_tol=1e-9)
            np.testing.assert_allclose(d, diffs[0], atol=1e-12)

    def test_all_ones_map_passthrough(self):
        cfg = replace(SMALL, augmentation_multiplicity={"c0": 1, "c1": 1})
        base = generate_cohort(cfg)
        assert augment_records(base, cfg) == base

    def test_double_augmentation_rejected(self):
        base = generate_cohort(SMALL)
        aug = augment_records(base, SMALL)
        with pytest.raises(AlreadyAugmented):
            augment_records(aug, SMALL)

    def test_featureless_records_rejected(self):
        m = DatasetManifest.from_records(
            [
                RecordEntry("r0", "s0", 0, "c0"),
                RecordEntry("r1", "s1", 0, "c1"),
            ]
        )
        with pytest.raises(InvalidConfig, match="features"):
            augment_records(m, replace(SMALL, subjects_per_class=(1, 1)))

    def test_deterministic(self):
        base = generate_cohort(SMALL)
        assert augment_records(base, SMALL) == augment_records(base, SMALL)


class TestIdentityDominance:
    @pytest.mark.parametrize("seed", [0, 3, 7])
    def test_default_scales_memorizable(self, seed):
        cfg = replace(SynthConfig(), seed=seed)
        m = augment_records(generate_cohort(cfg), cfg)
        assert identity_dominance_rate(m) >= 0.95

    def test_tight_clusters_rate_one(self):
        m = DatasetManifest.from_records(
            [
                RecordEntry("a0", "sa", 0, "x", features=(0.0,)),
                RecordEntry("a1", "sa", 1, "x", features=(0.1,)),
                RecordEntry("b0", "sb", 0, "y", features=(100.0,)),
                RecordEntry("b1", "sb", 1, "y", features=(100.1,)),
            ]
        )
        assert identity_dominance_rate(m) == 1.0

    def test_single_record_subjects_rate_zero(self):
        m = DatasetManifest.from_records(
            [
                RecordEntry("a0", "sa", 0, "x", features=(0.0,)),
                RecordEntry("b0", "sb", 0, "y", features=(1.0,)),
            ]
        )
        assert identity_dominance_rate(m) == 0.0

    def test_needs_two_records(self):
        m = DatasetManifest.from_records([RecordEntry("a0", "sa", 0, "x", features=(0.0,))])
        with pytest.raises(InvalidConfig):
            identity_dominance_rate(m)

    def test_needs_features(self, plain_manifest):
        with pytest.raises(InvalidConfig):
            identity_dominance_rate(plain_manifest)
