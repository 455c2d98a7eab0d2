"""Shared fixtures: hand-built manifests with known structure.

Everything here is constructed by explicit arithmetic, never by the
code under test, so expected fold counts and overlap sets can be stated
in the tests as plain numbers.
"""

from __future__ import annotations

import numpy as np
import pytest

from splitguard.manifest import DatasetManifest, RecordEntry


def make_entries(
    label: str,
    subject_visits: list[int],
    multiplicity: int = 1,
    start: int = 0,
    features: bool = False,
    rng: np.random.Generator | None = None,
    dim: int = 4,
) -> list[RecordEntry]:
    """Build one class worth of records.

    subject_visits gives the scan count per subject. multiplicity > 1
    appends aug1..aug(m-1) variants after each source and retags the
    source "orig", mirroring the augmentation file layout.
    """
    entries = []
    for i, n_visits in enumerate(subject_visits):
        sid = f"{label}-s{start + i:03d}"
        for v in range(n_visits):
            rid = f"{sid}-v{v}"
            feat = None
            if features:
                assert rng is not None
                feat = tuple(float(x) for x in rng.normal(size=dim))
            if multiplicity > 1:
                entries.append(
                    RecordEntry(rid, sid, v, label, transform_tag="orig", features=feat)
                )
                for j in range(1, multiplicity):
                    vfeat = None
                    if feat is not None:
                        vfeat = tuple(x + 0.01 * j for x in feat)
                    entries.append(
                        RecordEntry(
                            f"{rid}-aug{j}",
                            sid,
                            v,
                            label,
                            source_record_id=rid,
                            transform_tag=f"aug{j}",
                            features=vfeat,
                        )
                    )
            else:
                entries.append(RecordEntry(rid, sid, v, label, features=feat))
    return entries


def make_random_manifest(rng: np.random.Generator, k: int) -> DatasetManifest:
    """Random small manifest satisfying every scheme's preconditions for k.

    Varies class count, subjects per class, visits per subject, and
    per-class multiplicity; guarantees at least one augmented class so
    late-wise splits are non-degenerate.
    """
    labels = ["a", "b", "c"][: int(rng.integers(2, 4))]
    mults = [int(rng.integers(1, 4)) for _ in labels]
    if all(mu == 1 for mu in mults):
        mults[-1] = 2
    entries = []
    for label, mult in zip(labels, mults):
        n_subjects = int(rng.integers(k, k + 4))
        visits = [int(rng.integers(1, 5)) for _ in range(n_subjects)]
        entries += make_entries(label, visits, mult)
    return DatasetManifest.from_records(entries)


@pytest.fixture(scope="session")
def table_s1_manifest() -> DatasetManifest:
    """Cohort with 41/45/25 subjects and exactly 300 records per class.

    cn: 27 subjects x4 + 14 x3 = 150 scans, x2 = 300 records
    mci: 15 subjects x4 + 30 x3 = 150 scans, x2 = 300 records
    ad: 25 subjects x2 = 50 scans, x6 = 300 records
    """
    entries = []
    entries += make_entries("cn", [4] * 27 + [3] * 14, multiplicity=2)
    entries += make_entries("mci", [4] * 15 + [3] * 30, multiplicity=2)
    entries += make_entries("ad", [2] * 25, multiplicity=6)
    m = DatasetManifest.from_records(entries)
    assert {c: sum(1 for r in m.records if r.class_label == c) for c in m.classes} == {
        "ad": 300,
        "cn": 300,
        "mci": 300,
    }
    assert len(m.subjects) == 41 + 45 + 25
    return m


@pytest.fixture
def plain_manifest() -> DatasetManifest:
    """12 records, 2 classes, 6 pure subjects, no lineage, no features."""
    entries = make_entries("a", [2, 2, 1]) + make_entries("b", [3, 2, 2])
    return DatasetManifest.from_records(entries)


@pytest.fixture
def lineage_manifest() -> DatasetManifest:
    """Two classes with multiplicity 2 and 3; 26 records total."""
    entries = make_entries("a", [2, 1, 1], multiplicity=2)
    entries += make_entries("b", [2, 2, 2], multiplicity=3)
    m = DatasetManifest.from_records(entries)
    assert len(m.records) == 8 + 18
    return m


@pytest.fixture
def featured_manifest() -> DatasetManifest:
    """Small manifest with feature vectors for oracle tests."""
    rng = np.random.default_rng(7)
    entries = make_entries("a", [2, 2, 2], features=True, rng=rng)
    entries += make_entries("b", [2, 2, 2], features=True, rng=rng)
    entries += make_entries("c", [2, 2, 2], features=True, rng=rng)
    return DatasetManifest.from_records(entries)
