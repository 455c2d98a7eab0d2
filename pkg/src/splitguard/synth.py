"""Synthetic longitudinal cohorts with controllable identity structure.

The generative model is deliberately simple and brutally identifiable:

    features = class_mean + fingerprint + visit_index * drift + noise

Class means are axis-aligned and depend only on the label set (class at
sorted position j points along basis axis j, scaled by
class_signal_scale). The fingerprint is drawn once per subject and, at
default scales, dwarfs the class signal: a record's nearest neighbour is
then almost always a same-subject record rather than a same-class one.
That property, measured by :func:`identity_dominance_rate`, is what
turns subject-straddling splits into falsely accurate ones.

Augmentation appends variants displaced by a small fixed offset per
transform tag, mimicking deterministic label-preserving transforms whose
outputs stay glued to their source.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import AlreadyAugmented, InvalidConfig, ParseError
from .kernels import nearest_other_index
from .manifest import DatasetManifest, RecordEntry
from .seeding import check_seed, derived_stream

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class SynthConfig:
    """Cohort shape and generative scales.

    ``subjects_per_class`` aligns with the class list (auto labels
    c0..cN when ``class_labels`` is omitted). Visit counts are drawn per
    subject, uniformly over the inclusive ``visits_per_subject`` range.
    ``augmentation_multiplicity`` maps label -> m, meaning the source
    plus m-1 variants; None means 2 for every class, and labels missing
    from an explicit map mean 1 (left unaugmented).

    The holdout_* fields describe the companion cohort of entirely new
    subjects: None reuses the main cohort's value. Holdout visit indices
    start at ``holdout_visit_offset``, modelling subjects recruited later
    whose scans sit further along their own drift trajectories.
    """

    n_classes: int = 3
    class_labels: tuple[str, ...] | None = None
    subjects_per_class: tuple[int, ...] = (45, 45, 45)
    visits_per_subject: tuple[int, int] = (3, 5)
    feature_dim: int = 16
    class_signal_scale: float = 3.0
    fingerprint_scale: float = 1.2
    visit_drift_scale: float = 0.2
    noise_scale: float = 0.5
    augmentation_multiplicity: dict[str, int] | None = None
    augment_perturb_scale: float = 0.1
    seed: int = 0
    holdout_subjects_per_class: tuple[int, ...] | None = None
    holdout_visits_per_subject: tuple[int, int] | None = None
    holdout_visit_offset: int = 10

    def __post_init__(self) -> None:
        if not isinstance(self.n_classes, int) or self.n_classes < 2:
            raise InvalidConfig(f"n_classes must be an integer >= 2, got {self.n_classes!r}")
        labels = self.labels()
        if len(labels) != self.n_classes or len(set(labels)) != len(labels):
            raise InvalidConfig(
                f"class_labels must be {self.n_classes} unique labels, got {list(labels)}"
            )
        if any(not lab for lab in labels):
            raise InvalidConfig("class labels must be non-empty strings")
        if len(self.subjects_per_class) != self.n_classes:
            raise InvalidConfig(
                f"subjects_per_class has {len(self.subjects_per_class)} entries "
                f"for {self.n_classes} classes"
            )
        if any(not isinstance(n, int) or n < 1 for n in self.subjects_per_class):
            raise InvalidConfig("subjects_per_class entries must be integers >= 1")
        self._check_visit_range("visits_per_subject", self.visits_per_subject)
        if self.holdout_visits_per_subject is not None:
            self._check_visit_range(
                "holdout_visits_per_subject", self.holdout_visits_per_subject
            )
        if self.holdout_subjects_per_class is not None:
            if len(self.holdout_subjects_per_class) != self.n_classes:
                raise InvalidConfig("holdout_subjects_per_class length mismatch")
            if any(
                not isinstance(n, int) or n < 0
                for n in self.holdout_subjects_per_class
            ):
                raise InvalidConfig("holdout subject counts must be integers >= 0")
        if self.feature_dim < self.n_classes:
            raise InvalidConfig(
                f"feature_dim {self.feature_dim} cannot hold {self.n_classes} "
                "axis-aligned class means"
            )
        for name in (
            "class_signal_scale",
            "fingerprint_scale",
            "visit_drift_scale",
            "noise_scale",
            "augment_perturb_scale",
        ):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise InvalidConfig(f"{name} must be finite and non-negative")
        if self.augmentation_multiplicity is not None:
            extra = set(self.augmentation_multiplicity) - set(labels)
            if extra:
                raise InvalidConfig(
                    f"augmentation_multiplicity names unknown classes {sorted(extra)}"
                )
            for c, mult in self.augmentation_multiplicity.items():
                if not isinstance(mult, int) or mult < 1:
                    raise InvalidConfig(
                        f"augmentation multiplicity for {c!r} must be an integer >= 1"
                    )
        check_seed(self.seed)
        if not isinstance(self.holdout_visit_offset, int) or self.holdout_visit_offset < 0:
            raise InvalidConfig("holdout_visit_offset must be an integer >= 0")

    @staticmethod
    def _check_visit_range(name: str, rng: tuple[int, int]) -> None:
        if (
            len(rng) != 2
            or any(not isinstance(v, int) for v in rng)
            or not 1 <= rng[0] <= rng[1]
        ):
            raise InvalidConfig(f"{name} must be an integer range [min, max] with min >= 1")

    def labels(self) -> tuple[str, ...]:
        if self.class_labels is not None:
            return self.class_labels
        return tuple(f"c{i}" for i in range(self.n_classes))

    def multiplicity_for(self, class_label: str) -> int:
        if self.augmentation_multiplicity is None:
            return 2
        return self.augmentation_multiplicity.get(class_label, 1)


_TOML_KEYS = {
    "n_classes",
    "class_labels",
    "subjects_per_class",
    "visits_per_subject",
    "feature_dim",
    "class_signal_scale",
    "fingerprint_scale",
    "visit_drift_scale",
    "noise_scale",
    "augmentation_multiplicity",
    "augment_perturb_scale",
    "seed",
    "holdout_subjects_per_class",
    "holdout_visits_per_subject",
    "holdout_visit_offset",
}

_TOML_TUPLE_KEYS = (
    "class_labels",
    "subjects_per_class",
    "visits_per_subject",
    "holdout_subjects_per_class",
    "holdout_visits_per_subject",
)


def load_synth_config(path: str | Path) -> SynthConfig:
    """Read a [cohort] table from a TOML file into a SynthConfig."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"malformed TOML: {exc}") from None
    cohort = doc.get("cohort")
    if not isinstance(cohort, dict):
        raise InvalidConfig("config must contain a [cohort] table")
    unknown = cohort.keys() - _TOML_KEYS
    if unknown:
        raise InvalidConfig(f"unknown config keys {sorted(unknown)}")
    kwargs: dict = dict(cohort)
    for key in _TOML_TUPLE_KEYS:
        if kwargs.get(key) is not None:
            if not isinstance(kwargs[key], list):
                raise InvalidConfig(f"{key} must be an array")
            kwargs[key] = tuple(kwargs[key])
    try:
        return SynthConfig(**kwargs)
    except TypeError as exc:
        raise InvalidConfig(f"bad config value: {exc}") from None


@dataclass(frozen=True)
class FeatureRecord:
    """A generated record plus its generative decomposition.

    features equals class_mean + fingerprint + visit_index * drift +
    noise, componentwise, up to floating point rounding; tests verify the
    identity rather than trusting it.
    """

    entry: RecordEntry
    class_mean: tuple[float, ...]
    fingerprint: tuple[float, ...]
    drift: tuple[float, ...]
    noise: tuple[float, ...]


def class_mean_vectors(config: SynthConfig) -> dict[str, np.ndarray]:
    """Axis-aligned class means; a pure function of the label set."""
    means = {}
    for position, label in enumerate(sorted(config.labels())):
        v = np.zeros(config.feature_dim)
        v[position] = config.class_signal_scale
        means[label] = v
    return means


def _subject_feature_records(
    config: SynthConfig,
    namespace: str,
    class_label: str,
    subject_id: str,
    visit_range: tuple[int, int],
    visit_start: int,
    mean: np.ndarray,
) -> list[FeatureRecord]:
    rng = derived_stream(config.seed, namespace, "subject", class_label, subject_id)
    lo, hi = visit_range
    n_visits = lo if lo == hi else int(rng.integers(lo, hi + 1))
    fingerprint = rng.normal(0.0, config.fingerprint_scale, size=config.feature_dim)
    drift = rng.normal(0.0, config.visit_drift_scale, size=config.feature_dim)
    out = []
    for offset in range(n_visits):
        visit_index = visit_start + offset
        noise = rng.normal(0.0, config.noise_scale, size=config.feature_dim)
        x = mean + fingerprint + visit_index * drift + noise
        entry = RecordEntry(
            record_id=f"{subject_id}-v{visit_index:02d}",
            subject_id=subject_id,
            visit_index=visit_index,
            class_label=class_label,
            features=tuple(float(v) for v in x),
        )
        out.append(
            FeatureRecord(
                entry=entry,
                class_mean=tuple(float(v) for v in mean),
                fingerprint=tuple(float(v) for v in fingerprint),
                drift=tuple(float(v) for v in drift),
                noise=tuple(float(v) for v in noise),
            )
        )
    return out


def generate_feature_records(config: SynthConfig) -> list[FeatureRecord]:
    """The cohort with per-record generative components exposed."""
    means = class_mean_vectors(config)
    records: list[FeatureRecord] = []
    for label, n_subjects in zip(config.labels(), config.subjects_per_class):
        for i in range(n_subjects):
            subject_id = f"{label}-s{i:03d}"
            records.extend(
                _subject_feature_records(
                    config,
                    "cohort",
                    label,
                    subject_id,
                    config.visits_per_subject,
                    0,
                    means[label],
                )
            )
    return records


def generate_cohort(config: SynthConfig) -> DatasetManifest:
    """Generate the pre-augmentation cohort manifest."""
    entries = [fr.entry for fr in generate_feature_records(config)]
    return DatasetManifest.from_records(entries, classes=config.labels())


def generate_holdout(config: SynthConfig) -> DatasetManifest:
    """Generate the companion cohort of entirely new subjects.

    Identities come from a separate stream namespace, so no fingerprint
    is shared with the main cohort; class means are identical because
    they depend only on the label set.
    """
    means = class_mean_vectors(config)
    subjects = (
        config.holdout_subjects_per_class
        if config.holdout_subjects_per_class is not None
        else config.subjects_per_class
    )
    visit_range = (
        config.holdout_visits_per_subject
        if config.holdout_visits_per_subject is not None
        else config.visits_per_subject
    )
    records: list[RecordEntry] = []
    for label, n_subjects in zip(config.labels(), subjects):
        for i in range(n_subjects):
            subject_id = f"{label}-h{i:03d}"
            records.extend(
                fr.entry
                for fr in _subject_feature_records(
                    config,
                    "holdout",
                    label,
                    subject_id,
                    visit_range,
                    config.holdout_visit_offset,
                    means[label],
                )
            )
    # a class may be configured with zero holdout subjects
    present = {r.class_label for r in records}
    order = tuple(lab for lab in config.labels() if lab in present)
    return DatasetManifest.from_records(records, classes=order)


def _transform_offset(config: SynthConfig, index: int) -> np.ndarray:
    # fixed per-transform displacement of exact norm augment_perturb_scale
    rng = derived_stream(config.seed, "augment", index)
    direction = rng.normal(0.0, 1.0, size=config.feature_dim)
    norm = float(np.linalg.norm(direction))
    if norm == 0.0:
        direction[0] = 1.0
        norm = 1.0
    return direction * (config.augment_perturb_scale / norm)


def augment_records(m: DatasetManifest, config: SynthConfig) -> DatasetManifest:
    """Append label-preserving variants per class multiplicity.

    Each source whose class has multiplicity m is retagged "orig" and
    followed by variants aug1..aug(m-1), displaced by that transform's
    fixed offset vector. Classes at multiplicity 1 pass through
    untouched, so an all-1 map returns the input unchanged.
    """
    if m.has_lineage():
        raise AlreadyAugmented("manifest already contains augmented records")
    offsets: dict[int, np.ndarray] = {}
    out: list[RecordEntry] = []
    for r in m.records:
        mult = config.multiplicity_for(r.class_label)
        if mult == 1:
            out.append(r)
            continue
        if r.features is None:
            raise InvalidConfig(f"record {r.record_id!r} has no features to augment")
        out.append(replace(r, transform_tag="orig"))
        for j in range(1, mult):
            if j not in offsets:
                offsets[j] = _transform_offset(config, j)
            x = np.asarray(r.features) + offsets[j]
            out.append(
                RecordEntry(
                    record_id=f"{r.record_id}-aug{j}",
                    subject_id=r.subject_id,
                    visit_index=r.visit_index,
                    class_label=r.class_label,
                    source_record_id=r.record_id,
                    transform_tag=f"aug{j}",
                    features=tuple(float(v) for v in x),
                )
            )
    return DatasetManifest.from_records(out, classes=m.classes)


def identity_dominance_rate(m: DatasetManifest) -> float:
    """Fraction of records whose nearest other record shares their subject.

    This is the memorization hazard in one number: when it approaches 1,
    any split that lets a subject straddle the test boundary hands a
    nearest-neighbour model the answer.
    """
    if len(m.records) < 2:
        raise InvalidConfig("identity dominance needs at least two records")
    if m.feature_dim is None:
        raise InvalidConfig("identity dominance needs feature vectors")
    points = np.asarray([r.features for r in m.records], dtype=np.float64)
    nearest = nearest_other_index(points)
    same = sum(
        1
        for i, r in enumerate(m.records)
        if m.records[int(nearest[i])].subject_id == r.subject_id
    )
    return same / len(m.records)
