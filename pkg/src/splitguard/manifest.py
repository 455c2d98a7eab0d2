"""Longitudinal dataset model: records, manifests, subject summaries.

A manifest is an immutable, validated collection of records. Each record
is one scan of one subject at one visit; augmented variants point back at
their source record (lineage depth is capped at one, matching a single
augmentation pass). Two interchangeable file formats are supported, CSV
and JSON lines, both diff-able and framework-neutral.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ParseError, ValidationError

CSV_COLUMNS = (
    "record_id",
    "subject_id",
    "visit_index",
    "class_label",
    "source_record_id",
    "transform_tag",
    "features",
)


@dataclass(frozen=True)
class RecordEntry:
    """One scan row. ``source_record_id`` is set iff this is an augmented variant."""

    record_id: str
    subject_id: str
    visit_index: int
    class_label: str
    source_record_id: str | None = None
    transform_tag: str | None = None
    features: tuple[float, ...] | None = None

    @property
    def is_augmented(self) -> bool:
        return self.source_record_id is not None

    @property
    def source_key(self) -> str:
        """The pre-augmentation record this row belongs to (itself if original)."""
        return self.source_record_id if self.source_record_id is not None else self.record_id


@dataclass(frozen=True)
class SubjectSummary:
    subject_id: str
    n_records: int
    label_histogram: dict[str, int]
    majority_label: str

    @property
    def is_mixed(self) -> bool:
        return len(self.label_histogram) > 1


@dataclass(frozen=True)
class DatasetManifest:
    """Validated record collection with subject and class indexes.

    Instances are immutable; build them with :meth:`from_records` (or
    :func:`load_manifest`), never directly.
    """

    records: tuple[RecordEntry, ...]
    classes: tuple[str, ...]
    subjects: dict[str, tuple[str, ...]]
    feature_dim: int | None
    by_id: dict[str, RecordEntry] = field(repr=False, compare=False, default_factory=dict)

    @classmethod
    def from_records(
        cls, records: Iterable[RecordEntry], classes: Sequence[str] | None = None
    ) -> "DatasetManifest":
        """Validate records and build indexes.

        ``classes`` may impose an explicit class order; it must contain
        exactly the labels appearing in the records. Default order is
        lexicographic, and all downstream tie-breaking derives from it.
        """
        recs = tuple(records)
        by_id: dict[str, RecordEntry] = {}
        for r in recs:
            if not r.record_id or not r.subject_id or not r.class_label:
                raise ValidationError(f"record {r.record_id!r}: empty identifier or label")
            if not isinstance(r.visit_index, int) or isinstance(r.visit_index, bool) or r.visit_index < 0:
                raise ValidationError(f"record {r.record_id!r}: visit_index must be a non-negative integer")
            if r.record_id in by_id:
                raise ValidationError(f"duplicate record_id {r.record_id!r}")
            by_id[r.record_id] = r

        feature_dim: int | None = None
        for r in recs:
            if r.features is None:
                continue
            if len(r.features) == 0:
                raise ValidationError(f"record {r.record_id!r}: empty feature vector")
            if feature_dim is None:
                feature_dim = len(r.features)
            elif len(r.features) != feature_dim:
                raise ValidationError(
                    f"record {r.record_id!r}: feature dimension {len(r.features)} != {feature_dim}"
                )

        for r in recs:
            if r.source_record_id is None:
                continue
            src = by_id.get(r.source_record_id)
            if src is None:
                raise ValidationError(
                    f"record {r.record_id!r}: source_record_id {r.source_record_id!r} not in manifest"
                )
            if src.source_record_id is not None:
                raise ValidationError(
                    f"record {r.record_id!r}: source {src.record_id!r} is itself augmented (lineage depth > 1)"
                )
            if (r.subject_id, r.visit_index, r.class_label) != (
                src.subject_id,
                src.visit_index,
                src.class_label,
            ):
                raise ValidationError(
                    f"record {r.record_id!r} disagrees with source {src.record_id!r} "
                    "on subject/visit/label"
                )

        present = sorted({r.class_label for r in recs})
        if classes is None:
            class_order = tuple(present)
        else:
            class_order = tuple(classes)
            if sorted(class_order) != present or len(set(class_order)) != len(class_order):
                raise ValidationError(
                    f"explicit class order {list(class_order)} does not match labels present {present}"
                )

        subjects: dict[str, list[str]] = {}
        for r in recs:
            subjects.setdefault(r.subject_id, []).append(r.record_id)

        return cls(
            records=recs,
            classes=class_order,
            subjects={s: tuple(ids) for s, ids in subjects.items()},
            feature_dim=feature_dim,
            by_id=by_id,
        )

    def get(self, record_id: str) -> RecordEntry:
        return self.by_id[record_id]

    def record_ids(self) -> tuple[str, ...]:
        return tuple(r.record_id for r in self.records)

    def lineage_groups(self) -> dict[str, tuple[str, ...]]:
        """Map source record id -> that record plus its variants (source first)."""
        groups: dict[str, list[str]] = {}
        for r in self.records:
            groups.setdefault(r.source_key, [])
        for r in self.records:
            if not r.is_augmented:
                groups[r.record_id].insert(0, r.record_id)
        for r in self.records:
            if r.is_augmented:
                groups[r.source_key].append(r.record_id)
        return {k: tuple(v) for k, v in groups.items()}

    def has_lineage(self) -> bool:
        return any(r.is_augmented for r in self.records)


def summarize_subjects(m: DatasetManifest) -> list[SubjectSummary]:
    """One summary per subject, ordered lexicographically by subject id.

    Majority ties break toward the earlier label in ``m.classes``.
    """
    out = []
    for subject_id in sorted(m.subjects):
        hist: dict[str, int] = {}
        for rid in m.subjects[subject_id]:
            label = m.get(rid).class_label
            hist[label] = hist.get(label, 0) + 1
        majority = max(m.classes, key=lambda c: (hist.get(c, 0), -m.classes.index(c)))
        out.append(
            SubjectSummary(
                subject_id=subject_id,
                n_records=len(m.subjects[subject_id]),
                label_histogram=hist,
                majority_label=majority,
            )
        )
    return out


def _infer_format(path: Path, format: str | None) -> str:
    if format is not None:
        if format not in ("csv", "jsonl"):
            raise ParseError(f"unknown manifest format {format!r}")
        return format
    suffix = path.suffix.lower()
    if suffix == ".csv":
        return "csv"
    if suffix in (".jsonl", ".ndjson"):
        return "jsonl"
    raise ParseError(f"cannot infer manifest format from {path.name!r}; pass format=")


def _parse_features(text: str, row: int) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(";"))
    except ValueError:
        raise ParseError(f"malformed features {text!r}", row=row) from None


def _rows_from_csv(path: Path) -> list[RecordEntry]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file") from None
        if tuple(header) != CSV_COLUMNS:
            raise ParseError(f"bad header {header!r}, expected {list(CSV_COLUMNS)}", row=1)
        entries = []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(CSV_COLUMNS):
                raise ParseError(f"expected {len(CSV_COLUMNS)} columns, got {len(cells)}", row=lineno)
            rid, sid, visit, label, source, tag, feats = cells
            try:
                visit_index = int(visit)
            except ValueError:
                raise ParseError(f"malformed visit_index {visit!r}", row=lineno) from None
            entries.append(
                RecordEntry(
                    record_id=rid,
                    subject_id=sid,
                    visit_index=visit_index,
                    class_label=label,
                    source_record_id=source or None,
                    transform_tag=tag or None,
                    features=_parse_features(feats, lineno) if feats else None,
                )
            )
    return entries


_JSONL_REQUIRED = {"record_id", "subject_id", "visit_index", "class_label"}
_JSONL_OPTIONAL = {"source_record_id", "transform_tag", "features"}


def _rows_from_jsonl(path: Path) -> list[RecordEntry]:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"malformed JSON ({exc.msg})", row=lineno) from None
            if not isinstance(obj, dict):
                raise ParseError("record must be a JSON object", row=lineno)
            missing = _JSONL_REQUIRED - obj.keys()
            if missing:
                raise ParseError(f"missing fields {sorted(missing)}", row=lineno)
            unknown = obj.keys() - _JSONL_REQUIRED - _JSONL_OPTIONAL
            if unknown:
                raise ParseError(f"unknown fields {sorted(unknown)}", row=lineno)
            try:
                features = obj.get("features")
                entries.append(
                    RecordEntry(
                        record_id=str(obj["record_id"]),
                        subject_id=str(obj["subject_id"]),
                        visit_index=int(obj["visit_index"]),
                        class_label=str(obj["class_label"]),
                        source_record_id=obj.get("source_record_id"),
                        transform_tag=obj.get("transform_tag"),
                        features=tuple(float(x) for x in features) if features is not None else None,
                    )
                )
            except (TypeError, ValueError) as exc:
                raise ParseError(f"malformed field value ({exc})", row=lineno) from None
    return entries


def load_manifest(path: str | Path, format: str | None = None) -> DatasetManifest:
    """Load and validate a manifest file (format inferred from suffix if omitted)."""
    p = Path(path)
    fmt = _infer_format(p, format)
    entries = _rows_from_csv(p) if fmt == "csv" else _rows_from_jsonl(p)
    return DatasetManifest.from_records(entries)


def _format_features(features: tuple[float, ...]) -> str:
    return ";".join(repr(x) for x in features)


def save_manifest(m: DatasetManifest, path: str | Path, format: str | None = None) -> None:
    """Write a manifest; output bytes are a pure function of the manifest."""
    p = Path(path)
    fmt = _infer_format(p, format)
    if fmt == "csv":
        with open(p, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for r in m.records:
                writer.writerow(
                    [
                        r.record_id,
                        r.subject_id,
                        r.visit_index,
                        r.class_label,
                        r.source_record_id or "",
                        r.transform_tag or "",
                        _format_features(r.features) if r.features is not None else "",
                    ]
                )
    else:
        with open(p, "w", encoding="utf-8") as fh:
            for r in m.records:
                obj: dict = {
                    "record_id": r.record_id,
                    "subject_id": r.subject_id,
                    "visit_index": r.visit_index,
                    "class_label": r.class_label,
                }
                if r.source_record_id is not None:
                    obj["source_record_id"] = r.source_record_id
                if r.transform_tag is not None:
                    obj["transform_tag"] = r.transform_tag
                if r.features is not None:
                    obj["features"] = list(r.features)
                fh.write(json.dumps(obj, separators=(",", ":")) + "\n")
