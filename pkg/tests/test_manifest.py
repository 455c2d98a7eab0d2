"""Manifest construction, validation, and file round trips."""

from __future__ import annotations

import pytest

from splitguard.errors import ParseError, ValidationError
from splitguard.manifest import (
    DatasetManifest,
    RecordEntry,
    load_manifest,
    save_manifest,
    summarize_subjects,
)

from conftest import make_entries


def _r(rid, sid="s1", visit=0, label="a", source=None, tag=None, features=None):
    return RecordEntry(rid, sid, visit, label, source, tag, features)


class TestFromRecords:
    def test_classes_default_lexicographic(self):
        m = DatasetManifest.from_records([_r("r1", label="b"), _r("r2", label="a")])
        assert m.classes == ("a", "b")

    def test_explicit_class_permutation(self):
        m = DatasetManifest.from_records(
            [_r("r1", label="b"), _r("r2", label="a")], classes=("b", "a")
        )
        assert m.classes == ("b", "a")

    def test_explicit_classes_must_match_present(self):
        with pytest.raises(ValidationError):
            DatasetManifest.from_records([_r("r1", label="a")], classes=("a", "b"))

    def test_duplicate_record_id(self):
        with pytest.raises(ValidationError, match="duplicate"):
            DatasetManifest.from_records([_r("r1"), _r("r1")])

    def test_dangling_source(self):
        with pytest.raises(ValidationError, match="not in manifest"):
            DatasetManifest.from_records([_r("r1", source="ghost", tag="aug1")])

    def test_deep_lineage_rejected(self):
        rows = [
            _r("r1", tag="orig"),
            _r("r2", source="r1", tag="aug1"),
            _r("r3", source="r2", tag="aug2"),
        ]
        with pytest.raises(ValidationError, match="depth"):
            DatasetManifest.from_records(rows)

    def test_variant_must_agree_with_source(self):
        rows = [_r("r1", sid="s1", tag="orig"), _r("r2", sid="s2", source="r1", tag="aug1")]
        with pytest.raises(ValidationError, match="disagrees"):
            DatasetManifest.from_records(rows)

    def test_feature_dim_must_be_consistent(self):
        rows = [_r("r1", features=(1.0, 2.0)), _r("r2", features=(1.0,))]
        with pytest.raises(ValidationError, match="dimension"):
            DatasetManifest.from_records(rows)

    def test_empty_feature_vector_rejected(self):
        with pytest.raises(ValidationError, match="empty"):
            DatasetManifest.from_records([_r("r1", features=())])

    def test_features_may_be_partially_absent(self):
        m = DatasetManifest.from_records([_r("r1", features=(1.0,)), _r("r2")])
        assert m.feature_dim == 1

    def test_no_features_at_all(self):
        m = DatasetManifest.from_records([_r("r1")])
        assert m.feature_dim is None

    @pytest.mark.parametrize("visit", [-1, 1.5, True, "2"])
    def test_bad_visit_index(self, visit):
        with pytest.raises(ValidationError):
            DatasetManifest.from_records([RecordEntry("r1", "s1", visit, "a")])

    def test_empty_identifiers_rejected(self):
        with pytest.raises(ValidationError):
            DatasetManifest.from_records([_r("")])


class TestAccessors:
    def test_lineage_groups_source_first(self, lineage_manifest):
        groups = lineage_manifest.lineage_groups()
        g = groups["a-s000-v0"]
        assert g == ("a-s000-v0", "a-s000-v0-aug1")
        assert all(ids[0] == key for key, ids in groups.items())

    def test_lineage_groups_without_lineage_are_singletons(self, plain_manifest):
        groups = plain_manifest.lineage_groups()
        assert all(len(ids) == 1 for ids in groups.values())
        assert not plain_manifest.has_lineage()

    def test_subject_index(self, plain_manifest):
        assert plain_manifest.subjects["a-s000"] == ("a-s000-v0", "a-s000-v1")


class TestSummarize:
    def test_order_and_counts(self, plain_manifest):
        summaries = summarize_subjects(plain_manifest)
        assert [s.subject_id for s in summaries] == sorted(plain_manifest.subjects)
        assert summaries[0].n_records == 2

    def test_majority_label(self):
        rows = [
            _r("r1", sid="s1", label="a"),
            _r("r2", sid="s1", visit=1, label="b"),
            _r("r3", sid="s1", visit=2, label="b"),
        ]
        m = DatasetManifest.from_records(rows)
        (summary,) = summarize_subjects(m)
        assert summary.majority_label == "b"
        assert summary.is_mixed
        assert summary.label_histogram == {"a": 1, "b": 2}

    def test_majority_tie_breaks_to_earlier_class(self):
        rows = [_r("r1", sid="s1", label="b"), _r("r2", sid="s1", visit=1, label="a")]
        m = DatasetManifest.from_records(rows)
        assert summarize_subjects(m)[0].majority_label == "a"
        m2 = DatasetManifest.from_records(rows, classes=("b", "a"))
        assert summarize_subjects(m2)[0].majority_label == "b"


class TestRoundTrip:
    def _manifest(self):
        entries = make_entries("a", [2, 1], multiplicity=2)
        entries += [
            RecordEntry("b-x", "b-s0", 3, "b", features=(0.25, -1.5, 3.0000001))
        ]
        return DatasetManifest.from_records(entries)

    @pytest.mark.parametrize("suffix", [".csv", ".jsonl"])
    def test_round_trip_preserves_everything(self, tmp_path, suffix):
        m = self._manifest()
        path = tmp_path / f"m{suffix}"
        save_manifest(m, path)
        again = load_manifest(path)
        assert again.records == m.records
        assert again.classes == m.classes

    def test_save_is_byte_stable(self, tmp_path):
        m = self._manifest()
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        save_manifest(m, p1)
        save_manifest(m, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_ndjson_suffix_reads_as_jsonl(self, tmp_path):
        m = self._manifest()
        path = tmp_path / "m.ndjson"
        save_manifest(m, path)
        assert load_manifest(path).records == m.records

    def test_unknown_suffix_needs_explicit_format(self, tmp_path):
        m = self._manifest()
        with pytest.raises(ParseError, match="infer"):
            save_manifest(m, tmp_path / "m.dat")
        save_manifest(m, tmp_path / "m.dat", format="csv")
        assert load_manifest(tmp_path / "m.dat", format="csv").records == m.records


class TestParseErrors:
    def test_csv_bad_header(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("record,subject\nr1,s1\n")
        with pytest.raises(ParseError, match="header"):
            load_manifest(p)

    def test_csv_empty_file(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("")
        with pytest.raises(ParseError, match="empty"):
            load_manifest(p)

    def test_csv_bad_visit_reports_row(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text(
            "record_id,subject_id,visit_index,class_label,source_record_id,transform_tag,features\n"
            "r1,s1,0,a,,,\n"
            "r2,s1,x,a,,,\n"
        )
        with pytest.raises(ParseError, match="row 3"):
            load_manifest(p)

    def test_csv_bad_features_reports_row(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text(
            "record_id,subject_id,visit_index,class_label,source_record_id,transform_tag,features\n"
            "r1,s1,0,a,,,1.0;oops\n"
        )
        with pytest.raises(ParseError, match="row 2"):
            load_manifest(p)

    def test_jsonl_missing_field(self, tmp_path):
        p = tmp_path / "m.jsonl"
        p.write_text('{"record_id": "r1", "subject_id": "s1", "visit_index": 0}\n')
        with pytest.raises(ParseError, match="class_label"):
            load_manifest(p)

    def test_jsonl_unknown_field(self, tmp_path):
        p = tmp_path / "m.jsonl"
        p.write_text(
            '{"record_id": "r1", "subject_id": "s1", "visit_index": 0,'
            ' "class_label": "a", "extra": 1}\n'
        )
        with pytest.raises(ParseError, match="extra"):
            load_manifest(p)

    def test_jsonl_malformed_line_reports_row(self, tmp_path):
        p = tmp_path / "m.jsonl"
        p.write_text(
            '{"record_id": "r1", "subject_id": "s1", "visit_index": 0, "class_label": "a"}\n'
            "not json\n"
        )
        with pytest.raises(ParseError, match="row 2"):
            load_manifest(p)

    def test_validation_applies_after_parse(self, tmp_path):
        p = tmp_path / "m.jsonl"
        line = '{"record_id": "r1", "subject_id": "s1", "visit_index": 0, "class_label": "a"}\n'
        p.write_text(line + line)
        with pytest.raises(ValidationError, match="duplicate"):
            load_manifest(p)
