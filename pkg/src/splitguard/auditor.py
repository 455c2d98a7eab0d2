"""Leakage audits for fold plans.

The protected boundary is the line between a fold's test set and
everything trained on (train plus validation; validation is merged into
the protected side deliberately). Two finding kinds are errors and flip
the verdict to leaky:

* ``subject_overlap``: a subject has records on both sides of a fold's
  test boundary.
* ``lineage_overlap``: a source record and any of its descendants (or
  two siblings) straddle a fold's test boundary.

``cross_manifest_subject`` and ``mixed_label_subject`` findings are
warnings and never change the verdict; stratification balance is
reported in its own table with scheme-appropriate tolerances.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import PlanManifestMismatch
from .manifest import DatasetManifest, summarize_subjects
from .splitter import FoldPlan, Scheme

AUDIT_SCHEMA_VERSION = 1

WARNING_KINDS = ("cross_manifest_subject", "mixed_label_subject")

_GREEN = "\x1b[32m"
_RED = "\x1b[31m"
_RESET = "\x1b[0m"


@dataclass(frozen=True)
class LeakFinding:
    """kind decides the identifier: subject kinds carry subject_id,
    lineage_overlap carries the source record_id. fold is None for
    findings not tied to one fold."""

    kind: str
    detail: str
    fold: int | None = None
    subject_id: str | None = None
    record_id: str | None = None

    def to_json_dict(self) -> dict:
        out: dict = {"kind": self.kind, "fold": self.fold, "detail": self.detail}
        if self.record_id is not None:
            out["record_id"] = self.record_id
        else:
            out["subject_id"] = self.subject_id
        return out


@dataclass(frozen=True)
class BalanceTable:
    """Per fold and class test-record counts with per-class tolerances.

    A class is flagged when its per-fold counts spread wider than its
    tolerance: 1 record for late splits, the largest lineage group for
    record-wise splits, the largest subject for subject-wise splits
    (whole-unit dealing makes that much spread unavoidable).
    """

    classes: tuple[str, ...]
    counts: dict[str, tuple[int, ...]]
    tolerances: dict[str, int]
    flagged: tuple[str, ...]

    def to_json_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "counts": {c: list(self.counts[c]) for c in self.classes},
            "tolerances": dict(self.tolerances),
            "flagged": list(self.flagged),
        }


@dataclass(frozen=True)
class AuditReport:
    scheme: str
    k: int
    seed: int
    n_records: int
    n_subjects: int
    findings: tuple[LeakFinding, ...]
    balance: BalanceTable

    @property
    def n_subject_overlap(self) -> int:
        return sum(1 for f in self.findings if f.kind == "subject_overlap")

    @property
    def n_lineage_overlap(self) -> int:
        return sum(1 for f in self.findings if f.kind == "lineage_overlap")

    @property
    def warnings(self) -> tuple[LeakFinding, ...]:
        return tuple(f for f in self.findings if f.kind in WARNING_KINDS)

    @property
    def verdict(self) -> str:
        return "leaky" if self.n_subject_overlap or self.n_lineage_overlap else "clean"

    def to_json_dict(self) -> dict:
        return {
            "schema_version": AUDIT_SCHEMA_VERSION,
            "scheme": self.scheme,
            "k": self.k,
            "seed": self.seed,
            "n_records": self.n_records,
            "n_subjects": self.n_subjects,
            "verdict": self.verdict,
            "counts": {
                "n_subject_overlap": self.n_subject_overlap,
                "n_lineage_overlap": self.n_lineage_overlap,
            },
            "findings": [f.to_json_dict() for f in self.findings],
            "balance": self.balance.to_json_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"


def check_plan_matches(plan: FoldPlan, m: DatasetManifest) -> None:
    """Every fold must partition exactly the manifest's record ids."""
    manifest_ids = set(m.by_id)
    for r in plan.roles:
        parts = (r.train, r.val, r.test)
        combined = [rid for part in parts for rid in part]
        combined_set = set(combined)
        if len(combined) != len(combined_set):
            raise PlanManifestMismatch(
                f"fold {r.fold}: record ids repeat across train/val/test"
            )
        unknown = combined_set - manifest_ids
        if unknown:
            raise PlanManifestMismatch(
                f"fold {r.fold}: {len(unknown)} record ids not in manifest "
                f"(e.g. {sorted(unknown)[0]!r})"
            )
        missing = manifest_ids - combined_set
        if missing:
            raise PlanManifestMismatch(
                f"fold {r.fold}: {len(missing)} manifest records unassigned "
                f"(e.g. {sorted(missing)[0]!r})"
            )
        bad_assign = [rid for rid in r.test if plan.assignment.get(rid) != r.fold]
        if bad_assign:
            raise PlanManifestMismatch(
                f"fold {r.fold}: test set disagrees with assignment map "
                f"(e.g. {bad_assign[0]!r})"
            )


def audit_subject_overlap(m: DatasetManifest, plan: FoldPlan) -> list[LeakFinding]:
    """One finding per (fold, subject) with records on both boundary sides."""
    check_plan_matches(plan, m)
    findings = []
    for r in plan.roles:
        test_subjects = {m.get(rid).subject_id for rid in r.test}
        trained_subjects = {m.get(rid).subject_id for rid in r.train}
        trained_subjects |= {m.get(rid).subject_id for rid in r.val}
        for subject_id in sorted(test_subjects & trained_subjects):
            findings.append(
                LeakFinding(
                    kind="subject_overlap",
                    fold=r.fold,
                    subject_id=subject_id,
                    detail=(
                        f"subject {subject_id!r} has records in both the test set "
                        f"and the trained side of fold {r.fold}"
                    ),
                )
            )
    return findings


def audit_lineage_overlap(m: DatasetManifest, plan: FoldPlan) -> list[LeakFinding]:
    """One finding per (fold, source record) whose descendants straddle."""
    check_plan_matches(plan, m)
    findings = []
    for r in plan.roles:
        test_sources = {m.get(rid).source_key for rid in r.test}
        trained_sources = {m.get(rid).source_key for rid in r.train}
        trained_sources |= {m.get(rid).source_key for rid in r.val}
        for source_id in sorted(test_sources & trained_sources):
            findings.append(
                LeakFinding(
                    kind="lineage_overlap",
                    fold=r.fold,
                    record_id=source_id,
                    detail=(
                        f"records descended from {source_id!r} sit on both sides "
                        f"of the test boundary of fold {r.fold}"
                    ),
                )
            )
    return findings


def _balance_tolerances(m: DatasetManifest, scheme: Scheme) -> dict[str, int]:
    # record-level schemes owe exact balance; subject-whole assignment can
    # only be fair up to the largest subject in the class
    tol = {c: 1 for c in m.classes}
    if scheme is Scheme.SUBJECT_WISE:
        for summary in summarize_subjects(m):
            label = summary.majority_label
            tol[label] = max(tol[label], summary.n_records)
    return tol


def audit_balance(m: DatasetManifest, plan: FoldPlan) -> BalanceTable:
    """Per fold and class test-record counts; flag classes spread past tolerance."""
    check_plan_matches(plan, m)
    counts = {c: [0] * plan.k for c in m.classes}
    for rid, fold in plan.assignment.items():
        counts[m.get(rid).class_label][fold] += 1
    tol = _balance_tolerances(m, plan.scheme)
    flagged = tuple(
        c for c in m.classes if max(counts[c]) - min(counts[c]) > tol[c]
    )
    return BalanceTable(
        classes=m.classes,
        counts={c: tuple(v) for c, v in counts.items()},
        tolerances=tol,
        flagged=flagged,
    )


def audit_cross_manifest(
    train_m: DatasetManifest, holdout_m: DatasetManifest
) -> list[LeakFinding]:
    """One warning per subject appearing in both manifests."""
    shared = sorted(set(train_m.subjects) & set(holdout_m.subjects))
    return [
        LeakFinding(
            kind="cross_manifest_subject",
            fold=None,
            subject_id=subject_id,
            detail=f"subject {subject_id!r} appears in both manifests",
        )
        for subject_id in shared
    ]


def audit_plan(
    plan: FoldPlan,
    m: DatasetManifest,
    holdout: DatasetManifest | None = None,
) -> AuditReport:
    """Compose all audits into one report.

    Raises PlanManifestMismatch before auditing when the plan does not
    partition the manifest, since findings would be meaningless then.
    """
    check_plan_matches(plan, m)
    findings: list[LeakFinding] = []
    findings.extend(audit_subject_overlap(m, plan))
    findings.extend(audit_lineage_overlap(m, plan))
    for summary in summarize_subjects(m):
        if summary.is_mixed:
            findings.append(
                LeakFinding(
                    kind="mixed_label_subject",
                    fold=None,
                    subject_id=summary.subject_id,
                    detail=(
                        f"subject {summary.subject_id!r} carries more than one label "
                        f"({summary.label_histogram}); stratified by majority"
                    ),
                )
            )
    if holdout is not None:
        findings.extend(audit_cross_manifest(m, holdout))
    return AuditReport(
        scheme=plan.scheme.value,
        k=plan.k,
        seed=plan.seed,
        n_records=len(m.records),
        n_subjects=len(m.subjects),
        findings=tuple(findings),
        balance=audit_balance(m, plan),
    )


def render_text(report: AuditReport, color: bool = False) -> str:
    """Terminal rendering: findings, balance table, verdict last."""
    lines = [
        f"split audit: scheme={report.scheme} k={report.k} seed={report.seed}",
        f"records={report.n_records} subjects={report.n_subjects}",
        f"subject_overlap findings: {report.n_subject_overlap}",
        f"lineage_overlap findings: {report.n_lineage_overlap}",
    ]
    for f in report.findings:
        if f.kind not in WARNING_KINDS:
            lines.append(f"  [fold {f.fold}] {f.kind}: {f.detail}")
    warnings = report.warnings
    lines.append(f"warnings: {len(warnings)}")
    for f in warnings:
        lines.append(f"  {f.kind}: {f.detail}")
    lines.append("test records per fold by class (tolerance):")
    for c in report.balance.classes:
        row = " ".join(f"{n:4d}" for n in report.balance.counts[c])
        mark = "  UNBALANCED" if c in report.balance.flagged else ""
        lines.append(f"  {c:>12s} {row}  ({report.balance.tolerances[c]}){mark}")
    verdict = report.verdict
    if color:
        paint = _GREEN if verdict == "clean" else _RED
        verdict = f"{paint}{verdict}{_RESET}"
    lines.append(f"verdict: {verdict}")
    return "\n".join(lines) + "\n"
