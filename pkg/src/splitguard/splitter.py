"""Cross-validation planning for longitudinal record collections.

Three schemes differ only in what they treat as an indivisible unit when
dealing folds:

* ``subject_wise`` deals whole subjects, so no subject ever straddles the
  test boundary. Stratification uses each subject's majority label.
* ``record_wise`` deals lineage groups (a source record together with its
  augmented variants), stratified by class. Subjects are free to straddle
  folds, which is exactly the leak this package exists to expose.
* ``late_wise`` deals individual post-augmentation records in their
  sibling-adjacent order without shuffling, so consecutive variants of
  one source land in different folds.

Every fold partitions the manifest into train, validation and test record
sets. Validation is carved out of the non-test side: whole subjects for
``subject_wise`` (no subject straddles the train/val boundary either), a
seeded per-class record sample for the other two schemes.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    DegenerateLateSplit,
    FoldOutOfRange,
    InsufficientRecords,
    InsufficientSubjects,
    InvalidConfig,
    ParseError,
)
from .manifest import DatasetManifest, summarize_subjects
from .seeding import check_seed, class_stream, derived_stream

PLAN_SCHEMA_VERSION = 1


class Scheme(str, enum.Enum):
    SUBJECT_WISE = "subject_wise"
    RECORD_WISE = "record_wise"
    LATE_WISE = "late_wise"

    @classmethod
    def parse(cls, text: str) -> "Scheme":
        aliases = {
            "subject": cls.SUBJECT_WISE,
            "subject_wise": cls.SUBJECT_WISE,
            "record": cls.RECORD_WISE,
            "record_wise": cls.RECORD_WISE,
            "late": cls.LATE_WISE,
            "late_wise": cls.LATE_WISE,
        }
        key = text.strip().lower().replace("-", "_")
        try:
            return aliases[key]
        except KeyError:
            raise InvalidConfig(f"unknown scheme {text!r}") from None


@dataclass(frozen=True)
class SplitConfig:
    scheme: Scheme
    seed: int = 0
    k: int = 5
    val_fraction_of_total: float = 0.10
    allow_degenerate_late: bool = False

    def __post_init__(self) -> None:
        if not isinstance(self.scheme, Scheme):
            object.__setattr__(self, "scheme", Scheme.parse(str(self.scheme)))
        check_seed(self.seed)
        if not isinstance(self.k, int) or isinstance(self.k, bool) or self.k < 2:
            raise InvalidConfig(f"k must be an integer >= 2, got {self.k!r}")
        v = self.val_fraction_of_total
        if not (0.0 <= v < (self.k - 1) / self.k):
            # the test fold already takes 1/k, so validation must fit
            # strictly inside the remaining (k-1)/k
            raise InvalidConfig(
                f"val_fraction_of_total must be in [0, {(self.k - 1) / self.k:.3f}) "
                f"for k={self.k}, got {v}"
            )


@dataclass(frozen=True)
class FoldRoles:
    fold: int
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]


@dataclass(frozen=True)
class FoldPlan:
    scheme: Scheme
    seed: int
    k: int
    assignment: dict[str, int] = field(compare=False)
    roles: tuple[FoldRoles, ...] = ()

    def __post_init__(self) -> None:
        # assignment and roles describe the same partition; keep them
        # consistent by construction, not by trusting callers
        if len(self.roles) != self.k:
            raise InvalidConfig(f"plan needs exactly k={self.k} role sets")

    def fold(self, fold_index: int) -> FoldRoles:
        if not isinstance(fold_index, int) or not 0 <= fold_index < self.k:
            raise FoldOutOfRange(f"fold {fold_index!r} out of range for k={self.k}")
        return self.roles[fold_index]

    def to_json_dict(self) -> dict:
        return {
            "schema_version": PLAN_SCHEMA_VERSION,
            "k": self.k,
            "scheme": self.scheme.value,
            "seed": self.seed,
            "assignment": {rid: self.assignment[rid] for rid in sorted(self.assignment)},
            "roles": [
                {
                    "fold": r.fold,
                    "train": sorted(r.train),
                    "val": sorted(r.val),
                    "test": sorted(r.test),
                }
                for r in self.roles
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json_dict(cls, obj: dict) -> "FoldPlan":
        if not isinstance(obj, dict):
            raise ParseError("plan must be a JSON object")
        version = obj.get("schema_version")
        if version != PLAN_SCHEMA_VERSION:
            raise ParseError(f"unsupported plan schema_version {version!r}")
        required = {"k", "scheme", "seed", "assignment", "roles"}
        missing = required - obj.keys()
        if missing:
            raise ParseError(f"plan missing fields {sorted(missing)}")
        try:
            scheme = Scheme.parse(obj["scheme"])
            k = int(obj["k"])
            assignment = {str(rid): int(f) for rid, f in obj["assignment"].items()}
            roles_raw = obj["roles"]
            if not isinstance(roles_raw, list) or len(roles_raw) != k:
                raise ParseError(f"plan must contain exactly k={k} role sets")
            roles = []
            for i, rr in enumerate(roles_raw):
                if rr.get("fold") != i:
                    raise ParseError(f"role set {i}: fold index out of order")
                roles.append(
                    FoldRoles(
                        fold=i,
                        train=tuple(str(x) for x in rr["train"]),
                        val=tuple(str(x) for x in rr["val"]),
                        test=tuple(str(x) for x in rr["test"]),
                    )
                )
        except ParseError:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ParseError(f"malformed plan ({exc})") from None
        return cls(
            scheme=scheme,
            seed=int(obj["seed"]),
            k=k,
            assignment=assignment,
            roles=tuple(roles),
        )

    @classmethod
    def from_json(cls, text: str) -> "FoldPlan":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed plan JSON ({exc.msg})") from None
        return cls.from_json_dict(obj)


def save_plan(plan: FoldPlan, path: str | Path) -> None:
    Path(path).write_text(plan.to_json(), encoding="utf-8")


def load_plan(path: str | Path) -> FoldPlan:
    return FoldPlan.from_json(Path(path).read_text(encoding="utf-8"))


def derive_train_val_test(plan: FoldPlan, fold: int) -> dict[str, frozenset[str]]:
    """The three roles for one fold as sets keyed train/val/test."""
    r = plan.fold(fold)
    return {
        "train": frozenset(r.train),
        "val": frozenset(r.val),
        "test": frozenset(r.test),
    }


# -- unit construction ------------------------------------------------------

def _units_for_scheme(m: DatasetManifest, scheme: Scheme) -> dict[str, list[tuple[str, ...]]]:
    """Group record ids into deal units keyed by class label.

    Unit order per class is the deterministic pre-shuffle order:
    lexicographic by unit key for the shuffled schemes, and for
    ``late_wise`` the sequential order (sources as they appear in the
    manifest, each immediately followed by its variants, original first
    then transform tags lexicographically) which is never shuffled.
    """
    units: dict[str, list[tuple[str, ...]]] = {c: [] for c in m.classes}
    if scheme is Scheme.SUBJECT_WISE:
        for summary in summarize_subjects(m):
            units[summary.majority_label].append(m.subjects[summary.subject_id])
    elif scheme is Scheme.RECORD_WISE:
        groups = m.lineage_groups()
        for source_id in sorted(groups):
            label = m.get(source_id).class_label
            units[label].append(groups[source_id])
    else:
        groups = m.lineage_groups()
        source_order = [r.record_id for r in m.records if not r.is_augmented]
        for source_id in source_order:
            label = m.get(source_id).class_label
            members = groups[source_id]
            ordered = [members[0]] + sorted(
                members[1:], key=lambda rid: m.get(rid).transform_tag or ""
            )
            units[label].extend((rid,) for rid in ordered)
    return units


def _check_preconditions(m: DatasetManifest, config: SplitConfig) -> None:
    if not m.records:
        raise InsufficientRecords("manifest has no records")
    if config.scheme is Scheme.SUBJECT_WISE:
        counts: dict[str, int] = {c: 0 for c in m.classes}
        for summary in summarize_subjects(m):
            counts[summary.majority_label] += 1
        for c, n in counts.items():
            if n < config.k:
                raise InsufficientSubjects(
                    f"class {c!r} has {n} subjects, fewer than k={config.k}"
                )
    else:
        counts = {c: 0 for c in m.classes}
        for r in m.records:
            counts[r.class_label] += 1
        for c, n in counts.items():
            if n < config.k:
                raise InsufficientRecords(
                    f"class {c!r} has {n} records, fewer than k={config.k}"
                )
    if (
        config.scheme is Scheme.LATE_WISE
        and not m.has_lineage()
        and not config.allow_degenerate_late
    ):
        raise DegenerateLateSplit(
            "late_wise on a manifest without augmented records degenerates to an "
            "unshuffled record split; pass allow_degenerate_late to proceed"
        )


def _deal_folds(m: DatasetManifest, config: SplitConfig) -> dict[str, int]:
    """Assign every record to one test fold; returns record_id -> fold."""
    units = _units_for_scheme(m, config.scheme)
    assignment: dict[str, int] = {}
    for label in m.classes:
        class_units = units[label]
        if config.scheme is Scheme.LATE_WISE:
            order = list(range(len(class_units)))
        else:
            rng = class_stream(config.seed, label)
            order = list(rng.permutation(len(class_units)))
        for position, unit_idx in enumerate(order):
            for rid in class_units[unit_idx]:
                assignment[rid] = position % config.k
    return assignment


def _carve_val_subject_wise(
    m: DatasetManifest, config: SplitConfig, fold_index: int, pool: set[str]
) -> set[str]:
    """Whole subjects until the record target is met.

    Target is floor(val_fraction_of_total * total records). Subjects are
    scanned in one seeded order; any subject that would push the count
    past twice the target is skipped, so the set converges near the
    target even with uneven subject sizes.
    """
    target = int(config.val_fraction_of_total * len(m.records))
    if target == 0:
        return set()
    cap = 2 * target
    candidates = sorted(
        s for s in m.subjects if all(rid in pool for rid in m.subjects[s])
    )
    rng = derived_stream(config.seed, "val", fold_index)
    val: set[str] = set()
    count = 0
    for idx in rng.permutation(len(candidates)):
        if count >= target:
            break
        ids = m.subjects[candidates[idx]]
        if count + len(ids) > cap:
            continue
        val.update(ids)
        count += len(ids)
    return val


def _carve_val_record_sample(
    m: DatasetManifest, config: SplitConfig, fold_index: int, pool: set[str]
) -> set[str]:
    """Seeded per-class record sample at val_fraction_of_total of each class."""
    class_counts: dict[str, int] = {c: 0 for c in m.classes}
    for r in m.records:
        class_counts[r.class_label] += 1
    val: set[str] = set()
    for label in m.classes:
        target = int(config.val_fraction_of_total * class_counts[label])
        candidates = sorted(rid for rid in pool if m.get(rid).class_label == label)
        rng = derived_stream(config.seed, "val", fold_index, label)
        take = min(target, len(candidates))
        for idx in rng.permutation(len(candidates))[:take]:
            val.add(candidates[idx])
    return val


def plan_split(m: DatasetManifest, config: SplitConfig) -> FoldPlan:
    """Produce a k-fold train/val/test plan for the configured scheme.

    Pure function of (manifest, config); role tuples are sorted so that
    serialized plans are byte-stable.
    """
    _check_preconditions(m, config)
    assignment = _deal_folds(m, config)
    roles = []
    for fold_index in range(config.k):
        test = {rid for rid, f in assignment.items() if f == fold_index}
        pool = {rid for rid in assignment if rid not in test}
        if config.val_fraction_of_total == 0.0:
            val: set[str] = set()
        elif config.scheme is Scheme.SUBJECT_WISE:
            val = _carve_val_subject_wise(m, config, fold_index, pool)
        else:
            val = _carve_val_record_sample(m, config, fold_index, pool)
        train = pool - val
        roles.append(
            FoldRoles(
                fold=fold_index,
                train=tuple(sorted(train)),
                val=tuple(sorted(val)),
                test=tuple(sorted(test)),
            )
        )
    return FoldPlan(
        scheme=config.scheme,
        seed=config.seed,
        k=config.k,
        assignment=assignment,
        roles=tuple(roles),
    )


def split_subject_wise(m: DatasetManifest, config: SplitConfig) -> FoldPlan:
    if config.scheme is not Scheme.SUBJECT_WISE:
        raise InvalidConfig("config scheme must be subject_wise")
    return plan_split(m, config)


def split_record_wise(m: DatasetManifest, config: SplitConfig) -> FoldPlan:
    if config.scheme is not Scheme.RECORD_WISE:
        raise InvalidConfig("config scheme must be record_wise")
    return plan_split(m, config)


def split_late_wise(m: DatasetManifest, config: SplitConfig) -> FoldPlan:
    if config.scheme is not Scheme.LATE_WISE:
        raise InvalidConfig("config scheme must be late_wise")
    return plan_split(m, config)
