"""Evaluation protocol: per-fold training, hold-out scoring, comparisons.

Two deliberately simple oracle classifiers stand in for a deep model.
knn1 predicts the label of the Euclidean-nearest training record, which
makes it maximally memorization-prone: if a split lets the test set
share subjects with training, knn1 will match records to their
fingerprint twins and look spuriously accurate. class_centroid predicts
the nearest per-class mean; averaging washes individual fingerprints
out, so it serves as the shortcut-free control. Comparing the two on
identical splits separates genuine signal from identity leakage.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.stats import f as f_dist

from .auditor import audit_plan
from .errors import (
    ClassMismatch,
    DimensionMismatch,
    EmptyInput,
    EmptyTrainingSet,
    InsufficientGroups,
    InvalidConfig,
    LengthMismatch,
    MissingClass,
    MissingFeatures,
    ValidationError,
)
from .kernels import nearest_index
from .manifest import DatasetManifest, RecordEntry
from .splitter import Scheme, SplitConfig, derive_train_val_test, plan_split
from .synth import (
    SynthConfig,
    augment_records,
    generate_cohort,
    generate_holdout,
    identity_dominance_rate,
)

ORACLE_KINDS = ("knn1", "class_centroid")

METRIC_NAMES = ("accuracy", "precision", "recall", "f1")

SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class OracleModel:
    """A fitted classifier. knn1 keeps every training row (sorted by
    record_id so equidistant ties resolve to the smallest id); centroid
    keeps one mean per class, in class order."""

    kind: str
    classes: tuple[str, ...]
    row_labels: tuple[str, ...]
    matrix: np.ndarray

    @property
    def feature_dim(self) -> int:
        return int(self.matrix.shape[1])


def fit(kind: str, records: list[RecordEntry], classes: tuple[str, ...] | None = None) -> OracleModel:
    """Fit an oracle on training records.

    classes fixes the expected label set (a centroid model must see at
    least one record of each); when omitted it is inferred as the sorted
    labels present.
    """
    if kind not in ORACLE_KINDS:
        raise InvalidConfig(f"unknown oracle kind {kind!r}, expected one of {ORACLE_KINDS}")
    if not records:
        raise EmptyTrainingSet("cannot fit on zero training records")
    for r in records:
        if r.features is None:
            raise MissingFeatures(f"record {r.record_id!r} has no feature vector")
    dims = {len(r.features) for r in records}
    if len(dims) != 1:
        raise DimensionMismatch(f"training records mix feature dimensions {sorted(dims)}")
    if classes is None:
        classes = tuple(sorted({r.class_label for r in records}))
    if kind == "knn1":
        ordered = sorted(records, key=lambda r: r.record_id)
        matrix = np.asarray([r.features for r in ordered], dtype=np.float64)
        labels = tuple(r.class_label for r in ordered)
        return OracleModel(kind="knn1", classes=classes, row_labels=labels, matrix=matrix)
    rows = []
    for c in classes:
        members = [r.features for r in records if r.class_label == c]
        if not members:
            raise MissingClass(f"no training records for class {c!r}")
        rows.append(np.asarray(members, dtype=np.float64).mean(axis=0))
    return OracleModel(
        kind="class_centroid",
        classes=classes,
        row_labels=classes,
        matrix=np.asarray(rows, dtype=np.float64),
    )


def _predict_matrix(model: OracleModel, queries: np.ndarray) -> list[str]:
    if queries.shape[1] != model.feature_dim:
        raise DimensionMismatch(
            f"query dimension {queries.shape[1]} != model dimension {model.feature_dim}"
        )
    idx = nearest_index(model.matrix, queries)
    return [model.row_labels[int(i)] for i in idx]


def predict(model: OracleModel, features) -> str:
    """Predict one record's class from its feature vector."""
    q = np.asarray(features, dtype=np.float64).reshape(1, -1)
    return _predict_matrix(model, q)[0]


@dataclass(frozen=True)
class MetricSet:
    """Accuracy plus macro-averaged precision/recall/F1 on one eval set."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    averaging: str = "macro"
    n_eval: int = 0

    def to_json_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "averaging": self.averaging,
            "n_eval": self.n_eval,
        }


def compute_metrics(
    predictions: list[str], truths: list[str], classes: tuple[str, ...]
) -> MetricSet:
    """Confusion-matrix metrics, macro-averaged over the given classes.

    A class with zero predicted instances contributes 0 to macro
    precision; zero true instances contributes 0 to macro recall; F1 of
    a class is 0 when precision + recall is 0.
    """
    if len(predictions) != len(truths):
        raise LengthMismatch(
            f"{len(predictions)} predictions for {len(truths)} truths"
        )
    if not predictions:
        raise EmptyInput("cannot score an empty evaluation set")
    known = set(classes)
    stray = (set(predictions) | set(truths)) - known
    if stray:
        raise ClassMismatch(f"labels {sorted(stray)} not in class list {list(classes)}")
    n = len(truths)
    correct = sum(1 for p, t in zip(predictions, truths) if p == t)
    precisions, recalls, f1s = [], [], []
    for c in classes:
        tp = sum(1 for p, t in zip(predictions, truths) if p == c and t == c)
        pred_c = sum(1 for p in predictions if p == c)
        true_c = sum(1 for t in truths if t == c)
        prec = tp / pred_c if pred_c else 0.0
        rec = tp / true_c if true_c else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        precisions.append(prec)
        recalls.append(rec)
        f1s.append(f1)
    return MetricSet(
        accuracy=correct / n,
        precision=statistics.fmean(precisions),
        recall=statistics.fmean(recalls),
        f1=statistics.fmean(f1s),
        averaging="macro",
        n_eval=n,
    )


def _aggregate(per_fold: tuple[MetricSet, ...]) -> tuple[dict, dict]:
    mean, sd = {}, {}
    for name in METRIC_NAMES:
        values = [getattr(ms, name) for ms in per_fold]
        mean[name] = statistics.fmean(values)
        # population sd: folds are the whole population, not a sample
        sd[name] = statistics.pstdev(values)
    return mean, sd


@dataclass(frozen=True, eq=False)
class CvResult:
    """Per-fold test metrics under one scheme, with fold models retained
    so they can be re-evaluated on a hold-out manifest later."""

    scheme: Scheme
    oracle: str
    k: int
    seed: int
    per_fold: tuple[MetricSet, ...]
    per_fold_models: tuple[OracleModel, ...]
    mean: dict
    sd: dict

    def to_json_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "oracle": self.oracle,
            "k": self.k,
            "seed": self.seed,
            "per_fold": [ms.to_json_dict() for ms in self.per_fold],
            "mean": dict(self.mean),
            "sd": dict(self.sd),
        }


@dataclass(frozen=True, eq=False)
class HoldoutResult:
    """Each retained fold model scored on the full hold-out manifest."""

    scheme: Scheme
    oracle: str
    k: int
    seed: int
    per_fold: tuple[MetricSet, ...]
    mean: dict
    sd: dict

    def to_json_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "oracle": self.oracle,
            "k": self.k,
            "seed": self.seed,
            "per_fold": [ms.to_json_dict() for ms in self.per_fold],
            "mean": dict(self.mean),
            "sd": dict(self.sd),
        }


def _records_features(m: DatasetManifest, ids: list[str]) -> np.ndarray:
    rows = []
    for rid in ids:
        r = m.get(rid)
        if r.features is None:
            raise MissingFeatures(f"record {rid!r} has no feature vector")
        rows.append(r.features)
    return np.asarray(rows, dtype=np.float64)


def run_cv(m: DatasetManifest, cfg: SplitConfig, oracle: str) -> CvResult:
    """Plan a split and run the fold protocol: fit on train, score on
    test. Validation records are excluded from both; the oracles have
    nothing to tune, but the eval set must not shrink or grow relative
    to a protocol that does tune on them."""
    plan = plan_split(m, cfg)
    per_fold: list[MetricSet] = []
    models: list[OracleModel] = []
    for fold in range(cfg.k):
        roles = derive_train_val_test(plan, fold)
        train = [m.get(rid) for rid in sorted(roles["train"])]
        test_ids = sorted(roles["test"])
        model = fit(oracle, train, classes=m.classes)
        preds = _predict_matrix(model, _records_features(m, test_ids))
        truths = [m.get(rid).class_label for rid in test_ids]
        per_fold.append(compute_metrics(preds, truths, m.classes))
        models.append(model)
    mean, sd = _aggregate(tuple(per_fold))
    return CvResult(
        scheme=cfg.scheme,
        oracle=oracle,
        k=cfg.k,
        seed=cfg.seed,
        per_fold=tuple(per_fold),
        per_fold_models=tuple(models),
        mean=mean,
        sd=sd,
    )


def run_holdout(cv: CvResult, holdout_m: DatasetManifest) -> HoldoutResult:
    """Score every retained fold model on the full hold-out manifest."""
    if not holdout_m.records:
        raise EmptyInput("hold-out manifest has no records")
    model_classes = set(cv.per_fold_models[0].classes)
    holdout_classes = set(holdout_m.classes)
    if model_classes != holdout_classes:
        raise ClassMismatch(
            f"hold-out classes {sorted(holdout_classes)} != model classes "
            f"{sorted(model_classes)}"
        )
    ids = sorted(holdout_m.record_ids())
    queries = _records_features(holdout_m, ids)
    truths = [holdout_m.get(rid).class_label for rid in ids]
    per_fold = []
    for model in cv.per_fold_models:
        preds = _predict_matrix(model, queries)
        per_fold.append(compute_metrics(preds, truths, holdout_m.classes))
    mean, sd = _aggregate(tuple(per_fold))
    return HoldoutResult(
        scheme=cv.scheme,
        oracle=cv.oracle,
        k=cv.k,
        seed=cv.seed,
        per_fold=tuple(per_fold),
        mean=mean,
        sd=sd,
    )


def leakage_gap(cv: CvResult, holdout: HoldoutResult) -> float:
    """CV mean accuracy minus hold-out mean accuracy. Large positive
    values mean the CV estimate would not have survived new subjects."""
    return cv.mean["accuracy"] - holdout.mean["accuracy"]


@dataclass(frozen=True)
class AnovaResult:
    statistic: float
    p_value: float
    df_between: int
    df_within: int
    test_name: str = "oneway_anova"


def anova_oneway(groups: list[list[float]]) -> AnovaResult:
    """One-way fixed-effects ANOVA F-test.

    Degenerate cases are pinned rather than left to floating point:
    zero between-group variance gives F=0, p=1 exactly; zero
    within-group variance with distinct means gives F=inf, p=0.
    """
    if len(groups) < 2:
        raise InsufficientGroups(f"need at least 2 groups, got {len(groups)}")
    if any(len(g) < 2 for g in groups):
        raise InsufficientGroups("every group needs at least 2 observations")
    n_total = sum(len(g) for g in groups)
    grand = statistics.fmean(x for g in groups for x in g)
    means = [statistics.fmean(g) for g in groups]
    ss_between = sum(len(g) * (mu - grand) ** 2 for g, mu in zip(groups, means))
    # a constant group contributes exactly zero spread; summing rounded
    # squares instead would miss the degenerate pins below
    ss_within = sum(
        0.0 if len(set(g)) == 1 else sum((x - mu) ** 2 for x in g)
        for g, mu in zip(groups, means)
    )
    df_between = len(groups) - 1
    df_within = n_total - len(groups)
    if max(means) == min(means):
        return AnovaResult(0.0, 1.0, df_between, df_within)
    if ss_within == 0.0:
        return AnovaResult(math.inf, 0.0, df_between, df_within)
    statistic = (ss_between / df_between) / (ss_within / df_within)
    p_value = float(f_dist.sf(statistic, df_between, df_within))
    return AnovaResult(statistic, p_value, df_between, df_within)


def compare_schemes(results: list[CvResult]) -> dict:
    """F-test of per-fold CV accuracies grouped by scheme.

    The test family is recorded in the output because downstream
    consumers should know exactly which comparison produced the p-value.
    """
    if len(results) < 2 or len({r.scheme for r in results}) < 2:
        raise InsufficientGroups("need CvResults from at least 2 distinct schemes")
    groups = [[ms.accuracy for ms in r.per_fold] for r in results]
    out = anova_oneway(groups)
    return {
        "statistic": out.statistic,
        "p_value": out.p_value,
        "test_name": out.test_name,
    }


DEFAULT_SCHEMES = (Scheme.SUBJECT_WISE, Scheme.RECORD_WISE, Scheme.LATE_WISE)


def run_experiment(
    synth_cfg: SynthConfig,
    seed: int,
    oracle: str = "knn1",
    k: int = 5,
    val_fraction_of_total: float = 0.10,
    schemes: tuple[Scheme, ...] = DEFAULT_SCHEMES,
) -> dict:
    """One full leakage experiment at one seed and one oracle kind.

    The seed overrides the synth config seed and doubles as the split
    seed, so a single integer reproduces the whole run: cohort,
    augmentation, hold-out, every plan, and every metric.
    """
    if oracle not in ORACLE_KINDS:
        raise InvalidConfig(f"unknown oracle kind {oracle!r}, expected one of {ORACLE_KINDS}")
    if not schemes:
        raise InvalidConfig("run_experiment needs at least one scheme")
    cfg = replace(synth_cfg, seed=seed)
    raw = generate_cohort(cfg)
    cohort = augment_records(raw, cfg)
    holdout = generate_holdout(cfg)
    scheme_blocks: dict = {}
    cv_results: list[CvResult] = []
    for scheme in schemes:
        split_cfg = SplitConfig(
            scheme=scheme, seed=seed, k=k, val_fraction_of_total=val_fraction_of_total
        )
        plan = plan_split(cohort, split_cfg)
        audit = audit_plan(plan, cohort, holdout=holdout)
        cv = run_cv(cohort, split_cfg, oracle)
        ho = run_holdout(cv, holdout)
        cv_results.append(cv)
        scheme_blocks[scheme.value] = {
            "audit": audit.to_json_dict(),
            "cv": cv.to_json_dict(),
            "holdout": ho.to_json_dict(),
            "leakage_gap": leakage_gap(cv, ho),
        }
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": "experiment",
        "oracle": oracle,
        "seed": seed,
        "k": k,
        "val_fraction_of_total": val_fraction_of_total,
        "cohort": {
            "classes": list(cohort.classes),
            "n_raw_records": len(raw.records),
            "n_records": len(cohort.records),
            "n_subjects": len({r.subject_id for r in cohort.records}),
            "n_holdout_records": len(holdout.records),
            "n_holdout_subjects": len({r.subject_id for r in holdout.records}),
        },
        "identity_dominance": {
            "raw": identity_dominance_rate(raw),
            "augmented": identity_dominance_rate(cohort),
        },
        "schemes": scheme_blocks,
    }
    if len(schemes) >= 2:
        report["comparison"] = compare_schemes(cv_results)
    return report


def _over_seeds(experiments: list[dict], path: tuple[str, ...]) -> list[float]:
    out = []
    for exp in experiments:
        node = exp
        for key in path:
            node = node[key]
        out.append(node)
    return out


def _summarize(experiments: list[dict], schemes: tuple[Scheme, ...]) -> dict:
    summary: dict = {"cv": {}, "holdout": {}, "leakage_gap": {}}
    for scheme in schemes:
        s = scheme.value
        for block in ("cv", "holdout"):
            summary[block][s] = {}
            for metric in METRIC_NAMES:
                values = _over_seeds(experiments, ("schemes", s, block, "mean", metric))
                summary[block][s][metric] = {
                    "mean": statistics.fmean(values),
                    "sd": statistics.pstdev(values),
                }
        gaps = _over_seeds(experiments, ("schemes", s, "leakage_gap"))
        summary["leakage_gap"][s] = {
            "mean": statistics.fmean(gaps),
            "per_seed": gaps,
        }
    if all("comparison" in exp for exp in experiments):
        p_values = [exp["comparison"]["p_value"] for exp in experiments]
        summary["comparison"] = {
            "test_name": experiments[0]["comparison"]["test_name"],
            "p_values": p_values,
            "n_below_0_05": sum(1 for p in p_values if p < 0.05),
        }
    return summary


def run_simulation(
    synth_cfg: SynthConfig,
    seeds: list[int],
    oracle: str = "knn1",
    k: int = 5,
    val_fraction_of_total: float = 0.10,
    schemes: tuple[Scheme, ...] = DEFAULT_SCHEMES,
) -> dict:
    """Run one experiment per seed and aggregate across seeds."""
    if not seeds:
        raise InvalidConfig("run_simulation needs at least one seed")
    if len(set(seeds)) != len(seeds):
        raise InvalidConfig("duplicate seeds in simulation")
    experiments = [
        run_experiment(synth_cfg, seed, oracle, k, val_fraction_of_total, schemes)
        for seed in seeds
    ]
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "simulation",
        "oracle": oracle,
        "seeds": list(seeds),
        "k": k,
        "val_fraction_of_total": val_fraction_of_total,
        "schemes": [s.value for s in schemes],
        "experiments": experiments,
        "summary": _summarize(experiments, schemes),
    }


def _pct(mean: float, sd: float) -> str:
    return f"{100 * mean:.2f} ± {100 * sd:.2f}"


def render_markdown(sim: dict) -> str:
    """Markdown summary: one metrics table per evaluation surface, with
    every cell a percentage 'mean ± sd' across seeds."""
    if sim.get("kind") != "simulation":
        raise ValidationError("markdown report needs a simulation result")
    summary = sim["summary"]
    seeds = sim["seeds"]
    lines = [
        "# Split scheme leakage report",
        "",
        f"- oracle: {sim['oracle']}",
        f"- folds: {sim['k']}",
        f"- seeds: {', '.join(str(s) for s in seeds)}",
        "- metrics: percent, mean ± population sd across seeds, macro averaging",
        "",
        f"## Cross-validation ({sim['k']}-fold)",
        "",
        "| Scheme | Acc | Prec | Rec | F1 |",
        "| --- | --- | --- | --- | --- |",
    ]
    for s in sim["schemes"]:
        cells = [_pct(summary["cv"][s][mname]["mean"], summary["cv"][s][mname]["sd"])
                 for mname in METRIC_NAMES]
        lines.append(f"| {s} | {' | '.join(cells)} |")
    lines += [
        "",
        "## Hold-out (new subjects)",
        "",
        "| Scheme | Acc | Prec | Rec | F1 |",
        "| --- | --- | --- | --- | --- |",
    ]
    for s in sim["schemes"]:
        cells = [
            _pct(summary["holdout"][s][mname]["mean"], summary["holdout"][s][mname]["sd"])
            for mname in METRIC_NAMES
        ]
        lines.append(f"| {s} | {' | '.join(cells)} |")
    lines += [
        "",
        "## Leakage gap (CV accuracy − hold-out accuracy)",
        "",
        "| Scheme | Mean gap (points) | Seeds with gap > 0 |",
        "| --- | --- | --- |",
    ]
    for s in sim["schemes"]:
        gap = summary["leakage_gap"][s]
        positive = sum(1 for g in gap["per_seed"] if g > 0)
        lines.append(
            f"| {s} | {100 * gap['mean']:+.2f} | {positive}/{len(seeds)} |"
        )
    if "comparison" in summary:
        comp = summary["comparison"]
        lines += [
            "",
            "## Scheme comparison",
            "",
            f"{comp['test_name']} on per-fold CV accuracies: "
            f"p < 0.05 in {comp['n_below_0_05']}/{len(seeds)} seeds "
            f"(min p = {min(comp['p_values']):.4g}, "
            f"max p = {max(comp['p_values']):.4g}).",
        ]
    lines.append("")
    return "\n".join(lines)


def save_result(result: dict, path: str | Path) -> None:
    """Write an experiment or simulation result as canonical JSON."""
    text = json.dumps(result, indent=2, sort_keys=True) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def load_result(path: str | Path) -> dict:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed result JSON: {exc}") from None
    if not isinstance(obj, dict) or obj.get("schema_version") != SCHEMA_VERSION:
        raise ValidationError("result file missing schema_version 1")
    if obj.get("kind") not in ("experiment", "simulation"):
        raise ValidationError("result file kind must be experiment or simulation")
    return obj
