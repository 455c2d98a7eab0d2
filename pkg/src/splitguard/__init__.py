"""Leakage-aware cross-validation planning for longitudinal datasets.

The pipeline: build or load a manifest of records grouped by subject and
lineage, plan k folds under a splitting scheme, audit the plan for
identity leakage across each test boundary, and optionally measure what
that leakage does to apparent accuracy with deliberately trivial models.
"""

from .auditor import (
    AuditReport,
    BalanceTable,
    LeakFinding,
    audit_balance,
    audit_cross_manifest,
    audit_lineage_overlap,
    audit_plan,
    audit_subject_overlap,
    check_plan_matches,
    render_text,
)
from .errors import (
    AlreadyAugmented,
    ClassMismatch,
    DegenerateLateSplit,
    DimensionMismatch,
    EmptyInput,
    EmptyTrainingSet,
    FoldOutOfRange,
    InsufficientGroups,
    InsufficientRecords,
    InsufficientSubjects,
    InvalidConfig,
    LengthMismatch,
    MissingClass,
    MissingFeatures,
    OracleError,
    ParseError,
    PlanManifestMismatch,
    SplitguardError,
    ValidationError,
)
from .evalsim import (
    AnovaResult,
    CvResult,
    HoldoutResult,
    MetricSet,
    OracleModel,
    anova_oneway,
    compare_schemes,
    compute_metrics,
    fit,
    leakage_gap,
    load_result,
    predict,
    render_markdown,
    run_cv,
    run_experiment,
    run_holdout,
    run_simulation,
    save_result,
)
from .kernels import backend, nearest_index, nearest_other_index
from .manifest import (
    DatasetManifest,
    RecordEntry,
    SubjectSummary,
    load_manifest,
    save_manifest,
    summarize_subjects,
)
from .seeding import check_seed, class_stream, derived_stream, stable_hash64
from .splitter import (
    FoldPlan,
    FoldRoles,
    Scheme,
    SplitConfig,
    derive_train_val_test,
    load_plan,
    plan_split,
    save_plan,
    split_late_wise,
    split_record_wise,
    split_subject_wise,
)
from .synth import (
    FeatureRecord,
    SynthConfig,
    augment_records,
    generate_cohort,
    generate_feature_records,
    generate_holdout,
    identity_dominance_rate,
    load_synth_config,
)

__version__ = "0.1.0"
