"""Exception taxonomy.

Grouping matters for the CLI exit-code contract: data errors (bad files)
exit 1, configuration errors exit 2, plan/manifest mismatches exit 4.
"""


class SplitguardError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(SplitguardError):
    """A manifest file could not be parsed.

    ``row`` is the 1-based row/line number of the offending record, or None
    for file-level problems (missing header, unknown format).
    """

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ValidationError(SplitguardError):
    """A parsed manifest violates a structural invariant."""


class InvalidConfig(SplitguardError):
    """A configuration value is out of range or inconsistent."""


class InsufficientSubjects(InvalidConfig):
    """A class has fewer subjects than folds under a subject-wise split."""


class InsufficientRecords(InvalidConfig):
    """A class has fewer records than folds under a record-level split."""


class DegenerateLateSplit(InvalidConfig):
    """Late split requested on a manifest without augmentation lineage."""


class FoldOutOfRange(InvalidConfig):
    """A fold index outside [0, k) was requested."""


class InsufficientGroups(InvalidConfig):
    """Scheme comparison needs at least two schemes with two folds each."""


class AlreadyAugmented(InvalidConfig):
    """Augmentation requested on a manifest that already has lineage."""


class PlanManifestMismatch(SplitguardError):
    """A fold plan does not cover exactly the manifest's records."""


class OracleError(SplitguardError):
    """Base class for oracle-classifier misuse."""


class EmptyTrainingSet(OracleError):
    pass


class MissingClass(OracleError):
    """Centroid fitting found no training records for a required class."""


class MissingFeatures(OracleError):
    """A record without a feature vector reached the oracle."""


class DimensionMismatch(OracleError):
    pass


class ClassMismatch(OracleError):
    """Hold-out manifest classes differ from the training classes."""


class LengthMismatch(OracleError):
    pass


class EmptyInput(OracleError):
    pass
