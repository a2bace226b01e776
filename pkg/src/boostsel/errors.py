"""Exception hierarchy.

The CLI maps the top-level families onto exit codes: ConfigError -> 2,
DatasetError -> 3, TrainingError -> 4, EmptySelection -> 5.
"""


class BoostselError(Exception):
    pass


class ConfigError(BoostselError, ValueError):
    pass


class DatasetError(BoostselError, ValueError):
    pass


class MissingColumn(DatasetError):
    pass


class NonNumericCell(DatasetError):
    def __init__(self, row, column, value):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"non-numeric cell {value!r} at row {row}, column {column!r}")


class DuplicateSampleId(DatasetError):
    pass


class DuplicateFeatureName(DatasetError):
    pass


class DegenerateLabels(DatasetError):
    pass


class NoAgeColumn(DatasetError):
    pass


class MissingValues(DatasetError):
    pass


class TooFewRowsPerClass(DatasetError):
    pass


class DimensionMismatch(DatasetError):
    pass


class TrainingError(BoostselError):
    pass


class ModelFileError(BoostselError):
    pass


class ModelIoError(ModelFileError, OSError):
    pass


class SchemaVersionMismatch(ModelFileError):
    pass


class CorruptModel(ModelFileError):
    pass


class ModelMissingGainRecords(ModelFileError):
    pass


class MetricError(BoostselError, ValueError):
    pass


class LengthMismatch(MetricError):
    pass


class UndefinedMetric(MetricError):
    pass


class OneClassOnly(MetricError):
    pass


class TooFewFolds(MetricError):
    pass


class KTooLarge(ConfigError):
    pass


class FeatureUniverseMismatch(BoostselError, ValueError):
    pass


class EmptySelection(BoostselError):
    """No feature survived intersection plus exclusion.

    Both importance reports ride along so callers can still persist them.
    """

    def __init__(self, message, reports=()):
        super().__init__(message)
        self.reports = tuple(reports)
