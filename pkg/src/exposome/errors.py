"""Exception hierarchy shared by every pipeline module."""


class ExposomeError(Exception):
    """Base class for all errors raised by this package."""


# ingest
class MalformedRow(ExposomeError, ValueError):
    pass


class NonMonotonicTime(ExposomeError, ValueError):
    pass


class InvalidConfig(ExposomeError, ValueError):
    pass


# align
class DegenerateInterval(ExposomeError, ValueError):
    pass


class EmptyStream(ExposomeError, ValueError):
    pass


class ConstantColumn(ExposomeError, ValueError):
    pass


class NoOverlap(ExposomeError, ValueError):
    pass


class AllChannelsConstant(ExposomeError, ValueError):
    pass


# stats
class InsufficientData(ExposomeError, ValueError):
    pass


class ZeroVariance(ExposomeError, ValueError):
    pass


class RankDeficient(ExposomeError, ValueError):
    pass


# spatial
class NoSites(ExposomeError, ValueError):
    pass


class SiteOutsideBox(ExposomeError, ValueError):
    pass


class UnsortedBins(ExposomeError, ValueError):
    pass


class NoGeoRows(ExposomeError, ValueError):
    pass


# dbn
class DimensionMismatch(ExposomeError, ValueError):
    pass


class EmptyBatch(ExposomeError, ValueError):
    pass


class InvalidSizes(ExposomeError, ValueError):
    pass


class EmptyData(ExposomeError, ValueError):
    pass


# classify
class NoLabeledRows(ExposomeError, ValueError):
    pass


class SingleClass(ExposomeError, ValueError):
    pass


class EmptyDataset(ExposomeError, ValueError):
    pass


class TooFewRows(ExposomeError, ValueError):
    pass


class RowMismatch(ExposomeError, ValueError):
    pass


# pipeline
class ConfigError(ExposomeError, ValueError):
    pass


class StageError(ExposomeError):
    """A pipeline stage failed; wraps the underlying module error."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class IoError(ExposomeError, OSError):
    pass
