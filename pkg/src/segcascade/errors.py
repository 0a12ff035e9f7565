"""Exception types raised across the toolkit."""


class SegCascadeError(Exception):
    """Base class for every error raised by segcascade."""


class CycleDetected(SegCascadeError):
    pass


class GraphNotSealed(SegCascadeError):
    pass


class UnscoredEdge(SegCascadeError):
    pass


class NoPath(SegCascadeError):
    pass


class TooManyPaths(SegCascadeError):
    pass


class MissingUnigram(SegCascadeError):
    pass


class EmptyCorpus(SegCascadeError):
    pass


class EmptyResult(SegCascadeError):
    pass


class LabelOutOfRange(SegCascadeError):
    pass


class EmptySpan(SegCascadeError):
    pass


class MissingAttribute(SegCascadeError):
    pass


class DimensionMismatch(SegCascadeError):
    pass


class AllPruned(SegCascadeError):
    pass


class GoldUnreachable(SegCascadeError):
    pass


class NoCompletePath(SegCascadeError):
    pass


class EmptyReference(SegCascadeError):
    pass


class UnmappedLabel(SegCascadeError):
    pass


class FormatError(SegCascadeError):
    """A file did not match its declared text format."""


class ConfigError(SegCascadeError):
    pass
