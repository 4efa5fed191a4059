"""Error types shared across the toolkit.

Every named failure mode raises one of these so callers (and the CLI)
can map errors to exit codes and HTTP statuses without string matching.
"""


class CrowdsegError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(CrowdsegError):
    pass


class PaletteMismatch(CrowdsegError):
    pass


class EmptyEnsemble(CrowdsegError):
    pass


class InsufficientAnnotators(CrowdsegError):
    pass


class LengthMismatch(CrowdsegError):
    pass


class ChecksumMismatch(CrowdsegError):
    pass


class EmptyImage(CrowdsegError):
    pass


class EmptyInput(CrowdsegError):
    pass


class InsufficientSamples(CrowdsegError):
    pass


class SchemaError(CrowdsegError):
    pass


class UnknownClass(CrowdsegError):
    pass


class CodecError(CrowdsegError):
    pass


class UnsupportedResultType(CrowdsegError):
    pass


class BoxOutOfBounds(CrowdsegError):
    pass


class ImageFetchError(CrowdsegError):
    pass


class UpstreamTimeout(CrowdsegError):
    pass


class UpstreamMalformed(CrowdsegError):
    pass


class MalformedSetup(CrowdsegError):
    pass


class MissingClassIntensity(CrowdsegError):
    pass


class PoolTooSmall(CrowdsegError):
    pass


class MissingGroundTruth(CrowdsegError):
    pass


class RecipeViolation(CrowdsegError):
    pass


class GateViolation(CrowdsegError):
    pass
