"""Exception types shared across the package."""


class StrokeAuthError(Exception):
    """Base class for all package errors."""


class MalformedSampleError(StrokeAuthError):
    """A stroke sample violates its structural invariants."""


class InsufficientLengthError(StrokeAuthError):
    """A sequence is too short for the requested feature windows."""


class InvalidInputError(StrokeAuthError):
    """An operation received arguments outside its domain."""


class DatasetError(StrokeAuthError):
    """Dataset import, export, or splitting failed."""


class ProtocolError(StrokeAuthError):
    """The evaluation protocol cannot be run with the given dataset/config."""


class TrainingDivergedError(StrokeAuthError):
    """Training produced a non-finite loss."""


class CheckpointError(StrokeAuthError):
    """A model checkpoint could not be read or is incompatible."""
