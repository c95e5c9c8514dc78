"""Exception types shared across the toolkit."""


class SmiFingerError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(SmiFingerError, ValueError):
    """An argument violates an operation's precondition."""


class ConfigError(SmiFingerError, ValueError):
    """A parameter set is inconsistent or out of range."""


class SolverError(SmiFingerError, RuntimeError):
    """The excess-phase solver failed to converge."""

    def __init__(self, message, phi0=None, C=None, index=None):
        super().__init__(message)
        self.phi0 = phi0
        self.C = C
        self.index = index


class TrainingError(SmiFingerError, RuntimeError):
    """Classifier training cannot proceed on the given data."""


class MissingArtifactError(SmiFingerError):
    """A command's prerequisite (dataset, manifest, WAV) does not exist."""
