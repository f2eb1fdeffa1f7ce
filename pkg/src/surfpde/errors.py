"""Exception types shared across the package."""


class SurfPdeError(Exception):
    """Base class for all errors raised by surfpde."""


class DimensionMismatchError(SurfPdeError, ValueError):
    """Network and input dimensions do not agree."""


class DegenerateNormalError(SurfPdeError, ValueError):
    """A unit-normalized output was requested for a (near-)zero vector."""


class NonManifoldMeshError(SurfPdeError, ValueError):
    """Mesh violates manifoldness or consistent orientation."""


class CheckpointError(SurfPdeError, ValueError):
    """Network checkpoint file is corrupt, truncated or inconsistent."""


class NonFiniteLossError(SurfPdeError, FloatingPointError):
    """A loss evaluated to NaN/Inf; carries the first offending sample index."""

    def __init__(self, message, sample_index=None):
        super().__init__(message)
        self.sample_index = sample_index


class TrainingDivergedError(SurfPdeError, RuntimeError):
    """Training loss exploded past the divergence guard."""


class ConfigError(SurfPdeError, ValueError):
    """Run configuration file is invalid or references missing data."""
