"""Exception hierarchy shared by all gslosh modules."""


class GsloshError(Exception):
    """Base class for all package errors."""


class ConfigurationError(GsloshError):
    """Inconsistent shapes, options, or persisted-model metadata."""


class DataError(GsloshError):
    """Malformed or insufficient input data."""


class StateError(GsloshError):
    """Operation called in the wrong order (e.g. backward before forward)."""


class TrainingError(GsloshError):
    """Divergence or non-finite quantities during optimization."""


class IntegrationError(GsloshError):
    """Failure while rolling out latent dynamics.

    ``partial`` carries the rollout computed so far when a blow-up guard
    trips mid-trajectory.
    """

    def __init__(self, message, step=None, partial=None):
        super().__init__(message)
        self.step = step
        self.partial = partial


class ProjectionError(GsloshError):
    """Point cannot be projected (behind the camera)."""


class PipelineOrderError(GsloshError):
    """A pipeline stage was requested before its prerequisites exist."""
