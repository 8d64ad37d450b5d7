"""Learned thermodynamically consistent reduced-order sloshing simulators."""

__version__ = "0.1.0"

from .data import (
    GROUPS,
    SEQUENCE_LENGTH,
    SURFACE_POINTS,
    FreeSurfaceObservation,
    GroupNormalizer,
    ObservationSequence,
    Snapshot,
    SurfaceNormalizer,
    Trajectory,
    assemble_sequences,
    extract_free_surface,
    split_dataset,
)
from .exceptions import (
    ConfigurationError,
    DataError,
    GsloshError,
    IntegrationError,
    PipelineOrderError,
    ProjectionError,
    StateError,
    TrainingError,
)
from .generators import (
    OscillatorParams,
    SloshParams,
    generate_oscillator,
    generate_slosh_surrogate,
)
