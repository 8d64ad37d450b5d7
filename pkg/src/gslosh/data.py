"""Snapshot containers, free-surface extraction, normalization, and windows.

A full state snapshot stacks five per-particle field groups:

    q      positions, 3 values per particle (meters, cup-local frame)
    v      velocities, 3 values per particle (m/s)
    e      internal energy, 1 value per particle (J)
    sigma  normal stresses, 3 values per particle (Pa)
    tau    shear stresses, 3 values per particle (Pa)

so a fluid with M particles has full dimension D = 13 M. Groups are kept
separate because each one gets its own autoencoder downstream.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import ConfigurationError, DataError
from .validation import as_matrix, as_vector

GROUPS = ("q", "v", "e", "sigma", "tau")
GROUP_WIDTHS = {"q": 3, "v": 3, "e": 1, "sigma": 3, "tau": 3}
STATE_WIDTH = 13  # values per particle across all groups

SURFACE_POINTS = 21
SEQUENCE_LENGTH = 16
SEQUENCE_STRIDE_STEPS = 3  # snapshots between window entries (0.015 s at dt = 0.005 s)


def group_dims(n_particles):
    """Per-group flat dimensions for a given particle count."""
    return {g: GROUP_WIDTHS[g] * n_particles for g in GROUPS}


@dataclass
class Snapshot:
    """Full per-particle state of one time step."""

    time: float
    q: np.ndarray
    v: np.ndarray
    e: np.ndarray
    sigma: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        if self.time < 0:
            raise DataError(f"snapshot time must be >= 0, got {self.time}")
        m = len(self.e)
        for name in GROUPS:
            block = as_vector(getattr(self, name), name=name)
            if len(block) != GROUP_WIDTHS[name] * m:
                raise ConfigurationError(
                    f"group {name!r} has length {len(block)}, expected "
                    f"{GROUP_WIDTHS[name] * m} for {m} particles"
                )
            setattr(self, name, block)

    @property
    def n_particles(self):
        return len(self.e)

    @property
    def full_dim(self):
        return STATE_WIDTH * self.n_particles

    def group(self, name):
        return getattr(self, name)


@dataclass
class Trajectory:
    """Time-ordered snapshots with uniform spacing ``dt``.

    Fields are stored as (n_snapshots, group_dim) arrays. ``energy`` and
    ``entropy`` are optional ground-truth side channels used for audits of
    the integrator benchmarks; they are not part of the particle state.
    """

    dt: float
    fields: dict
    metadata: dict = field(default_factory=dict)
    t0: float = 0.0
    energy: np.ndarray | None = None
    entropy: np.ndarray | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        lengths = {name: arr.shape[0] for name, arr in self.fields.items()}
        if set(self.fields) != set(GROUPS):
            raise ConfigurationError(f"fields must cover groups {GROUPS}")
        if len(set(lengths.values())) > 1:
            raise ConfigurationError(f"inconsistent snapshot counts {lengths}")
        m = self.n_particles
        for name in GROUPS:
            arr = self.fields[name]
            if arr.ndim != 2 or arr.shape[1] != GROUP_WIDTHS[name] * m:
                raise ConfigurationError(
                    f"group {name!r} has shape {arr.shape}, expected "
                    f"(*, {GROUP_WIDTHS[name] * m})"
                )

    def __len__(self):
        return self.fields["e"].shape[0]

    @property
    def n_particles(self):
        return self.fields["e"].shape[1]

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(len(self))

    def snapshot(self, i):
        i = int(i)
        return Snapshot(
            time=float(self.times[i]),
            **{name: self.fields[name][i] for name in GROUPS},
        )

    def group(self, name):
        return self.fields[name]


@dataclass
class FreeSurfaceObservation:
    """Uniform 21-point free-surface profile: x along motion, h height."""

    x: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        self.x = as_vector(self.x, size=SURFACE_POINTS, name="surface x")
        self.h = as_vector(self.h, size=SURFACE_POINTS, name="surface h")
        if not np.all(np.diff(self.x) > 0):
            raise DataError("surface x coordinates must be strictly increasing")

    def flatten(self):
        """Interleaved (x, h) pairs, length 42."""
        return np.column_stack([self.x, self.h]).ravel()

    @classmethod
    def from_flat(cls, values):
        values = as_vector(values, size=2 * SURFACE_POINTS, name="surface vector")
        pairs = values.reshape(SURFACE_POINTS, 2)
        return cls(x=pairs[:, 0], h=pairs[:, 1])


@dataclass
class ObservationSequence:
    """Window of surface observations feeding the recurrent encoder.

    ``target_index`` is the index of the window's final snapshot in the
    source trajectory; the encoder is trained to output that snapshot's
    latent encoding. The encoder itself enforces the expected window
    length (16 by default, via ``SEQUENCE_LENGTH``).
    """

    observations: list
    stride_seconds: float
    target_index: int

    def __post_init__(self):
        if not self.observations:
            raise DataError("sequence must contain at least one observation")

    def __len__(self):
        return len(self.observations)

    def as_array(self):
        """Stacked flat observations, shape (window, 42)."""
        return np.stack([obs.flatten() for obs in self.observations])


def surface_grid(tank_width, n_points=SURFACE_POINTS):
    """Uniform bin-center grid across the tank width."""
    edges = np.linspace(0.0, tank_width, n_points + 1)
    return 0.5 * (edges[:-1] + edges[1:])


def extract_free_surface(snapshot, tank_width, n_points=SURFACE_POINTS):
    """Sample the free surface onto a uniform grid of (x, h) pairs.

    The highest particle in each of ``n_points`` uniform horizontal bins is
    taken as a surface sample; samples are then linearly interpolated onto
    the bin-center grid. Empty bins are covered by the interpolation from
    their neighbors. Only the motion-direction coordinate and the height
    survive; depth is collapsed.
    """
    q = snapshot.q.reshape(-1, 3)
    xs = q[:, 0]
    hs = q[:, 2]
    edges = np.linspace(0.0, tank_width, n_points + 1)
    bins = np.clip(np.digitize(xs, edges) - 1, 0, n_points - 1)
    sample_x = []
    sample_h = []
    for b in range(n_points):
        mask = bins == b
        if not mask.any():
            continue
        top = np.argmax(hs[mask])
        sample_x.append(xs[mask][top])
        sample_h.append(hs[mask][top])
    if not sample_x:
        raise DataError("no particles found in any horizontal bin")
    order = np.argsort(sample_x)
    sample_x = np.asarray(sample_x)[order]
    sample_h = np.asarray(sample_h)[order]
    grid = surface_grid(tank_width, n_points)
    heights = np.interp(grid, sample_x, sample_h)
    return FreeSurfaceObservation(x=grid, h=heights)


def trajectory_surfaces(traj, tank_width, n_points=SURFACE_POINTS):
    """Free-surface observation for every snapshot of a trajectory."""
    return [
        extract_free_surface(traj.snapshot(i), tank_width, n_points)
        for i in range(len(traj))
    ]


class GroupNormalizer(BaseEstimator, TransformerMixin):
    """Per-channel standardization fitted separately for each field group.

    Channels whose training standard deviation is zero are passed through
    unchanged (their mean offset would make the inverse ill-defined), with
    a warning naming the group.
    """

    def __init__(self, std_floor=0.0):
        self.std_floor = std_floor

    def fit(self, grouped, y=None):
        self.mean_ = {}
        self.scale_ = {}
        for name in GROUPS:
            data = as_matrix(grouped[name], name=f"group {name}")
            mean = data.mean(axis=0)
            std = data.std(axis=0)
            dead = std <= self.std_floor
            if dead.any():
                warnings.warn(
                    f"group {name!r}: {int(dead.sum())} constant channel(s) "
                    "left unnormalized",
                    stacklevel=2,
                )
                mean = np.where(dead, 0.0, mean)
                std = np.where(dead, 1.0, std)
            self.mean_[name] = mean
            self.scale_[name] = std
        return self

    def transform(self, grouped):
        self._check_fitted()
        return {
            name: (np.asarray(grouped[name], dtype=np.float64) - self.mean_[name])
            / self.scale_[name]
            for name in GROUPS
        }

    def inverse_transform(self, grouped):
        self._check_fitted()
        return {
            name: np.asarray(grouped[name], dtype=np.float64) * self.scale_[name]
            + self.mean_[name]
            for name in GROUPS
        }

    def _check_fitted(self):
        if not hasattr(self, "mean_"):
            raise ConfigurationError("normalizer used before fit")


class SurfaceNormalizer(BaseEstimator, TransformerMixin):
    """Standardization for flattened 42-channel surface observations."""

    def fit(self, X, y=None):
        X = as_matrix(X, cols=2 * SURFACE_POINTS, name="surface batch")
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        dead = std == 0.0
        if dead.any():
            warnings.warn(
                f"surface observations: {int(dead.sum())} constant channel(s) "
                "left unnormalized",
                stacklevel=2,
            )
        self.scale_ = np.where(dead, 1.0, std)
        self.mean_ = np.where(dead, 0.0, self.mean_)
        return self

    def transform(self, X):
        if not hasattr(self, "mean_"):
            raise ConfigurationError("normalizer used before fit")
        return (np.asarray(X, dtype=np.float64) - self.mean_) / self.scale_

    def inverse_transform(self, X):
        if not hasattr(self, "mean_"):
            raise ConfigurationError("normalizer used before fit")
        return np.asarray(X, dtype=np.float64) * self.scale_ + self.mean_


def stack_trajectories(trajectories):
    """Concatenate trajectory fields into one grouped snapshot matrix set."""
    if not trajectories:
        raise DataError("no trajectories given")
    return {
        name: np.concatenate([t.group(name) for t in trajectories])
        for name in GROUPS
    }


def split_dataset(n_snapshots, ratio, seed):
    """Random snapshot-level split into (train_indices, test_indices)."""
    if not 0.0 < ratio < 1.0:
        raise ConfigurationError(f"split ratio must be in (0, 1), got {ratio}")
    if n_snapshots < 2:
        raise DataError("need at least 2 snapshots to split")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_snapshots)
    n_train = int(round(n_snapshots * ratio))
    n_train = min(max(n_train, 1), n_snapshots - 1)
    train = np.sort(order[:n_train])
    test = np.sort(order[n_train:])
    return train, test


def assemble_sequences(
    traj,
    tank_width,
    length=SEQUENCE_LENGTH,
    stride_steps=SEQUENCE_STRIDE_STEPS,
    surfaces=None,
):
    """Sliding observation windows over a subsampled trajectory.

    The trajectory is first subsampled every ``stride_steps`` snapshots
    (0.015 s spacing for the default 0.005 s data), then consecutive runs
    of ``length`` observations become one sequence each. Returns an empty
    list when the trajectory is too short.
    """
    if stride_steps < 1:
        raise ConfigurationError(f"stride_steps must be >= 1, got {stride_steps}")
    if length < 1:
        raise ConfigurationError(f"window length must be >= 1, got {length}")
    frame_indices = np.arange(0, len(traj), stride_steps)
    if surfaces is None:
        surfaces = [
            extract_free_surface(traj.snapshot(i), tank_width) for i in frame_indices
        ]
    else:
        surfaces = [surfaces[i] for i in frame_indices]
    stride_seconds = traj.dt * stride_steps
    sequences = []
    for start in range(0, len(frame_indices) - length + 1):
        window = surfaces[start : start + length]
        target = int(frame_indices[start + length - 1])
        sequences.append(
            ObservationSequence(
                observations=list(window),
                stride_seconds=stride_seconds,
                target_index=target,
            )
        )
    return sequences
