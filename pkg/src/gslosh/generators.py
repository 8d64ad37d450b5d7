"""Synthetic ground-truth generators with exact thermodynamic bookkeeping.

Two benchmark systems replace expensive particle simulations:

``generate_oscillator``
    A damped harmonic oscillator written in reversible/irreversible split
    form on the state z = (q, p, s). Its operators (skew L, symmetric
    positive semidefinite M) and potential gradients are available in
    closed form and satisfy the degeneracy conditions L dS = 0 and
    M dE = 0 identically, which makes it an exact oracle for integrator
    and audit tests.

``generate_slosh_surrogate``
    A tank of particles following superposed damped standing waves, with
    velocity, internal energy, and stress fields derived analytically from
    the same modal coordinates. Dissipated mechanical energy is routed
    into the particles' internal energy, so the total energy budget is
    conserved to machine precision by construction.
"""

from dataclasses import dataclass, field

import numpy as np

from .data import Trajectory
from .exceptions import ConfigurationError
from .validation import check_positive


# ---------------------------------------------------------------------------
# Damped oscillator benchmark
# ---------------------------------------------------------------------------


@dataclass
class OscillatorParams:
    mass: float = 1.0
    stiffness: float = 1.0
    damping: float = 0.1
    temperature: float = 1.0  # constant reference temperature coupling s to E
    q0: float = 1.0
    p0: float = 0.0
    s0: float = 0.0

    def __post_init__(self):
        check_positive(self.mass, "mass")
        check_positive(self.stiffness, "stiffness")
        check_positive(self.temperature, "temperature")
        if self.damping < 0:
            raise ConfigurationError(f"damping must be >= 0, got {self.damping}")


def oscillator_rhs(state, params):
    """Time derivative of z = (q, p, s)."""
    q, p, _ = state
    m, k, gamma, t0 = params.mass, params.stiffness, params.damping, params.temperature
    return np.array([p / m, -k * q - gamma * p / m, gamma * p * p / (m * m * t0)])


def oscillator_energy(state, params):
    q, p, s = state
    return p * p / (2.0 * params.mass) + params.stiffness * q * q / 2.0 + params.temperature * s


def oscillator_entropy(state, params):
    return state[2]


def oscillator_operators(state, params):
    """Closed-form (L, M, DE, DS) reproducing the oscillator dynamics.

    L is the canonical skew pairing of q and p; M carries the friction and
    the matching entropy production. Both degeneracy conditions hold
    exactly: L @ DS = 0 and M @ DE = 0 for every state.
    """
    q, p, _ = np.asarray(state, dtype=np.float64)
    m, k, gamma, t0 = params.mass, params.stiffness, params.damping, params.temperature
    L = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    M = gamma * np.array(
        [
            [0.0, 0.0, 0.0],
            [0.0, t0, -p / m],
            [0.0, -p / m, p * p / (m * m * t0)],
        ]
    )
    de = np.array([k * q, p / m, t0])
    ds = np.array([0.0, 0.0, 1.0])
    return L, M, de, ds


def rk4_trajectory(rhs, z0, n_steps, dt):
    """Classic fourth-order Runge-Kutta, returning (n_steps + 1, dim) states."""
    z = np.asarray(z0, dtype=np.float64)
    out = np.empty((n_steps + 1, z.size))
    out[0] = z
    for i in range(n_steps):
        k1 = rhs(z)
        k2 = rhs(z + 0.5 * dt * k1)
        k3 = rhs(z + 0.5 * dt * k2)
        k4 = rhs(z + dt * k3)
        z = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = z
    return out


def generate_oscillator(params, n_steps, dt, seed=0):
    """Integrate the oscillator with RK4 and package it as a Trajectory.

    The single-particle fields hold q in the first position slot, the
    velocity p/m in the first velocity slot, and the entropy coordinate s
    in the energy slot; stresses stay zero. Exact energy and entropy
    series ride along as side channels.
    """
    if dt <= 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    states = rk4_trajectory(lambda z: oscillator_rhs(z, params),
                            np.array([params.q0, params.p0, params.s0]),
                            int(n_steps), dt)
    n = states.shape[0]
    zeros = np.zeros((n, 3))
    fields = {
        "q": np.column_stack([states[:, 0], np.zeros(n), np.zeros(n)]),
        "v": np.column_stack([states[:, 1] / params.mass, np.zeros(n), np.zeros(n)]),
        "e": states[:, 2:3].copy(),
        "sigma": zeros.copy(),
        "tau": zeros.copy(),
    }
    energy = np.array([oscillator_energy(z, params) for z in states])
    metadata = {
        "generator": "oscillator",
        "seed": int(seed),
        "mass": params.mass,
        "stiffness": params.stiffness,
        "damping": params.damping,
        "temperature": params.temperature,
    }
    return Trajectory(
        dt=dt,
        fields=fields,
        metadata=metadata,
        energy=energy,
        entropy=states[:, 2].copy(),
    )


def oscillator_latent(traj, params=None):
    """Recover (q, p, s) rows from an oscillator trajectory's fields."""
    mass = traj.metadata.get("mass", 1.0) if params is None else params.mass
    return np.column_stack(
        [
            traj.group("q")[:, 0],
            traj.group("v")[:, 0] * mass,
            traj.group("e")[:, 0],
        ]
    )


# ---------------------------------------------------------------------------
# Slosh surrogate
# ---------------------------------------------------------------------------


@dataclass
class SloshParams:
    """Damped standing-wave tank driven by an initial lateral velocity.

    Mode k has natural frequency from the gravity-wave dispersion relation,
    amplitude proportional to ``initial_velocity`` with a 1/k^2 coupling
    falloff, and an exponentially damped time law that solves the damped
    oscillator equation exactly (so modal mechanical energy is monotone
    non-increasing and the dissipated part can be banked as internal
    energy without leaks).
    """

    tank_width: float = 0.2
    fill_height: float = 0.1
    nx: int = 11
    ny: int = 11
    n_modes: int = 3
    initial_velocity: float = 0.2
    damping_ratios: tuple = (0.05, 0.08, 0.12)
    coupling: float = 0.05
    gravity: float = 9.81
    density: float = 1000.0
    viscosity: float = 0.5
    base_internal_energy: float = 0.0
    phases: tuple = ()

    def __post_init__(self):
        check_positive(self.tank_width, "tank_width")
        check_positive(self.fill_height, "fill_height")
        check_positive(self.nx, "nx")
        check_positive(self.ny, "ny")
        check_positive(self.n_modes, "n_modes")
        if len(self.damping_ratios) < self.n_modes:
            raise ConfigurationError(
                f"need {self.n_modes} damping ratios, got {len(self.damping_ratios)}"
            )

    @property
    def n_particles(self):
        return self.nx * self.ny

    def mode_frequencies(self):
        """Angular frequencies from the finite-depth gravity-wave relation."""
        k = np.arange(1, self.n_modes + 1)
        wavenumber = k * np.pi / self.tank_width
        return np.sqrt(self.gravity * wavenumber * np.tanh(wavenumber * self.fill_height))

    def mode_amplitudes(self):
        k = np.arange(1, self.n_modes + 1)
        return self.coupling * self.initial_velocity / (self.mode_frequencies() * k**2)


class _SloshModes:
    """Analytic modal machinery shared by the generator and by tests."""

    def __init__(self, params):
        self.params = params
        self.omega = params.mode_frequencies()
        self.zeta = np.asarray(params.damping_ratios[: params.n_modes], dtype=np.float64)
        if np.any(self.zeta >= 1.0):
            raise ConfigurationError("damping ratios must stay below 1 (underdamped)")
        self.omega_d = self.omega * np.sqrt(1.0 - self.zeta**2)
        self.amp = params.mode_amplitudes()
        if params.phases:
            self.phase = np.asarray(params.phases[: params.n_modes], dtype=np.float64)
        else:
            # sine start: flat surface, vertical velocity proportional to
            # the initial lateral velocity
            self.phase = np.full(params.n_modes, -0.5 * np.pi)
        k = np.arange(1, params.n_modes + 1)
        self.wavenumber = k * np.pi / params.tank_width

    def modal_coords(self, t):
        """Modal displacement y_k(t) and velocity dy_k(t)."""
        envelope = np.exp(-self.zeta * self.omega * np.asarray(t))
        angle = self.omega_d * np.asarray(t) + self.phase
        y = self.amp * envelope * np.cos(angle)
        dy = self.amp * envelope * (
            -self.zeta * self.omega * np.cos(angle) - self.omega_d * np.sin(angle)
        )
        return y, dy

    def spatial_profiles(self, x):
        """cos(k pi x / W) per mode, shape (n_modes, len(x))."""
        return np.cos(np.outer(self.wavenumber, x))

    def surface(self, x, t):
        y, _ = self.modal_coords(t)
        return y @ self.spatial_profiles(x)

    def surface_rate(self, x, t):
        _, dy = self.modal_coords(t)
        return dy @ self.spatial_profiles(x)


def slosh_surface_height(params, x, t):
    """Analytic free-surface elevation above the fill height."""
    return _SloshModes(params).surface(np.atleast_1d(np.asarray(x, dtype=np.float64)), t)


def generate_slosh_surrogate(params, n_steps, dt, seed=0, n_particles=None):
    """Damped standing-wave particle trajectory with full state fields.

    Particles sit on an ``nx`` by ``ny`` grid of bin-center columns and
    depth fractions. A particle at depth fraction f rides the surface
    elevation scaled by f; its velocity is the analytic time derivative.
    Normal stresses are the (identical) hydrostatic fluctuation per
    particle, shear stress is the viscous response to the velocity
    gradient in x, and internal energy absorbs whatever mechanical energy
    the damping removes, shared equally between particles.
    """
    if dt <= 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    if n_particles is not None and n_particles != params.n_particles:
        raise ConfigurationError(
            f"configured particle count {n_particles} does not match grid "
            f"{params.nx} x {params.ny} = {params.n_particles}"
        )
    modes = _SloshModes(params)
    m = params.n_particles
    w, h0 = params.tank_width, params.fill_height

    # bin-center columns keep the discrete mode profiles exactly orthogonal
    x_cols = (np.arange(params.nx) + 0.5) * w / params.nx
    depth_frac = (np.arange(params.ny) + 1.0) / params.ny  # top row has f = 1
    cols = np.tile(x_cols, params.ny)
    fracs = np.repeat(depth_frac, params.nx)

    profiles = modes.spatial_profiles(x_cols)  # (n_modes, nx)
    particle_profiles = np.tile(profiles, (1, params.ny)) * fracs  # (n_modes, M)

    # effective modal masses: sum over particles of (f cos_k)^2, with unit
    # particle mass density rho * fill volume / M
    particle_mass = params.density * w * h0 / m
    modal_mass = particle_mass * np.sum(particle_profiles**2, axis=1)

    times = dt * np.arange(int(n_steps) + 1)
    y, dy = np.empty((len(times), params.n_modes)), np.empty((len(times), params.n_modes))
    for i, t in enumerate(times):
        y[i], dy[i] = modes.modal_coords(t)

    # mechanical energy per mode: 0.5 m_k (dy^2 + omega^2 y^2)
    mech = 0.5 * modal_mass * (dy**2 + modes.omega**2 * y**2)
    mech_total = mech.sum(axis=1)
    dissipated = mech_total[0] - mech_total

    n = len(times)
    q = np.zeros((n, 3 * m))
    v = np.zeros((n, 3 * m))
    e = np.empty((n, m))
    sigma = np.zeros((n, 3 * m))
    tau = np.zeros((n, 3 * m))

    elevation = y @ particle_profiles  # (n, M)
    rate = dy @ particle_profiles
    heights = h0 * fracs + elevation

    q[:, 0::3] = np.broadcast_to(cols, (n, m))
    q[:, 2::3] = heights
    v[:, 2::3] = rate
    e[:] = params.base_internal_energy + dissipated[:, None] / m

    # identical normal components: hydrostatic fluctuation rho g f eta(x, t)
    pressure = params.density * params.gravity * elevation
    sigma[:, 0::3] = pressure
    sigma[:, 1::3] = pressure
    sigma[:, 2::3] = pressure

    # shear from the horizontal gradient of the vertical velocity field
    slopes = -modes.wavenumber[:, None] * np.sin(np.outer(modes.wavenumber, x_cols))
    particle_slopes = np.tile(slopes, (1, params.ny)) * fracs
    tau[:, 0::3] = params.viscosity * (dy @ particle_slopes)

    fields = {"q": q, "v": v, "e": e, "sigma": sigma, "tau": tau}
    metadata = {
        "generator": "slosh",
        "seed": int(seed),
        "tank_width": w,
        "fill_height": h0,
        "nx": params.nx,
        "ny": params.ny,
        "initial_velocity": params.initial_velocity,
        "fluid": "surrogate",
    }
    return Trajectory(
        dt=dt,
        fields=fields,
        metadata=metadata,
        energy=mech_total + e.sum(axis=1),
        entropy=e.sum(axis=1),
    )


def slosh_mechanical_energy(params, traj):
    """Kinetic + potential series recomputed from stored fields and modal data."""
    modes = _SloshModes(params)
    times = traj.times
    y = np.empty((len(times), params.n_modes))
    dy = np.empty_like(y)
    for i, t in enumerate(times):
        y[i], dy[i] = modes.modal_coords(t)
    x_cols = (np.arange(params.nx) + 0.5) * params.tank_width / params.nx
    depth_frac = (np.arange(params.ny) + 1.0) / params.ny
    fracs = np.repeat(depth_frac, params.nx)
    profiles = np.tile(modes.spatial_profiles(x_cols), (1, params.ny)) * fracs
    particle_mass = params.density * params.tank_width * params.fill_height / params.n_particles
    modal_mass = particle_mass * np.sum(profiles**2, axis=1)
    return (0.5 * modal_mass * (dy**2 + modes.omega**2 * y**2)).sum(axis=1)
