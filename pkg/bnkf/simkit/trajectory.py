from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from ..errors import DatasetError
from ..filters import ProcessModel
from ..geom import POSITION_INDEX, STATE_DIM, VELOCITY_INDEX, KinematicState, SensorPose
from ..seeding import make_rng


__all__ = (
    "TrajectoryParams",
    "Trajectory",
    "generate_trajectory",
    "generate_cv_trajectory",
)


@dataclass
class TrajectoryParams:
    '''
    Bounds and shape knobs of the synthetic flight generator.

    Attributes
    ----------
    v_max : float
        speed bound, m/s
    a_max : float
        acceleration bound, m/s^2
    n_components : int
        sinusoids per axis
    period_min, period_max : float
        sinusoid period range, seconds
    curvature : float
        manoeuvre amplitude scale; 0 gives straight constant-velocity flight
    vertical_scale : float
        manoeuvre amplitude on z relative to x and y
    range_min, range_max : float
        initial distance from the sensor, meters
    altitude_min, altitude_max : float
        initial height above the sensor, meters
    cruise_min, cruise_max : float
        base speed as a fraction of ``v_max``
    '''
    v_max: float = 30.0
    a_max: float = 8.0
    n_components: int = 3
    period_min: float = 8.0
    period_max: float = 40.0
    curvature: float = 1.0
    vertical_scale: float = 0.3
    range_min: float = 3000.0
    range_max: float = 8000.0
    altitude_min: float = 100.0
    altitude_max: float = 1000.0
    cruise_min: float = 0.2
    cruise_max: float = 0.6

    def validate(self):
        if not self.v_max > 0 or not self.a_max >= 0:
            raise DatasetError('infeasible bounds: v_max={} a_max={}'.format(self.v_max, self.a_max))
        if not 0 <= self.cruise_min <= self.cruise_max < 1:
            raise DatasetError('cruise fractions must satisfy 0 <= min <= max < 1, got {}..{}'.format(
                self.cruise_min, self.cruise_max))
        if not 0 < self.period_min <= self.period_max:
            raise DatasetError('invalid sinusoid periods {}..{}'.format(self.period_min, self.period_max))
        if not 0 < self.range_min <= self.range_max:
            raise DatasetError('invalid start range {}..{}'.format(self.range_min, self.range_max))
        if not self.altitude_max < self.range_min:
            raise DatasetError('altitude_max {} must stay below range_min {}'.format(
                self.altitude_max, self.range_min))
        if self.n_components < 0 or self.curvature < 0:
            raise DatasetError('n_components and curvature must be non-negative')

    def to_dict(self):
        return asdict(self)


@dataclass
class Trajectory:
    """
    A true flight path sampled at a fixed step.

    Attributes
    ----------
    traj_id : int
    times : np.ndarray
        shape ``(N,)``, strictly increasing seconds
    positions : np.ndarray
        shape ``(N, 3)``, meters
    velocities : np.ndarray
        shape ``(N, 3)``, meters/second
    seed : int, optional
        generator seed; ``None`` for imported tracks
    params : dict
        generator parameters
    """
    traj_id: int
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    seed: Optional[int] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        self.velocities = np.asarray(self.velocities, dtype=float).reshape(-1, 3)
        n = len(self.times)
        if n == 0:
            raise DatasetError('trajectory {} is empty'.format(self.traj_id))
        if self.positions.shape[0] != n or self.velocities.shape[0] != n:
            raise DatasetError('trajectory {}: times, positions and velocities differ in length'.format(
                self.traj_id))
        if np.any(np.diff(self.times) <= 0):
            raise DatasetError('trajectory {}: timestamps must be strictly increasing'.format(self.traj_id))
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.velocities))):
            raise DatasetError('trajectory {} has non-finite samples'.format(self.traj_id))

    def __len__(self):
        return len(self.times)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def states(self) -> np.ndarray:
        """Interleaved ``(N, 6)`` state vectors."""
        out = np.empty((len(self), STATE_DIM))
        out[:, POSITION_INDEX] = self.positions
        out[:, VELOCITY_INDEX] = self.velocities
        return out

    @property
    def samples(self) -> List[KinematicState]:
        return [KinematicState(t, p, v) for t, p, v in zip(self.times, self.positions, self.velocities)]


def _start_position(rng, params, sensor):
    rho = rng.uniform(params.range_min, params.range_max)
    height = rng.uniform(params.altitude_min, params.altitude_max)
    bearing = rng.uniform(-np.pi, np.pi)
    ground = np.sqrt(rho ** 2 - height ** 2)
    return sensor.position + np.array([ground * np.cos(bearing), ground * np.sin(bearing), height])


def generate_trajectory(seed, duration: float = 60.0, dt: float = 0.1, params: TrajectoryParams = None,
                        traj_id: int = 0, sensor: SensorPose = None) -> Trajectory:
    '''
    Smooth random flight: a constant base velocity plus a sum of random
    sinusoids per axis.

    The sinusoid amplitudes are scaled so that the analytic bounds
    ``|v| <= v_max`` and ``|a| <= a_max`` hold for every instant, and the
    path is infinitely differentiable.

    Parameters
    ----------
    seed : int
    duration : float
        seconds, ``> 0``
    dt : float
        sampling step, seconds, ``> 0``
    params : TrajectoryParams
    traj_id : int
    sensor : SensorPose
        the start position is drawn relative to it

    Raises
    ------
    DatasetError
        non-positive duration or step, or infeasible bounds
    '''
    params = params or TrajectoryParams()
    sensor = sensor or SensorPose()
    if not duration > 0 or not dt > 0:
        raise DatasetError('duration and dt must be positive, got {} and {}'.format(duration, dt))
    params.validate()
    rng = make_rng(seed)

    n = int(np.floor(duration / dt + 1e-9)) + 1
    t = np.arange(n) * dt

    p0 = _start_position(rng, params, sensor)
    heading = rng.uniform(-np.pi, np.pi)
    climb = rng.uniform(-0.1, 0.1)
    cruise = rng.uniform(params.cruise_min, params.cruise_max) * params.v_max
    direction = np.array([np.cos(heading), np.sin(heading), climb])
    v0 = cruise * direction / np.linalg.norm(direction)

    k = params.n_components
    omega = 2.0 * np.pi / rng.uniform(params.period_min, params.period_max, size=(3, k))
    phase = rng.uniform(-np.pi, np.pi, size=(3, k))
    amp = rng.uniform(0.3, 1.0, size=(3, k)) * params.a_max / omega ** 2
    amp[2] *= params.vertical_scale
    amp *= params.curvature

    # worst-case norms of the oscillating velocity and acceleration
    v_bound = np.linalg.norm(np.sum(np.abs(amp) * omega, axis=1))
    a_bound = np.linalg.norm(np.sum(np.abs(amp) * omega ** 2, axis=1))
    scale = 1.0
    if a_bound > params.a_max:
        scale = min(scale, params.a_max / a_bound)
    headroom = params.v_max - cruise
    if v_bound > headroom:
        scale = min(scale, headroom / v_bound)
    amp *= scale

    arg = omega[None, :, :] * t[:, None, None] + phase[None, :, :]
    positions = p0 + v0 * t[:, None] + np.sum(amp * (np.sin(arg) - np.sin(phase)), axis=2)
    velocities = v0 + np.sum(amp * omega * np.cos(arg), axis=2)

    meta = dict(params.to_dict(), duration=float(duration), dt=float(dt))
    return Trajectory(traj_id, t, positions, velocities, seed=int(seed), params=meta)


def generate_cv_trajectory(seed, n_steps: int, dt: float, accel_intensity: float,
                           initial_state=None, traj_id: int = 0) -> Trajectory:
    '''
    Samples a path from the discrete constant-velocity model with white-noise
    acceleration, the exact truth model of the recursive filters.

    Parameters
    ----------
    seed : int
    n_steps : int
        number of samples
    dt : float
    accel_intensity : float
        ``q`` of :class:`~bnkf.filters.ProcessModel`
    initial_state : array-like
        interleaved 6-vector; defaults to about 6 km out at 28 m/s
    '''
    if n_steps < 1 or not dt > 0:
        raise DatasetError('need n_steps >= 1 and dt > 0, got {} and {}'.format(n_steps, dt))
    rng = make_rng(seed)
    model = ProcessModel(accel_intensity)
    F = model.transition(dt)
    L = np.linalg.cholesky(model.noise(dt)) if accel_intensity > 0 else np.zeros((STATE_DIM, STATE_DIM))
    if initial_state is None:
        initial_state = [5000.0, -20.0, 3000.0, 20.0, 500.0, 1.0]
    states = np.empty((n_steps, STATE_DIM))
    states[0] = np.asarray(initial_state, dtype=float)
    for i in range(1, n_steps):
        states[i] = F @ states[i - 1] + L @ rng.standard_normal(STATE_DIM)
    t = np.arange(n_steps) * dt
    return Trajectory(traj_id, t, states[:, POSITION_INDEX], states[:, VELOCITY_INDEX], seed=int(seed),
                      params={"model": "cv", "dt": float(dt), "accel_intensity": float(accel_intensity)})
