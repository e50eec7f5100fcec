import dataclasses
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import yaml

from ..bnn import TrainConfig
from ..errors import ConfigError, DatasetError
from ..evalkit import METHODS
from ..simkit import NOISE_TIERS, SAMPLING_RATES, TrajectoryParams


__all__ = (
    "SimulationConfig",
    "FilterConfig",
    "TimingConfig",
    "RunConfig",
    "load_config",
)


@dataclass
class SimulationConfig:
    '''
    Attributes
    ----------
    n_trajectories : int
    duration : float
        seconds per trajectory
    dt : float
        nominal sampling step, seconds
    rates : List[float]
        sampling rates every trajectory is emitted at
    folds : int
    sensor : List[float]
        radar position, meters
    trajectory : TrajectoryParams
    trajectory_csv : str, optional
        imports trajectories instead of generating them
    '''
    n_trajectories: int = 500
    duration: float = 60.0
    dt: float = 0.1
    rates: List[float] = field(default_factory=lambda: list(SAMPLING_RATES))
    folds: int = 5
    sensor: List[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])
    trajectory: TrajectoryParams = field(default_factory=TrajectoryParams)
    trajectory_csv: Optional[str] = None

    def validate(self):
        if self.n_trajectories < self.folds:
            raise ConfigError('simulation.n_trajectories ({}) must be at least simulation.folds ({})'.format(
                self.n_trajectories, self.folds))
        if not self.rates or any(not 0 < r <= 1 for r in self.rates):
            raise ConfigError('simulation.rates must be a nonempty list in (0, 1], got {}'.format(self.rates))
        if len(self.sensor) != 3:
            raise ConfigError('simulation.sensor must have 3 components, got {}'.format(self.sensor))
        try:
            self.trajectory.validate()
        except DatasetError as e:
            raise ConfigError("simulation.trajectory: {}".format(e)) from None


@dataclass
class FilterConfig:
    '''
    Attributes
    ----------
    q : float, optional
        acceleration intensity; ``null`` selects it per tier by grid search
    kappa : float
        UKF spread
    q_grid : List[float]
    tuning_sequences : int
        validation sequences used by the grid search
    '''
    q: Optional[float] = None
    kappa: float = 0.0
    q_grid: List[float] = field(default_factory=lambda: [0.01, 0.1, 1.0, 10.0, 100.0])
    tuning_sequences: int = 20

    def validate(self):
        if self.q is not None and not self.q >= 0:
            raise ConfigError('filter.q must be non-negative, got {}'.format(self.q))
        if not 6 + self.kappa > 0:
            raise ConfigError('filter.kappa must exceed -6, got {}'.format(self.kappa))
        if self.tuning_sequences < 1:
            raise ConfigError('filter.tuning_sequences must be at least 1, got {}'.format(self.tuning_sequences))


@dataclass
class TimingConfig:
    repeats: int = 5
    warmup: int = 1
    traj_id: Optional[int] = None
    rate: float = 1.0


@dataclass
class RunConfig:
    '''
    Everything one ``generate -> train -> eval`` run depends on.

    Loaded from YAML by :func:`load_config`; missing keys take the defaults
    below and the fully populated tree is echoed into the run manifest.
    '''
    seed: int = 0
    out: str = "runs/default"
    tiers: List[str] = field(default_factory=lambda: list(NOISE_TIERS))
    methods: List[str] = field(default_factory=lambda: list(METHODS))
    workers: int = 1
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    timing: TimingConfig = field(default_factory=TimingConfig)

    def validate(self):
        for tier in self.tiers:
            if tier not in NOISE_TIERS:
                raise ConfigError('Unknown tier <{}>, expected one of {}'.format(tier, ", ".join(NOISE_TIERS)))
        for method in self.methods:
            if method not in METHODS:
                raise ConfigError('Unknown method <{}>, expected one of {}'.format(method, ", ".join(METHODS)))
        if self.workers < 1:
            raise ConfigError('workers must be at least 1, got {}'.format(self.workers))
        self.simulation.validate()
        self.filter.validate()
        return self

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["train"]["hidden"] = list(self.train.hidden)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return _build(cls, data or {}, "").validate()

    def fingerprint(self) -> str:
        """
        Short digest of the populated config, the run's manifest id.

        ``out`` and ``workers`` are left out: moving a run or changing its
        parallelism does not change its results.
        """
        data = self.to_dict()
        del data["out"], data["workers"]
        text = yaml.safe_dump(data, sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def _build(cls, data, prefix):
    if not isinstance(data, dict):
        raise ConfigError('<{}> must be a mapping, got {!r}'.format(prefix or "config", data))
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError('Unknown config key(s): {}'.format(
            ", ".join(prefix + key for key in unknown)))
    kwargs = {}
    for name, value in data.items():
        default = getattr(cls(), name)
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, prefix + name + ".")
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError('Invalid <{}> section: {}'.format(prefix.rstrip(".") or "config", e)) from None


def load_config(path=None) -> RunConfig:
    '''
    Reads a YAML run config; ``None`` gives the defaults.

    A run manifest is accepted as well: its ``config`` section replays the
    run that wrote it.

    Raises
    ------
    ConfigError
        unreadable file, unknown keys or invalid values
    '''
    if path is None:
        return RunConfig().validate()
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fp:
            data = yaml.safe_load(fp)
    except OSError as e:
        raise ConfigError('Cannot read config {}: {}'.format(path, e)) from None
    except yaml.YAMLError as e:
        raise ConfigError('Config {} is not valid YAML: {}'.format(path, e)) from None
    if isinstance(data, dict) and "manifest_id" in data and "config" in data:
        data = data["config"]
    return RunConfig.from_dict(data)
