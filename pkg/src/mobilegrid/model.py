"""Domain types, scenario construction and randomized placement.

A scenario has one resource consumer (the task sponsor), an access point at
the origin, and K provider devices placed at seeded-random distances from the
AP. All units are abstract and only enter results through ratios: computing
volume in compute units, data volume in data units (Mbit under the default
bandwidth convention), capacities in compute units per second.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .channel import McsTable, calibrate_power

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

RATE_MODELS = ("shannon", "mcs_table")
GRID_MODES = ("proxy", "ad_hoc")

# Fixed spawn keys of the per-scenario RNG substreams. Placement, scheduling
# and fading consume independent streams so one stage's draw count never
# shifts another's.
PLACEMENT_STREAM = 0
SCHEDULING_STREAM = 1
FADING_STREAM = 2


def substream(seed: int, stream: int) -> np.random.Generator:
    """Reproducible RNG stream `stream` derived from a 64-bit scenario seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


@dataclass(frozen=True)
class Task:
    """A divisible task: data volume is tied to compute volume by S = gamma * V."""
    computing_volume: float
    balance_factor: float
    data_volume: float | None = None

    def __post_init__(self):
        v = float(self.computing_volume)
        g = float(self.balance_factor)
        if v < 0.0:
            raise ValueError(f"computing volume must be nonnegative, got {v}")
        if g < 0.0:
            raise ValueError(f"balance factor must be nonnegative, got {g}")
        s = g * v
        if self.data_volume is not None:
            given = float(self.data_volume)
            if abs(given - s) > 1e-12 * max(s, 1.0):
                raise ValueError(
                    f"data volume {given} inconsistent with balance factor "
                    f"({g} * {v} = {s})")
            s = given
        object.__setattr__(self, "computing_volume", v)
        object.__setattr__(self, "balance_factor", g)
        object.__setattr__(self, "data_volume", s)


@dataclass(frozen=True)
class Consumer:
    """The resource consumer: own compute capacity and link transmit power."""
    own_capacity: float
    tx_power: float

    def __post_init__(self):
        if self.own_capacity <= 0.0:
            raise ValueError(f"consumer capacity must be positive, got {self.own_capacity}")
        if self.tx_power <= 0.0:
            raise ValueError(f"transmit power must be positive, got {self.tx_power}")


@dataclass(frozen=True)
class Provider:
    """One provider device selling part of its compute capacity."""
    id: int
    position: tuple
    max_scr: float
    cost_coeff: float
    tradeoff_exp: float
    distance_to_ap: float

    def __post_init__(self):
        if self.max_scr <= 0.0:
            raise ValueError(f"max sharable capacity must be positive, got {self.max_scr}")
        if self.cost_coeff <= 0.0:
            raise ValueError(f"cost coefficient must be positive, got {self.cost_coeff}")
        if self.tradeoff_exp < 1.0:
            raise ValueError(f"tradeoff exponent must be >= 1, got {self.tradeoff_exp}")
        if self.distance_to_ap <= 0.0:
            raise ValueError(f"distance must be positive, got {self.distance_to_ap}")


@dataclass(frozen=True)
class Scenario:
    """Immutable snapshot of one simulated grid; safe to share across workers."""
    task: Task
    consumer: Consumer
    providers: tuple
    n_rb: int
    noise_power: float
    pathloss_exponent: float
    rng_seed: int
    rate_model: str = "shannon"
    rb_bandwidth: float = 0.2
    slot_length: float = 1e-3
    room_size: float = 10.0
    grid_mode: str = "proxy"
    mcs_table: McsTable | None = None

    def __post_init__(self):
        if len(self.providers) < 1:
            raise ValueError("empty provider set")
        if self.n_rb < 1:
            raise ValueError(f"need at least one resource block, got {self.n_rb}")
        if self.noise_power <= 0.0:
            raise ValueError(f"noise power must be positive, got {self.noise_power}")
        if self.pathloss_exponent <= 0.0:
            raise ValueError(f"pathloss exponent must be positive, got {self.pathloss_exponent}")
        if self.rb_bandwidth <= 0.0:
            raise ValueError(f"RB bandwidth must be positive, got {self.rb_bandwidth}")
        if self.rate_model not in RATE_MODELS:
            raise ValueError(f"rate model must be one of {RATE_MODELS}, got {self.rate_model!r}")
        if self.rate_model == "mcs_table" and self.mcs_table is None:
            raise ValueError("rate model 'mcs_table' needs a loaded table")
        if self.grid_mode not in GRID_MODES:
            raise ValueError(f"grid mode must be one of {GRID_MODES}, got {self.grid_mode!r}")

    @property
    def n_providers(self) -> int:
        return len(self.providers)


_FLOAT_FIELDS = (
    "computing_volume", "balance_factor", "consumer_capacity", "target_edge_snr_db",
    "noise_power", "pathloss_exponent", "d_min", "d_max", "room_size", "bandwidth",
    "slot_length", "cost_coeff", "tradeoff_exp", "max_scr_min_frac", "max_scr_max_frac",
)
_INT_FIELDS = ("n_providers", "n_rb", "rng_seed", "n_fading_draws")


@dataclass(frozen=True)
class ScenarioConfig:
    """Flat scenario knobs; every field maps 1:1 to a config-file key.

    tx_power left unset means "calibrate so the mean SNR at d_max hits
    target_edge_snr_db". Room size is documentation metadata only; distances
    are sampled directly in [d_min, d_max] because distance, not position, is
    what the pathloss model consumes.
    """
    n_providers: int = 5
    computing_volume: float = 100.0
    balance_factor: float = 0.75
    consumer_capacity: float = 10.0
    tx_power: float | None = None
    target_edge_snr_db: float = 0.0
    noise_power: float = 1.0
    pathloss_exponent: float = 4.0
    d_min: float = 3.0
    d_max: float = 10.0
    room_size: float = 10.0
    n_rb: int = 50
    bandwidth: float = 10.0
    slot_length: float = 1e-3
    cost_coeff: float = 0.05
    tradeoff_exp: float = 1.0
    max_scr_min_frac: float = 0.5
    max_scr_max_frac: float = 1.5
    rate_model: str = "shannon"
    mcs_table_path: str | None = None
    grid_mode: str = "proxy"
    rng_seed: int = 0
    n_fading_draws: int = 1000

    def __post_init__(self):
        for name in _FLOAT_FIELDS:
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in _INT_FIELDS:
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.tx_power is not None:
            object.__setattr__(self, "tx_power", float(self.tx_power))

    @classmethod
    def field_names(cls) -> tuple:
        return tuple(f.name for f in fields(cls))

    def validate(self):
        if self.n_providers < 1:
            raise ValueError("empty provider set")
        if self.computing_volume <= 0.0:
            raise ValueError(f"computing volume must be positive, got {self.computing_volume}")
        if self.balance_factor < 0.0:
            raise ValueError(f"balance factor must be nonnegative, got {self.balance_factor}")
        if self.consumer_capacity <= 0.0:
            raise ValueError(f"consumer capacity must be positive, got {self.consumer_capacity}")
        if self.tx_power is not None and self.tx_power <= 0.0:
            raise ValueError(f"transmit power must be positive, got {self.tx_power}")
        if self.d_min <= 0.0:
            raise ValueError(f"minimum distance must be positive, got {self.d_min}")
        if self.d_min > self.d_max:
            raise ValueError(f"d_min {self.d_min} exceeds d_max {self.d_max}")
        if self.n_rb < 1:
            raise ValueError(f"need at least one resource block, got {self.n_rb}")
        if self.bandwidth <= 0.0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.noise_power <= 0.0:
            raise ValueError(f"noise power must be positive, got {self.noise_power}")
        if self.pathloss_exponent <= 0.0:
            raise ValueError(f"pathloss exponent must be positive, got {self.pathloss_exponent}")
        if self.cost_coeff <= 0.0:
            raise ValueError(f"cost coefficient must be positive, got {self.cost_coeff}")
        if self.tradeoff_exp < 1.0:
            raise ValueError(f"tradeoff exponent must be >= 1, got {self.tradeoff_exp}")
        if not 0.0 < self.max_scr_min_frac <= self.max_scr_max_frac:
            raise ValueError("max SCR fractions must satisfy 0 < min <= max")
        if self.rate_model not in RATE_MODELS:
            raise ValueError(f"rate model must be one of {RATE_MODELS}, got {self.rate_model!r}")
        if self.rate_model == "mcs_table" and not self.mcs_table_path:
            raise ValueError("rate model 'mcs_table' needs mcs_table_path")
        if self.grid_mode not in GRID_MODES:
            raise ValueError(f"grid mode must be one of {GRID_MODES}, got {self.grid_mode!r}")
        if self.n_fading_draws < 1:
            raise ValueError(f"n_fading_draws must be >= 1, got {self.n_fading_draws}")


def build_scenario(config: ScenarioConfig) -> Scenario:
    """Construct a scenario from a config, deterministically in config.rng_seed.

    The AP sits at the origin; each provider is placed at a distance drawn
    uniformly from [d_min, d_max] at a uniformly random angle. Draw order is
    fixed (distances, angles, capacity caps) so scenarios are reproducible.
    """
    config.validate()
    k = config.n_providers
    rng = substream(config.rng_seed, PLACEMENT_STREAM)
    distances = rng.uniform(config.d_min, config.d_max, k)
    angles = rng.uniform(0.0, 2.0 * math.pi, k)
    caps = rng.uniform(config.max_scr_min_frac * config.consumer_capacity,
                       config.max_scr_max_frac * config.consumer_capacity, k)
    providers = tuple(
        Provider(
            id=j,
            position=(float(distances[j] * math.cos(angles[j])),
                      float(distances[j] * math.sin(angles[j]))),
            max_scr=float(caps[j]),
            cost_coeff=config.cost_coeff,
            tradeoff_exp=config.tradeoff_exp,
            distance_to_ap=float(distances[j]),
        )
        for j in range(k)
    )
    tx_power = config.tx_power
    if tx_power is None:
        tx_power = calibrate_power(config.d_max, config.pathloss_exponent,
                                   config.noise_power, config.target_edge_snr_db)
    mcs = None
    if config.rate_model == "mcs_table":
        mcs = McsTable.from_csv(config.mcs_table_path)
    return Scenario(
        task=Task(config.computing_volume, config.balance_factor),
        consumer=Consumer(config.consumer_capacity, tx_power),
        providers=providers,
        n_rb=config.n_rb,
        noise_power=config.noise_power,
        pathloss_exponent=config.pathloss_exponent,
        rng_seed=config.rng_seed,
        rate_model=config.rate_model,
        rb_bandwidth=config.bandwidth / config.n_rb,
        slot_length=config.slot_length,
        room_size=config.room_size,
        grid_mode=config.grid_mode,
        mcs_table=mcs,
    )


def local_makespan(task: Task, consumer: Consumer) -> float:
    """Makespan when the consumer runs the whole task itself: V / C_c."""
    return task.computing_volume / consumer.own_capacity


def read_flat_mapping(path) -> dict:
    """Read a flat key-value config file (.json or .toml)."""
    path = Path(path)
    if path.suffix == ".json":
        with open(path) as fh:
            data = json.load(fh)
    elif path.suffix == ".toml":
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    else:
        raise ValueError(f"unsupported config format {path.suffix!r} (use .json or .toml)")
    if not isinstance(data, dict):
        raise ValueError("config file must hold a flat key-value table")
    return data
