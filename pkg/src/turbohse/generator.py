"""Seeded generation of component-degradation trajectories.

Each trajectory is a 10-dimensional random walk with negative drift,
starting at full health (all zeros). Per indicator, the drift is drawn
from one of three wear regimes (slow / normal / fast) that are resampled
every ``change_period`` steps from an indicator-specific distribution;
the high-pressure compressor, which runs hottest, is biased toward the
faster regimes. Shop visits arrive with uniform random spacing and
recover a random fraction of the accumulated degradation of every
indicator at once. A trajectory ends early if any indicator crosses a
failure limit; the clipped step is kept as the final sample.

Bound handling is asymmetric on purpose. The efficiency ceiling at zero
is the nominal state the walk starts from, so a noise excursion above it
is clipped back and life goes on; crossing a genuine failure limit (the
-0.05 floor, or the positive mass-flow ceilings) ends the trajectory with
that clipped step recorded. Treating the zero ceiling as fatal would kill
roughly a quarter of all engines at their very first step.

Clean sensors are simulated through the surrogate observation model for
every configured operating condition; bounded uniform noise scaled by the
dataset-wide per-channel range is added in a second pass.

Determinism: trajectory ``i`` of a run is a pure function of
(config, base_seed + i) under numpy's PCG64 generator, so datasets
regenerate byte-identically within this implementation and trajectories
can be produced in any order or in parallel. The noise pass uses a
separate seed stream (base_seed + i, NOISE_STREAM) so that adding or
removing operating conditions never perturbs the state draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import surrogate
from .domain import (
    HI_MAX,
    HI_MIN,
    HPC_INDICES,
    N_HI,
    N_SENSORS,
    OPERATING_CONDITIONS,
    as_health_state,
    clip_to_bounds,
)

__all__ = [
    "SPEED_TAGS",
    "DegradationSpeed",
    "SpeedPolicy",
    "MaintenanceEvent",
    "NoiseConfig",
    "GenerationConfig",
    "Trajectory",
    "Dataset",
    "ConfigError",
    "clip_to_bounds",
    "apply_maintenance",
    "sample_maintenance_schedule",
    "generate_trajectory",
    "compute_channel_ranges",
    "add_sensor_noise",
    "generate_dataset",
]

SPEED_TAGS = ("slow", "normal", "fast")

_NOISE_STREAM = 7919  # second seed word; keeps noise draws out of the state stream


class ConfigError(ValueError):
    """Invalid generation configuration."""


@dataclass(frozen=True)
class DegradationSpeed:
    """Per-step wear regime: mean slope mu (<= 0) and slope std sigma."""

    tag: str
    mu: float
    sigma: float

    def __post_init__(self):
        if self.mu > 0:
            raise ConfigError(f"speed {self.tag!r}: mu must be <= 0, got {self.mu}")
        if self.sigma < 0:
            raise ConfigError(f"speed {self.tag!r}: sigma must be >= 0, got {self.sigma}")


def default_speed_params() -> dict[str, DegradationSpeed]:
    # Spans the bound box within ~1000-2000 steps under maintenance.
    return {
        "slow": DegradationSpeed("slow", -5e-6, 2.5e-6),
        "normal": DegradationSpeed("normal", -2e-5, 1e-5),
        "fast": DegradationSpeed("fast", -5e-5, 2.5e-5),
    }


@dataclass(frozen=True, eq=False)
class SpeedPolicy:
    """Per-indicator probabilities over (slow, normal, fast) and the resample period."""

    probs: np.ndarray
    change_period: int = 100

    def __eq__(self, other):
        if not isinstance(other, SpeedPolicy):
            return NotImplemented
        return (self.change_period == other.change_period
                and np.array_equal(self.probs, other.probs))

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        if probs.shape != (N_HI, len(SPEED_TAGS)):
            raise ConfigError(f"speed policy probs must be ({N_HI}, 3), got {probs.shape}")
        if not np.allclose(probs.sum(axis=1), 1.0, atol=1e-12):
            raise ConfigError("speed policy rows must each sum to 1")
        if (probs < 0).any():
            raise ConfigError("speed policy probabilities must be nonnegative")
        if self.change_period < 1:
            raise ConfigError(f"change_period must be >= 1, got {self.change_period}")


def default_speed_policy() -> SpeedPolicy:
    probs = np.tile((0.4, 0.45, 0.15), (N_HI, 1))
    probs[list(HPC_INDICES)] = (0.2, 0.4, 0.4)  # HPC wears faster
    return SpeedPolicy(probs=probs, change_period=100)


@dataclass(frozen=True)
class MaintenanceEvent:
    """Shop visit at step t recovering fraction lambdas[i] of each indicator."""

    t: int
    lambdas: np.ndarray


@dataclass(frozen=True)
class NoiseConfig:
    """Bounded-uniform sensor noise: amplitude gamma * per-channel range."""

    gamma: float = 0.02
    range_mode: str = "dataset"  # "dataset" | "baseline_fraction"

    def __post_init__(self):
        if self.gamma < 0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        if self.range_mode not in ("dataset", "baseline_fraction"):
            raise ConfigError(f"unknown range_mode {self.range_mode!r}")


@dataclass(frozen=True)
class GenerationConfig:
    n_trajectories: int = 50
    max_len: int = 1000
    ocs: tuple[str, ...] = OPERATING_CONDITIONS
    speed_params: dict[str, DegradationSpeed] = field(default_factory=default_speed_params)
    speed_policy: SpeedPolicy = field(default_factory=default_speed_policy)
    maint_interval: tuple[int, int] = (200, 500)
    jitter_sigma: float = 2e-6
    base_seed: int = 0
    noise: NoiseConfig = field(default_factory=NoiseConfig)

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ConfigError(f"n_trajectories must be >= 1, got {self.n_trajectories}")
        if self.max_len < 2:
            raise ConfigError(f"max_len must be >= 2, got {self.max_len}")
        for oc in self.ocs:
            if oc not in OPERATING_CONDITIONS:
                raise ConfigError(f"unknown operating condition {oc!r}")
        if len(self.ocs) == 0:
            raise ConfigError("at least one operating condition required")
        lo, hi = self.maint_interval
        if not (1 <= lo <= hi):
            raise ConfigError(f"maint_interval must satisfy 1 <= lo <= hi, got {self.maint_interval}")
        if self.jitter_sigma < 0:
            raise ConfigError(f"jitter_sigma must be >= 0, got {self.jitter_sigma}")
        missing = [tag for tag in SPEED_TAGS if tag not in self.speed_params]
        if missing:
            raise ConfigError(f"speed_params missing tags {missing}")


@dataclass
class Trajectory:
    """One engine's life: states, wear regimes, shop visits, and sensors.

    states has shape (L, 10) with L <= max_len; states[0] is all zeros.
    speeds holds the regime index (into SPEED_TAGS) in effect at each step.
    sensors_clean / sensors_noisy map each operating condition to an
    (L, 7) channel matrix; sensors_noisy is filled by the dataset-level
    noise pass, which needs the dataset-wide channel ranges.
    """

    trajectory_id: int
    ocs: tuple[str, ...]
    states: np.ndarray
    speeds: np.ndarray
    maintenance: list[MaintenanceEvent]
    sensors_clean: dict[str, np.ndarray]
    sensors_noisy: dict[str, np.ndarray] = field(default_factory=dict)
    terminated_early: bool = False

    @property
    def length(self) -> int:
        return self.states.shape[0]


@dataclass
class Dataset:
    config: GenerationConfig
    constants: surrogate.SurrogateConstants
    trajectories: list[Trajectory]
    deltas: dict[str, np.ndarray]

    @property
    def ids(self) -> list[int]:
        return [t.trajectory_id for t in self.trajectories]

    def get(self, trajectory_id: int) -> Trajectory:
        for t in self.trajectories:
            if t.trajectory_id == trajectory_id:
                return t
        raise KeyError(f"no trajectory with id {trajectory_id}")


def apply_maintenance(state, lambdas) -> np.ndarray:
    """Recover fraction lambdas[i] of accumulated degradation: x' = (1 - lambda) * x.

    Full health is zero, so recovering a fraction of past degradation
    shrinks the deviation proportionally, whatever its sign.
    """
    x = as_health_state(state)
    lam = np.asarray(lambdas, dtype=float)
    if lam.shape != (N_HI,):
        raise ValueError(f"lambdas must have shape ({N_HI},), got {lam.shape}")
    if (lam < 0).any() or (lam > 1).any():
        raise ValueError("recovery fractions must lie in [0, 1]")
    return (1.0 - lam) * x


def sample_maintenance_schedule(rng, max_len: int, interval_range=(200, 500)) -> list[int]:
    """Strictly increasing shop-visit timesteps with uniform-integer gaps."""
    lo, hi = interval_range
    times = []
    t = 0
    while True:
        t += int(rng.integers(lo, hi + 1))
        if t >= max_len:
            return times
        times.append(t)


def _sample_speed_indices(rng, probs: np.ndarray) -> np.ndarray:
    u = rng.random(probs.shape[0])
    cum = np.cumsum(probs, axis=1)
    idx = (u[:, None] >= cum).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1).astype(np.int8)


def _fatal_violation(pre_clip: np.ndarray) -> bool:
    """True when a pre-clip state crosses a failure limit.

    The failure limits are the -0.05 floor (all indicators) and the
    positive mass-flow ceilings; the efficiency ceiling at zero is the
    nominal state itself and only clips.
    """
    return bool((pre_clip < HI_MIN).any() or ((pre_clip > HI_MAX) & (HI_MAX > 0)).any())


def generate_trajectory(cfg: GenerationConfig, trajectory_id: int) -> Trajectory:
    """Run the degradation process for one engine, seeded with base_seed + id.

    Per step t >= 1, in order: apply maintenance if scheduled, resample
    wear regimes if the period elapsed, then add the per-indicator
    increment m + eps with m ~ N(mu_regime, sigma_regime) and
    eps ~ N(0, jitter_sigma), clipping to the physical envelope. If any
    pre-clip component crossed a failure limit the clipped step is
    recorded and the trajectory terminates early. Clean sensors are
    simulated for every configured operating condition.
    """
    rng = np.random.default_rng(cfg.base_seed + trajectory_id)
    maxlen = cfg.max_len
    policy = cfg.speed_policy

    mu_by_tag = np.array([cfg.speed_params[tag].mu for tag in SPEED_TAGS])
    sigma_by_tag = np.array([cfg.speed_params[tag].sigma for tag in SPEED_TAGS])

    schedule = sample_maintenance_schedule(rng, maxlen, cfg.maint_interval)
    next_maint = iter(schedule)
    upcoming = next(next_maint, None)

    speed_idx = _sample_speed_indices(rng, policy.probs)

    states = np.zeros((maxlen, N_HI))
    speeds = np.zeros((maxlen, N_HI), dtype=np.int8)
    speeds[0] = speed_idx
    events: list[MaintenanceEvent] = []
    terminated = False
    x = states[0].copy()
    length = maxlen

    for t in range(1, maxlen):
        if upcoming is not None and t == upcoming:
            lambdas = rng.uniform(0.6, 0.8, N_HI)
            x = apply_maintenance(x, lambdas)
            events.append(MaintenanceEvent(t=t, lambdas=lambdas))
            upcoming = next(next_maint, None)
        if t % policy.change_period == 0:
            speed_idx = _sample_speed_indices(rng, policy.probs)
        m = rng.normal(mu_by_tag[speed_idx], sigma_by_tag[speed_idx])
        eps = rng.normal(0.0, cfg.jitter_sigma, N_HI)
        pre_clip = x + m + eps
        x, _ = clip_to_bounds(pre_clip)
        states[t] = x
        speeds[t] = speed_idx
        if _fatal_violation(pre_clip):
            terminated = True
            length = t + 1
            break

    states = states[:length]
    speeds = speeds[:length]

    sensors_clean = {
        oc: surrogate.sensor_response(states, oc) for oc in cfg.ocs
    }
    return Trajectory(
        trajectory_id=trajectory_id,
        ocs=tuple(cfg.ocs),
        states=states,
        speeds=speeds,
        maintenance=events,
        sensors_clean=sensors_clean,
        terminated_early=terminated,
    )


def compute_channel_ranges(
    trajectories: list[Trajectory],
    oc: str,
    constants: surrogate.SurrogateConstants | None = None,
) -> np.ndarray:
    """Per-channel max - min over all clean frames at one operating condition.

    Degenerate channels (zero range) fall back to 1% of the baseline
    magnitude so the noise amplitude never collapses to zero.
    """
    if not trajectories:
        raise ValueError("cannot compute channel ranges of an empty dataset")
    lo = np.full(N_SENSORS, np.inf)
    hi = np.full(N_SENSORS, -np.inf)
    for traj in trajectories:
        frames = traj.sensors_clean[oc]
        lo = np.minimum(lo, frames.min(axis=0))
        hi = np.maximum(hi, frames.max(axis=0))
    delta = hi - lo
    baseline = surrogate._constants(constants).baselines[oc]
    fallback = 0.01 * np.abs(baseline)
    return np.where(delta > 0, delta, fallback)


def add_sensor_noise(channels, delta: np.ndarray, gamma: float, rng):
    """Add independent uniform noise on [-gamma*delta_j, +gamma*delta_j] per channel.

    Accepts a channel array of any leading shape, or a single SensorFrame
    (returned as a new frame flagged noised).
    """
    if isinstance(channels, surrogate.SensorFrame):
        noised = add_sensor_noise(channels.channels, delta, gamma, rng)
        return surrogate.SensorFrame(channels=noised, oc=channels.oc, noised=True)
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    channels = np.asarray(channels, dtype=float)
    if gamma == 0:
        return channels.copy()
    amp = gamma * np.asarray(delta, dtype=float)
    return channels + rng.uniform(-1.0, 1.0, channels.shape) * amp


def dataset_deltas(cfg: GenerationConfig, trajectories: list[Trajectory],
                   constants: surrogate.SurrogateConstants | None = None) -> dict[str, np.ndarray]:
    consts = surrogate._constants(constants)
    if cfg.noise.range_mode == "baseline_fraction":
        return {oc: 0.01 * np.abs(consts.baselines[oc]) for oc in cfg.ocs}
    return {oc: compute_channel_ranges(trajectories, oc, consts) for oc in cfg.ocs}


def generate_dataset(cfg: GenerationConfig) -> Dataset:
    """Generate all trajectories, then run the dataset-level noise pass.

    Channel ranges are a reduction over the whole clean dataset, so noisy
    sensors can only be produced once every trajectory exists. Each
    trajectory's noise uses its own seed stream, independent of the state
    stream.
    """
    trajectories = [generate_trajectory(cfg, i) for i in range(cfg.n_trajectories)]
    deltas = dataset_deltas(cfg, trajectories)
    for traj in trajectories:
        rng = np.random.default_rng((cfg.base_seed + traj.trajectory_id, _NOISE_STREAM))
        for oc in cfg.ocs:
            traj.sensors_noisy[oc] = add_sensor_noise(
                traj.sensors_clean[oc], deltas[oc], cfg.noise.gamma, rng
            )
    return Dataset(
        config=cfg,
        constants=surrogate.SurrogateConstants(),
        trajectories=trajectories,
        deltas=deltas,
    )
