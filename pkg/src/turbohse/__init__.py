"""Turbofan health-state estimation workbench.

Generates realistic component-degradation trajectories with maintenance
events, simulates sparse sensor measurements through a documented
surrogate engine model, and solves the inverse problem (sensors -> ten
health indicators) with a square-root Unscented Kalman Filter, supervised
steady-state and temporal estimators, and a self-supervised autoencoder
plus linear probe, all scored by a cross-validated evaluation harness.
"""

from .domain import (
    HI_MAX,
    HI_MIN,
    HI_NAMES,
    N_HI,
    N_SENSORS,
    OPERATING_CONDITIONS,
    SENSOR_NAMES,
    BoundsViolationError,
    clip_to_bounds,
)
from .generator import Dataset, GenerationConfig, Trajectory, generate_dataset
from .srukf import UkfConfig, filter_trajectory
from .surrogate import SensorFrame, SurrogateConstants, simulate_sensors

__version__ = "0.1.0"

__all__ = [
    "BoundsViolationError",
    "Dataset",
    "GenerationConfig",
    "HI_MAX",
    "HI_MIN",
    "HI_NAMES",
    "N_HI",
    "N_SENSORS",
    "OPERATING_CONDITIONS",
    "SENSOR_NAMES",
    "SensorFrame",
    "SurrogateConstants",
    "Trajectory",
    "UkfConfig",
    "clip_to_bounds",
    "filter_trajectory",
    "generate_dataset",
    "simulate_sensors",
    "__version__",
]
