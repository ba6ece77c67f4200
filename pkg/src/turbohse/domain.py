"""Shared domain vocabulary for turbofan health monitoring.

Ten health indicators (HIs) describe per-module degradation as deviations
from nominal: five gas-path modules (fan, booster compressor, high-pressure
compressor, high-pressure turbine, low-pressure turbine), each carrying an
efficiency delta and a corrected mass-flow (Wc) delta. Zero means full
health. Efficiencies only degrade (negative deltas); mass flows may drift
slightly positive before being considered out of envelope.

Seven gas-path sensor channels are observed per operating condition
(flight phase): shaft speeds, a pressure and temperature at the
high-pressure compressor/turbine interfaces, fuel flow, and conditions at
the low-pressure turbine.
"""

from __future__ import annotations

import numpy as np

HI_NAMES = (
    "deg_CmpFan_s_mapEff_in",
    "deg_CmpFan_s_mapWc_in",
    "deg_CmpBst_s_mapEff_in",
    "deg_CmpBst_s_mapWc_in",
    "deg_CmpH_s_mapEff_in",
    "deg_CmpH_s_mapWc_in",
    "deg_TrbH_s_mapEff_in",
    "deg_TrbH_s_mapWc_in",
    "deg_TrbL_s_mapEff_in",
    "deg_TrbL_s_mapWc_in",
)
N_HI = len(HI_NAMES)

# Physical bounds per indicator. Compressor Wc may drift up to +0.03,
# turbine Wc up to +0.05; everything bottoms out at -0.05.
HI_MIN = np.full(N_HI, -0.05)
HI_MAX = np.array([0.0, 0.03, 0.0, 0.03, 0.0, 0.03, 0.0, 0.05, 0.0, 0.05])

EFFICIENCY_INDICES = (0, 2, 4, 6, 8)
MASS_FLOW_INDICES = (1, 3, 5, 7, 9)
HPC_INDICES = (4, 5)
HPT_INDICES = (6, 7)
LPT_INDICES = (8, 9)

SENSOR_NAMES = (
    "LP_Nmech",
    "HP_Nmech",
    "HPC_Pout_st",
    "HP_Tout",
    "Fuel_flow",
    "LPT_Tin",
    "LPT_Pout",
)
SENSOR_UNITS = ("rpm", "rpm", "kPa", "K", "kg/s", "K", "kPa")
N_SENSORS = len(SENSOR_NAMES)

OPERATING_CONDITIONS = ("Cruise", "Takeoff", "Climb1", "Climb2")


class BoundsViolationError(ValueError):
    """A health state lies outside its physical bounds."""


def as_health_state(values) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if x.shape != (N_HI,):
        raise ValueError(f"health state must have shape ({N_HI},), got {x.shape}")
    return x


def validate_state(values) -> np.ndarray:
    """Return the state as an array, raising if any component is out of bounds."""
    x = as_health_state(values)
    low = x < HI_MIN
    high = x > HI_MAX
    if low.any() or high.any():
        idx = int(np.argmax(low | high))
        raise BoundsViolationError(
            f"{HI_NAMES[idx]} = {x[idx]:.6g} outside "
            f"[{HI_MIN[idx]:.3g}, {HI_MAX[idx]:.3g}]"
        )
    return x


def clip_to_bounds(values) -> tuple[np.ndarray, bool]:
    """Clamp each component to its physical interval.

    Returns the clipped state and a flag that is True iff any input
    component was strictly outside its interval.
    """
    x = as_health_state(values)
    clipped = np.clip(x, HI_MIN, HI_MAX)
    violated = bool((x < HI_MIN).any() or (x > HI_MAX).any())
    return clipped, violated


def states_within_bounds(states: np.ndarray) -> bool:
    """Vectorized bounds check for an (L, 10) stack of states."""
    states = np.asarray(states, dtype=float)
    return bool((states >= HI_MIN).all() and (states <= HI_MAX).all())
