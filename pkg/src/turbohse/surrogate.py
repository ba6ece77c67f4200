"""Closed-form steady-state observation model for a two-spool turbofan.

Maps a 10-dimensional health state ``x`` and an operating condition to the
7 sensor channels:

    u   = A(oc) @ x
    y_j = b_j(oc) * (1 + u_j + kappa_nl * u_j**2)

``A(oc)`` blends a base sensitivity matrix with its cyclically
column-shifted copy, so each flight phase sees the health indicators
through a slightly different mixing. Any single phase is underdetermined
(7 equations, 10 unknowns; rank 7), but the sensitivities stacked across
all four phases have full column rank 10, which is what makes the inverse
problem solvable at all. The columns for the low-pressure-turbine
indicators are deliberately small: the LPT sits at the end of the gas
path, sees every upstream effect, and is the hardest module to
disentangle. Quantitatively, the smallest singular value of the LPT
column pair is less than half that of the HPT pair.

The quadratic coefficient kappa_nl = 4 makes second-order effects about
20% of the linear ones at full degradation: nonlinear enough to matter
for filtering, mild enough to stay invertible.

Baselines b(oc) are plausible magnitudes, monotone in thrust demand; they
are not claimed to be thermodynamically accurate. There is no balance
solving, map interpolation, or transient behavior here: the model is a
fast, smooth, fully documented stand-in for a performance simulator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import (
    N_SENSORS,
    OPERATING_CONDITIONS,
    SENSOR_NAMES,
    validate_state,
)

# Base sensitivity: rows = sensors (SENSOR_NAMES order), cols = HIs
# (HI_NAMES order). Efficiency losses push temperatures and fuel flow up,
# mass-flow shifts move pressures and shaft speeds.
_A1 = np.array(
    [
        [-0.8, 0.6, 0.1, 0.1, 0.0, 0.0, 0.0, 0.0, 0.1, 0.1],
        [0.0, 0.1, -0.2, 0.2, -0.9, 0.7, -0.3, 0.2, 0.0, 0.1],
        [0.1, 0.3, 0.2, 0.5, 0.4, -0.8, 0.1, -0.2, 0.0, 0.1],
        [0.2, 0.0, 0.1, 0.0, -1.0, 0.3, -0.5, 0.1, -0.1, 0.0],
        [-0.5, 0.2, -0.3, 0.1, -0.7, 0.2, -0.6, 0.2, -0.3, 0.1],
        [0.1, 0.0, 0.0, 0.1, -0.4, 0.1, -0.9, 0.3, -0.2, 0.1],
        [0.2, -0.1, 0.1, 0.2, 0.1, -0.1, 0.2, -0.5, -0.25, 0.15],
    ]
)

# Mixing coefficient c(oc): weight of the column-shifted sensitivity copy.
_SHIFT_MIX = {"Cruise": 0.0, "Takeoff": 0.5, "Climb1": 0.2, "Climb2": 0.35}

# Baseline channel values b(oc) at full health, per SENSOR_NAMES order.
_BASELINES = {
    "Cruise": np.array([3200.0, 9500.0, 1400.0, 750.0, 0.9, 1050.0, 180.0]),
    "Takeoff": np.array([4200.0, 11500.0, 2600.0, 950.0, 2.4, 1350.0, 320.0]),
    "Climb1": np.array([3800.0, 10800.0, 2100.0, 880.0, 1.8, 1250.0, 270.0]),
    "Climb2": np.array([3600.0, 10200.0, 1800.0, 820.0, 1.3, 1150.0, 230.0]),
}

_KAPPA_NL = 4.0


@dataclass(frozen=True)
class SurrogateConstants:
    """Bundle of the observation-model constants, exportable for provenance."""

    a1: np.ndarray = field(default_factory=lambda: _A1.copy())
    shift_mix: dict = field(default_factory=lambda: dict(_SHIFT_MIX))
    baselines: dict = field(default_factory=lambda: {k: v.copy() for k, v in _BASELINES.items()})
    kappa_nl: float = _KAPPA_NL

    def as_manifest_dict(self) -> dict:
        return {
            "sensor_names": list(SENSOR_NAMES),
            "a1": [[float(v) for v in row] for row in self.a1],
            "shift_mix": {k: float(v) for k, v in self.shift_mix.items()},
            "baselines": {k: [float(v) for v in b] for k, b in self.baselines.items()},
            "kappa_nl": float(self.kappa_nl),
        }


_DEFAULT = SurrogateConstants()


@dataclass
class SensorFrame:
    """One 7-channel measurement at a given operating condition."""

    channels: np.ndarray
    oc: str
    noised: bool = False


def _constants(constants: SurrogateConstants | None) -> SurrogateConstants:
    return _DEFAULT if constants is None else constants


def _check_oc(oc: str) -> str:
    if oc not in OPERATING_CONDITIONS:
        raise ValueError(f"unknown operating condition {oc!r}, expected one of {OPERATING_CONDITIONS}")
    return oc


def sensitivity_matrix(oc: str, constants: SurrogateConstants | None = None) -> np.ndarray:
    """A(oc) = A1 + c(oc) * (A1 with columns cyclically shifted left)."""
    c = _constants(constants)
    _check_oc(oc)
    mix = c.shift_mix[oc]
    if mix == 0.0:
        return c.a1.copy()
    return c.a1 + mix * np.roll(c.a1, -1, axis=1)


def sensor_response(
    states: np.ndarray, oc: str, constants: SurrogateConstants | None = None
) -> np.ndarray:
    """Evaluate the closed-form response for one state (10,) or a batch (..., 10).

    No bounds checking: the formula is well defined everywhere, and
    callers like sigma-point filters legitimately evaluate it slightly
    outside the physical box. Use :func:`simulate_sensors` for the checked
    single-frame interface.
    """
    c = _constants(constants)
    a = sensitivity_matrix(oc, c)
    b = c.baselines[oc]
    u = np.asarray(states, dtype=float) @ a.T
    return b * (1.0 + u + c.kappa_nl * u * u)


def simulate_sensors(
    state, oc: str, constants: SurrogateConstants | None = None
) -> SensorFrame:
    """Clean sensor frame for an in-bounds health state.

    Raises BoundsViolationError for out-of-bounds states.
    """
    x = validate_state(state)
    return SensorFrame(channels=sensor_response(x, oc, constants), oc=oc, noised=False)


def observation_jacobian(
    state, oc: str, constants: SurrogateConstants | None = None
) -> np.ndarray:
    """Analytic d(sensors)/d(state), shape (7, 10).

    dy_j/dx_i = b_j * (1 + 2*kappa_nl*u_j) * A_ji
    """
    c = _constants(constants)
    x = validate_state(state)
    a = sensitivity_matrix(oc, c)
    b = c.baselines[oc]
    u = a @ x
    return (b * (1.0 + 2.0 * c.kappa_nl * u))[:, None] * a


def parse_oc_mode(oc_mode: str) -> tuple[str, ...]:
    """Resolve an OC-mode flag to the ordered tuple of conditions it covers.

    "stacked" means all four phases concatenated in OPERATING_CONDITIONS
    order (28 channels); "single:<name>" selects one 7-channel phase.
    """
    if oc_mode == "stacked":
        return OPERATING_CONDITIONS
    if oc_mode.startswith("single:"):
        name = oc_mode.split(":", 1)[1]
        _check_oc(name)
        return (name,)
    raise ValueError(f"oc mode must be 'stacked' or 'single:<name>', got {oc_mode!r}")


def observation_model(oc_mode: str, constants: SurrogateConstants | None = None):
    """Batched observation map for the given OC mode.

    Returns (h, m) where h maps a (k, 10) batch of states to (k, m)
    measurements, m = 7 * number of conditions. Bounds are not enforced
    (sigma points may leave the physical box).
    """
    ocs = parse_oc_mode(oc_mode)
    c = _constants(constants)
    mats = [sensitivity_matrix(oc, c).T for oc in ocs]
    bases = [c.baselines[oc] for oc in ocs]
    kappa = c.kappa_nl

    def h(states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=float)
        parts = []
        for at, b in zip(mats, bases):
            u = states @ at
            parts.append(b * (1.0 + u + kappa * u * u))
        return np.concatenate(parts, axis=-1)

    return h, N_SENSORS * len(ocs)
