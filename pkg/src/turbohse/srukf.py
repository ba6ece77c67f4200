"""Square-root Unscented Kalman Filter for the sensor-to-health inverse problem.

Follows the square-root formulation of Van der Merwe & Wan (2001): instead
of the full state covariance P, the filter carries a lower-triangular
Cholesky factor S with S @ S.T = P, propagated through QR factorizations
and rank-one Cholesky updates/downdates. This keeps the factor triangular
and the implied covariance positive semidefinite by construction, which
matters here because the measurement strongly constrains some state
directions (well-observed indicators) while leaving others (the
low-pressure turbine) barely touched.

State transition is the identity by default -- degradation has no agreed
dynamics model -- but a general transition callable is supported so that
the same code can be checked against closed-form Kalman filters on linear
systems. The observation map is the turbofan surrogate, evaluated on
sigma-point batches at one operating condition (7 channels) or all four
stacked (28 channels).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import surrogate
from .domain import HI_MAX, HI_MIN, N_HI

__all__ = [
    "UkfConfig",
    "SigmaWeights",
    "SrUkfState",
    "FilterResult",
    "CholeskyDowndateError",
    "FilterError",
    "make_weights",
    "sigma_points",
    "chol_update",
    "predict",
    "update",
    "filter_trajectory",
    "build_R_from_noise",
]

R_FLOOR = 1e-12


class CholeskyDowndateError(np.linalg.LinAlgError):
    """A rank-one downdate would make the factored matrix indefinite."""


class FilterError(RuntimeError):
    """A trajectory could not be filtered (bad input or numerical failure)."""


@dataclass(frozen=True)
class SigmaWeights:
    """Scaled sigma-point weights: lambda_u = alpha^2 (n + kappa) - n."""

    n: int
    lambda_u: float
    wm: np.ndarray
    wc: np.ndarray


@dataclass
class SrUkfState:
    """Filter mean, lower-triangular sqrt-covariance factor, and step index."""

    mean: np.ndarray
    sqrt_cov: np.ndarray
    t: int = 0


@dataclass
class FilterResult:
    means: np.ndarray  # (L, n) state estimates, one per timestep
    sqrt_variances: np.ndarray  # (L, n) marginal stds, sqrt(diag(S S^T))


@dataclass(frozen=True)
class UkfConfig:
    alpha: float = 1.0
    beta: float = 2.0
    kappa: float = 0.0
    q_diag: np.ndarray = field(default_factory=lambda: np.full(N_HI, 1e-7))
    r_diag: np.ndarray | None = None
    x0: np.ndarray = field(default_factory=lambda: np.zeros(N_HI))
    s0: np.ndarray = field(default_factory=lambda: 1e-3 * np.eye(N_HI))

    def __post_init__(self):
        n = len(self.x0)
        if self.alpha**2 * (n + self.kappa) <= 0:
            raise ValueError("alpha^2 (n + kappa) must be positive")
        if (np.asarray(self.q_diag) <= 0).any():
            raise ValueError("process noise diagonal must be positive")
        if self.r_diag is not None and (np.asarray(self.r_diag) <= 0).any():
            raise ValueError("measurement noise diagonal must be positive")
        s0 = np.asarray(self.s0)
        if not np.allclose(s0, np.tril(s0)) or (np.diag(s0) <= 0).any():
            raise ValueError("s0 must be lower-triangular with positive diagonal")


def make_weights(n: int, alpha: float, beta: float, kappa: float) -> SigmaWeights:
    """Mean/covariance weights for the 2n+1 scaled sigma points.

    wm_0 = lambda_u / (n + lambda_u), wc_0 = wm_0 + 1 - alpha^2 + beta,
    and wm_i = wc_i = 1 / (2 (n + lambda_u)) for i >= 1, so sum(wm) = 1.
    """
    c = alpha * alpha * (n + kappa)
    if c <= 0:
        raise ValueError(
            f"degenerate sigma-point scaling: alpha^2 (n + kappa) = {c} must be > 0"
        )
    lambda_u = c - n
    wm = np.full(2 * n + 1, 1.0 / (2.0 * c))
    wc = wm.copy()
    wm[0] = lambda_u / c
    wc[0] = wm[0] + (1.0 - alpha * alpha + beta)
    return SigmaWeights(n=n, lambda_u=lambda_u, wm=wm, wc=wc)


def sigma_points(mean: np.ndarray, sqrt_cov: np.ndarray, lambda_u: float) -> np.ndarray:
    """2n+1 points: the mean, then mean +/- sqrt(n + lambda_u) * columns of S."""
    mean = np.asarray(mean, dtype=float)
    n = mean.shape[0]
    scale = np.sqrt(n + lambda_u)
    pts = np.empty((2 * n + 1, n))
    pts[0] = mean
    offs = scale * sqrt_cov.T  # row i = scaled column i of S
    pts[1 : n + 1] = mean + offs
    pts[n + 1 :] = mean - offs
    return pts


def chol_update(sqrt_cov: np.ndarray, u: np.ndarray, sign: int) -> np.ndarray:
    """Rank-one update/downdate: returns lower-triangular S' with
    S' S'^T = S S^T + sign * u u^T.

    Downdates (sign = -1) that would break positive definiteness raise
    CholeskyDowndateError.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    s = np.array(sqrt_cov, dtype=float)
    u = np.array(u, dtype=float)
    n = u.shape[0]
    for k in range(n):
        skk = s[k, k]
        r2 = skk * skk + sign * u[k] * u[k]
        if r2 < 0:
            raise CholeskyDowndateError(
                f"downdate loses positive definiteness at row {k} (r^2 = {r2:.3e})"
            )
        r = np.sqrt(r2)
        if k + 1 < n:
            if r == 0.0:
                if np.any(u[k + 1 :]) or np.any(s[k + 1 :, k]):
                    raise CholeskyDowndateError(
                        f"downdate produced a zero pivot at row {k}"
                    )
                s[k, k] = 0.0
                continue
            c = r / skk
            q = u[k] / skk
            s[k + 1 :, k] = (s[k + 1 :, k] + sign * q * u[k + 1 :]) / c
            u[k + 1 :] = c * u[k + 1 :] - q * s[k + 1 :, k]
        s[k, k] = r
    return s


def _qr_sqrt(rows: np.ndarray) -> np.ndarray:
    """Lower-triangular factor with S S^T = rows^T rows, nonnegative diagonal."""
    r = np.linalg.qr(rows, mode="r")
    n = rows.shape[1]
    r = r[:n]
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return (r * signs[:, None]).T


def _unscented_sqrt(points: np.ndarray, mean: np.ndarray, weights: SigmaWeights,
                    noise_sqrt_diag: np.ndarray) -> np.ndarray:
    """Square-root covariance of transformed sigma points plus diagonal noise."""
    dev = points - mean
    w1 = np.sqrt(weights.wc[1])
    rows = np.vstack([w1 * dev[1:], np.diag(noise_sqrt_diag)])
    s = _qr_sqrt(rows)
    wc0 = weights.wc[0]
    if wc0 != 0.0 and np.any(dev[0]):
        s = chol_update(s, np.sqrt(abs(wc0)) * dev[0], 1 if wc0 > 0 else -1)
    return s


def predict(
    state: SrUkfState,
    q_diag: np.ndarray,
    weights: SigmaWeights,
    transition=None,
) -> SrUkfState:
    """Time update. With the default identity transition the mean is
    unchanged and S' S'^T = S S^T + Q; a non-identity transition callable
    (batched, (2n+1, n) -> (2n+1, n)) runs through the same sigma-point
    pathway.
    """
    pts = sigma_points(state.mean, state.sqrt_cov, weights.lambda_u)
    if transition is not None:
        pts = np.asarray(transition(pts), dtype=float)
    mean = weights.wm @ pts
    s = _unscented_sqrt(pts, mean, weights, np.sqrt(np.asarray(q_diag, dtype=float)))
    return SrUkfState(mean=mean, sqrt_cov=s, t=state.t + 1)


def update(
    state: SrUkfState,
    y: np.ndarray,
    h,
    r_diag: np.ndarray,
    weights: SigmaWeights,
) -> SrUkfState:
    """Measurement update against observation map h (batched sigma points).

    Forms the innovation sqrt-factor Syy by QR plus weighted rank-one
    update, the gain through two triangular solves, and downdates the
    state factor by each column of K @ Syy.
    """
    y = np.asarray(y, dtype=float)
    pts = sigma_points(state.mean, state.sqrt_cov, weights.lambda_u)
    obs = np.asarray(h(pts), dtype=float)
    y_hat = weights.wm @ obs
    dev_x = pts - state.mean
    dev_y = obs - y_hat

    r_diag = np.asarray(r_diag, dtype=float)
    if y.shape != y_hat.shape or r_diag.shape != y_hat.shape:
        raise ValueError(
            f"measurement/R dimension mismatch: y {y.shape}, h(x) {y_hat.shape}, R {r_diag.shape}"
        )

    s_yy = _unscented_sqrt(obs, y_hat, weights, np.sqrt(r_diag))
    p_xy = (dev_x * weights.wc[:, None]).T @ dev_y

    # K = Pxy (Syy Syy^T)^-1 via two triangular solves
    kt = solve_triangular(s_yy, p_xy.T, lower=True)
    kt = solve_triangular(s_yy.T, kt, lower=False)
    gain = kt.T

    innovation = y - y_hat
    mean = state.mean + gain @ innovation
    s = state.sqrt_cov
    u_cols = gain @ s_yy
    try:
        for j in range(u_cols.shape[1]):
            s = chol_update(s, u_cols[:, j], -1)
    except CholeskyDowndateError as err:
        cond = np.linalg.cond(s_yy)
        raise CholeskyDowndateError(
            f"measurement downdate failed at t={state.t}: {err} "
            f"(|innovation| = {np.linalg.norm(innovation):.3e}, cond(Syy) ~ {cond:.3e})"
        ) from err
    return SrUkfState(mean=mean, sqrt_cov=s, t=state.t)


def build_R_from_noise(delta: np.ndarray, gamma: float) -> np.ndarray:
    """Diagonal measurement covariance from the sensor-noise amplitude.

    Uniform noise on [-gamma*delta, gamma*delta] has variance
    (gamma*delta)^2 / 3; the filter runs deliberately over-confident by a
    further factor 10. Entries are floored to stay positive when gamma=0.
    """
    amp = gamma * np.asarray(delta, dtype=float)
    return np.maximum(amp * amp / 3.0 / 10.0, R_FLOOR)


def filter_trajectory(
    sensors: np.ndarray,
    oc_mode: str,
    cfg: UkfConfig | None = None,
    constants: surrogate.SurrogateConstants | None = None,
    project_to_bounds: bool = False,
) -> FilterResult:
    """Run alternating predict/update over one trajectory's measurements.

    sensors has shape (L, m) with m = 7 (single OC) or 28 (stacked, OC
    blocks in OPERATING_CONDITIONS order). Estimates are the raw filter
    means, not clipped to the physical envelope, unless
    project_to_bounds is set.
    """
    cfg = cfg or UkfConfig()
    sensors = np.asarray(sensors, dtype=float)
    if not np.isfinite(sensors).all():
        bad = int(np.argwhere(~np.isfinite(sensors).all(axis=1))[0][0])
        raise FilterError(f"non-finite sensor value at step {bad}")
    h, m = surrogate.observation_model(oc_mode, constants)
    if sensors.ndim != 2 or sensors.shape[1] != m:
        raise FilterError(
            f"sensor matrix must be (L, {m}) for oc mode {oc_mode!r}, got {sensors.shape}"
        )
    if cfg.r_diag is None:
        raise FilterError("UkfConfig.r_diag must be set (see build_R_from_noise)")
    r_diag = np.asarray(cfg.r_diag, dtype=float)
    if r_diag.shape != (m,):
        raise FilterError(f"r_diag must have shape ({m},), got {r_diag.shape}")

    n = len(cfg.x0)
    weights = make_weights(n, cfg.alpha, cfg.beta, cfg.kappa)
    state = SrUkfState(mean=np.asarray(cfg.x0, dtype=float).copy(),
                       sqrt_cov=np.asarray(cfg.s0, dtype=float).copy())
    length = sensors.shape[0]
    means = np.empty((length, n))
    stds = np.empty((length, n))
    for t in range(length):
        state = predict(state, cfg.q_diag, weights)
        state = update(state, sensors[t], h, r_diag, weights)
        if project_to_bounds:
            state.mean = np.clip(state.mean, HI_MIN, HI_MAX)
        means[t] = state.mean
        stds[t] = np.sqrt(np.sum(state.sqrt_cov**2, axis=1))
    return FilterResult(means=means, sqrt_variances=stds)
