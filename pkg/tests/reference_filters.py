"""Independent reference filters used as test oracles.

Dense-covariance implementations in plain linear algebra. They share no
code with the square-root implementation under test: covariances are
full matrices, gains use explicit inverses, and sigma points (where
needed) come straight from numpy's Cholesky. Slow and simple on purpose.
"""

from __future__ import annotations

import numpy as np


def kalman_filter_sequence(ys, a, h, q, r, x0, p0):
    """Closed-form linear-Gaussian filter; returns (means, covariances)."""
    x = np.asarray(x0, dtype=float).copy()
    p = np.asarray(p0, dtype=float).copy()
    n = len(x)
    means, covs = [], []
    for y in ys:
        x = a @ x
        p = a @ p @ a.T + q
        s = h @ p @ h.T + r
        k = p @ h.T @ np.linalg.inv(s)
        x = x + k @ (y - h @ x)
        p = (np.eye(n) - k @ h) @ p
        means.append(x.copy())
        covs.append(p.copy())
    return np.array(means), np.array(covs)


def _ukf_weights(n, alpha, beta, kappa):
    lam = alpha * alpha * (n + kappa) - n
    c = n + lam
    wm = np.full(2 * n + 1, 1.0 / (2.0 * c))
    wc = wm.copy()
    wm[0] = lam / c
    wc[0] = lam / c + 1.0 - alpha * alpha + beta
    return wm, wc, c


def _draw_points(mean, cov, c):
    low = np.linalg.cholesky(cov)
    n = len(mean)
    pts = np.empty((2 * n + 1, n))
    pts[0] = mean
    pts[1 : n + 1] = mean + np.sqrt(c) * low.T
    pts[n + 1 :] = mean - np.sqrt(c) * low.T
    return pts


def dense_ukf_predict(mean, cov, q, f=None, alpha=1.0, beta=2.0, kappa=0.0):
    n = len(mean)
    wm, wc, c = _ukf_weights(n, alpha, beta, kappa)
    pts = _draw_points(mean, cov, c)
    if f is not None:
        pts = np.asarray(f(pts), dtype=float)
    m = wm @ pts
    dev = pts - m
    p = (dev * wc[:, None]).T @ dev + q
    return m, p


def dense_ukf_update(mean, cov, y, h, r, alpha=1.0, beta=2.0, kappa=0.0):
    n = len(mean)
    wm, wc, c = _ukf_weights(n, alpha, beta, kappa)
    pts = _draw_points(mean, cov, c)
    obs = np.asarray(h(pts), dtype=float)
    y_hat = wm @ obs
    dy = obs - y_hat
    dx = pts - mean
    pyy = (dy * wc[:, None]).T @ dy + r
    pxy = (dx * wc[:, None]).T @ dy
    k = pxy @ np.linalg.inv(pyy)
    mean_new = mean + k @ (y - y_hat)
    cov_new = cov - k @ pyy @ k.T
    return mean_new, cov_new


def dense_ukf_step(mean, cov, y, q, r, h, f=None, alpha=1.0, beta=2.0, kappa=0.0):
    """One predict+update cycle, redrawing sigma points after predict."""
    m, p = dense_ukf_predict(mean, cov, q, f=f, alpha=alpha, beta=beta, kappa=kappa)
    return dense_ukf_update(m, p, y, h, r, alpha=alpha, beta=beta, kappa=kappa)


def random_lower_triangular(rng, n, scale=1.0):
    """Random lower-triangular factor with positive diagonal."""
    low = np.tril(rng.normal(0.0, scale, (n, n)))
    low[np.diag_indices(n)] = np.abs(low[np.diag_indices(n)]) + 0.1 * scale
    return low
