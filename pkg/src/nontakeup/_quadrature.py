"""Quadrature rules for integrating a product of probit terms against a
standard normal random effect.

For household ``i`` the integrand in log form is

    h_i(v) = sum_t log Phi(q_t (z_t + sigma v)) + log phi(v),

which is strictly concave in ``v``.  Three node layouts are offered:

``gh``
    Plain Gauss-Hermite, ``v = sqrt(2) x_k``.
``adaptive``
    Gauss-Hermite re-centred at the mode of ``h_i`` and scaled by its
    curvature there.
``two-sided``
    The integral is split at the mode.  Each half is integrated with a
    half-range Gauss-Hermite rule (weight ``exp(-y^2)`` on ``[0, inf)``)
    through a monotone map ``v = mode +/- d(y)`` fitted so that the
    log-density drops by ``y^2`` at two reference points.  Posteriors of
    households whose outcomes never change are strongly skewed; splitting
    lets each side have its own spread and keeps the 30-node rule accurate
    for large random-effect scales.

Every layout returns nodes ``v`` and log-weights ``log W`` such that
``integral ~= sum_k W_k prod_t Phi(q_t (z_t + sigma v_k))``.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.linalg import eigh_tridiagonal
from scipy.special import erfcx, log_ndtr

from .exceptions import ConfigurationError

METHODS = ("gh", "adaptive", "two-sided")

_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)
_SQRT2 = math.sqrt(2.0)
# reference points of the two-sided map: log-density drops of y^2
_Y_NEAR, _Y_FAR = 0.5, 7.0


def mills(u: np.ndarray) -> np.ndarray:
    """phi(u) / Phi(u), accurate in both tails."""
    return math.sqrt(2 / math.pi) / erfcx(-u / _SQRT2)


@lru_cache(maxsize=None)
def gauss_hermite(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n < 2:
        raise ConfigurationError(f"quadrature needs at least 2 nodes, got {n}")
    return hermgauss(n)


@lru_cache(maxsize=None)
def half_range_hermite(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule for ``int_0^inf exp(-y^2) f(y) dy`` with ``n`` nodes.

    Recurrence coefficients come from the discretised Stieltjes procedure
    on a fine Gauss-Legendre grid over ``[0, 12]`` (the weight is below
    1e-62 beyond), followed by Golub-Welsch.
    """
    if n < 1:
        raise ConfigurationError(f"half-range rule needs at least 1 node, got {n}")
    t, u = np.polynomial.legendre.leggauss(600)
    top = 12.0
    grid = (t + 1) * top / 2
    mass = u * top / 2 * np.exp(-grid**2)
    alpha = np.empty(n)
    beta = np.empty(n)
    p_prev = np.zeros_like(grid)
    p = np.ones_like(grid)
    norm_prev = 1.0
    for k in range(n):
        norm = float(np.sum(mass * p * p))
        alpha[k] = float(np.sum(mass * grid * p * p)) / norm
        beta[k] = norm if k == 0 else norm / norm_prev
        p_next = (grid - alpha[k]) * p - (beta[k] if k else 0.0) * p_prev
        p_prev, p, norm_prev = p, p_next, norm
    nodes, vecs = eigh_tridiagonal(alpha, np.sqrt(beta[1:]))
    weights = vecs[0] ** 2
    # the grid loses ~1e-13 of mass; pin the total to sqrt(pi)/2 exactly
    return nodes, weights * (0.5 * math.sqrt(math.pi) / weights.sum())


def _h(a, s, v, starts):
    """log-integrand per group at one point per group (``v`` indexed by obs)."""
    return np.add.reduceat(log_ndtr(a + s * v), starts)


def _h_grad(a, s, v, starts):
    u = a + s * v
    lam = mills(u)
    return np.add.reduceat(s * lam, starts), np.add.reduceat(s * s * lam * (u + lam), starts)


def find_mode(a, s, starts, gid, max_iter=100, tol=1e-12):
    """Mode and negative curvature of each group's log-integrand.

    ``a = q z`` and ``s = q sigma`` per observation.
    """
    mu = np.zeros(len(starts))
    for _ in range(max_iter):
        g, c = _h_grad(a, s, mu[gid], starts)
        g -= mu
        c += 1.0
        step = np.clip(g / c, -3.0, 3.0)
        mu += step
        if np.max(np.abs(step), initial=0.0) < tol:
            break
    _, c = _h_grad(a, s, mu[gid], starts)
    return mu, c + 1.0


def _drop_point(a, s, starts, gid, mu, h0, sign, target, max_iter=100):
    """Distance ``d > 0`` with ``h(mu + sign d) = h(mu) - target``.

    The gap ``h(mu) - h(mu + sign d)`` is convex and increasing in ``d``
    and at least ``d^2 / 2``, so Newton from ``sqrt(2 target)`` decreases
    monotonically onto the root.
    """
    d = np.full(len(starts), math.sqrt(2.0 * target))
    for _ in range(max_iter):
        v = mu + sign * d
        hv = _h(a, s, v[gid], starts) - 0.5 * v * v
        g, _ = _h_grad(a, s, v[gid], starts)
        slope = -sign * (g - v)
        step = (h0 - hv - target) / slope
        d = np.maximum(d - step, 0.5 * d)
        if np.max(np.abs(step) / d, initial=0.0) < 1e-14:
            break
    return d


def _side_map(d1, d2, y):
    """Monotone maps ``d(y)`` through ``(Y_NEAR, d1)`` and ``(Y_FAR, d2)``.

    Returns ``d`` and ``dd/dy`` at the half-range nodes ``y`` (groups x nodes).
    """
    y1, y2 = _Y_NEAR, _Y_FAR
    r = (d2 / y2) / (d1 / y1)
    # exact Gaussians give r == 1 up to rounding; keep them on the linear map
    widening = r >= 1.0 - 1e-9
    # widening side: d = c y (1 + k y)
    rw = np.minimum(r, 0.95 * y2 / y1)
    kw = np.where(widening, (rw - 1.0) / (y2 - rw * y1), 0.0)
    cw = d1 / (y1 * (1.0 + kw * y1))
    # narrowing side: d = (c / k) log(1 + k y); solve for k by bisection in log k
    ratio = d2 / d1
    lo = np.full_like(d1, -12.0)
    hi = np.full_like(d1, 12.0)
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        k = 10.0**mid
        too_small = np.log1p(k * y2) / np.log1p(k * y1) > ratio
        lo = np.where(too_small, mid, lo)
        hi = np.where(too_small, hi, mid)
    kn = 10.0 ** (0.5 * (lo + hi))
    cn = d1 * kn / np.log1p(kn * y1)
    Y = y[None, :]
    d_w = cw[:, None] * Y * (1.0 + kw[:, None] * Y)
    j_w = cw[:, None] * (1.0 + 2.0 * kw[:, None] * Y)
    d_n = cn[:, None] / kn[:, None] * np.log1p(kn[:, None] * Y)
    j_n = cn[:, None] / (1.0 + kn[:, None] * Y)
    wide = widening[:, None]
    return np.where(wide, d_w, d_n), np.where(wide, j_w, j_n)


def nodes(method: str, n_nodes: int, a, s, starts, gid):
    """Per-group nodes and log-weights, both of shape ``(groups, nodes)``."""
    n_groups = len(starts)
    if method not in METHODS:
        raise ConfigurationError(f"unknown quadrature method {method!r}; choose from {METHODS}")
    if n_nodes < 2:
        raise ConfigurationError(f"quadrature needs at least 2 nodes, got {n_nodes}")
    if method == "gh":
        x, w = gauss_hermite(n_nodes)
        v = np.broadcast_to(_SQRT2 * x, (n_groups, n_nodes))
        logw = np.broadcast_to(np.log(w) - 0.5 * math.log(math.pi), (n_groups, n_nodes))
        return v, logw
    mu, curv = find_mode(a, s, starts, gid)
    if method == "adaptive":
        x, w = gauss_hermite(n_nodes)
        tau = 1.0 / np.sqrt(curv)
        v = mu[:, None] + _SQRT2 * tau[:, None] * x[None, :]
        logw = np.log(_SQRT2 * tau[:, None] * w[None, :]) + x[None, :] ** 2 - 0.5 * v**2 - _LOG_SQRT_2PI
        return v, logw
    left = n_nodes // 2
    sides = ((-1.0, left), (1.0, n_nodes - left))
    h0 = _h(a, s, mu[gid], starts) - 0.5 * mu * mu
    vs, ws = [], []
    for sign, m in sides:
        y, w = half_range_hermite(m)
        d1 = _drop_point(a, s, starts, gid, mu, h0, sign, _Y_NEAR**2)
        d2 = _drop_point(a, s, starts, gid, mu, h0, sign, _Y_FAR**2)
        dist, jac = _side_map(d1, d2, y)
        v = mu[:, None] + sign * dist
        vs.append(v)
        ws.append(np.log(jac * w[None, :]) + y[None, :] ** 2 - 0.5 * v**2 - _LOG_SQRT_2PI)
    return np.concatenate(vs, axis=1), np.concatenate(ws, axis=1)
