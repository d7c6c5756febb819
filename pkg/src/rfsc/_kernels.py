"""Compiled single-model kernels for the logistic Newton fit and coefficient covariance.

Populations are thousands of small (N x tau) problems, so per-call overhead
dominates any vectorized numpy formulation; these loops run at native speed.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

PEARSON, WORKING, FIXED = 0, 1, 2
_MAX_EXP = 700.0
# a Cholesky pivot below this fraction of its diagonal entry counts as singular
_PIVOT_RTOL = 1e-13


@njit(cache=True)
def _softplus_neg(m):
    # log(1 + exp(-m)) without overflow
    if m < 0.0:
        return -m + math.log1p(math.exp(m))
    return math.log1p(math.exp(-m))


@njit(cache=True)
def _misfit(m):
    return 0.5 * (1.0 - math.tanh(0.5 * m))


@njit(cache=True)
def _margins(x, theta, y, out):
    n, t = x.shape
    for i in range(n):
        s = 0.0
        for j in range(t):
            s += x[i, j] * theta[j]
        out[i] = y[i] * s


@njit(cache=True)
def _objective(margin, theta, ridge):
    s = 0.0
    for i in range(margin.shape[0]):
        s += _softplus_neg(margin[i])
    obj = s / margin.shape[0]
    if ridge > 0.0:
        obj += 0.5 * ridge * np.dot(theta, theta)
    return obj


@njit(cache=True)
def _gram(x, w, diag):
    n, t = x.shape
    g = np.zeros((t, t))
    for i in range(n):
        wi = w[i]
        for a in range(t):
            xa = x[i, a] * wi
            for b in range(a + 1):
                g[a, b] += xa * x[i, b]
    for a in range(t):
        g[a, a] += diag
        for b in range(a):
            g[b, a] = g[a, b]
    return g


@njit(cache=True)
def _cholesky(a, shift):
    """Lower factor of a + shift * I; an empty array when not positive definite."""
    t = a.shape[0]
    c = np.zeros((t, t))
    for j in range(t):
        s = a[j, j] + shift
        for k in range(j):
            s -= c[j, k] * c[j, k]
        if not s > _PIVOT_RTOL * (a[j, j] + shift):
            return np.zeros((0, 0))
        d = math.sqrt(s)
        c[j, j] = d
        for i in range(j + 1, t):
            s = a[i, j]
            for k in range(j):
                s -= c[i, k] * c[j, k]
            c[i, j] = s / d
    return c


@njit(cache=True)
def _factor(a):
    """Cholesky factor, retried once with a ridge of 1e-8 * mean diagonal."""
    c = _cholesky(a, 0.0)
    if c.shape[0] == a.shape[0]:
        return c, False
    tr = np.trace(a)
    c = _cholesky(a, 1e-8 * (tr / a.shape[0] if tr > 0 else 1.0))
    return c, True


@njit(cache=True)
def _solve(c, g):
    t = g.shape[0]
    z = np.empty(t)
    for i in range(t):
        s = g[i]
        for k in range(i):
            s -= c[i, k] * z[k]
        z[i] = s / c[i, i]
    for i in range(t - 1, -1, -1):
        s = z[i]
        for k in range(i + 1, t):
            s -= c[k, i] * z[k]
        z[i] = s / c[i, i]
    return z


@njit(cache=True)
def _inverse_diag(c):
    # diag((C C')^-1)_j = sum_i (C^-1)_ij^2 with C^-1 lower triangular
    t = c.shape[0]
    out = np.zeros(t)
    col = np.empty(t)
    for j in range(t):
        for i in range(t):
            if i < j:
                col[i] = 0.0
            elif i == j:
                col[i] = 1.0 / c[i, i]
            else:
                s = 0.0
                for k in range(j, i):
                    s -= c[i, k] * col[k]
                col[i] = s / c[i, i]
            out[j] += col[i] * col[i]
    return out


@njit(cache=True)
def _gradient(x, y, margin, theta, ridge, p, grad):
    n, t = x.shape
    for i in range(n):
        p[i] = _misfit(margin[i])
    for j in range(t):
        s = 0.0
        for i in range(n):
            s += x[i, j] * y[i] * p[i]
        grad[j] = -s / n + ridge * theta[j]
    return math.sqrt(np.dot(grad, grad))


@njit(cache=True)
def newton(x, y, theta0, ridge, max_iter, grad_tol, halvings, stuck_tol):
    """Damped Newton from theta0; returns (theta, converged, n_iter, ridge_fallback)."""
    n, t = x.shape
    theta = theta0.copy()
    margin = np.empty(n)
    _margins(x, theta, y, margin)
    cand_margin = np.empty(n)
    p = np.empty(n)
    w = np.empty(n)
    grad = np.empty(t)
    obj = _objective(margin, theta, ridge)
    converged = False
    fallback = False
    n_iter = 0
    exhausted = True
    for it in range(1, max_iter + 1):
        gnorm = _gradient(x, y, margin, theta, ridge, p, grad)
        if gnorm <= grad_tol:
            converged = True
            exhausted = False
            break
        for i in range(n):
            w[i] = p[i] * (1.0 - p[i]) / n
        c, bumped = _factor(_gram(x, w, ridge))
        fallback |= bumped
        if c.shape[0] != t:
            # singular even with the ridge: stop where we are
            converged = gnorm <= stuck_tol
            exhausted = False
            break
        step = _solve(c, grad)
        scale = 1.0
        accepted = False
        for _ in range(halvings + 1):
            cand = theta - scale * step
            _margins(x, cand, y, cand_margin)
            c_obj = _objective(cand_margin, cand, ridge)
            if c_obj <= obj:
                theta, obj = cand, c_obj
                margin[:] = cand_margin
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            # no decrease along the Newton direction: numerical optimum
            converged = gnorm <= stuck_tol
            exhausted = False
            break
        n_iter = it
    if exhausted:
        converged = _gradient(x, y, margin, theta, ridge, p, grad) <= grad_tol
    return theta, converged, n_iter, fallback


@njit(cache=True)
def variances(x, theta, y, dispersion, ridge):
    """sigma_e^2 * diag(G^-1) with G the Fisher information (plus N * ridge).

    Returns (variances, needed_ridge); variances are inf when G stays singular.
    """
    n, t = x.shape
    margin = np.empty(n)
    _margins(x, theta, y, margin)
    w = np.empty(n)
    for i in range(n):
        q = _misfit(margin[i])
        w[i] = q * (1.0 - q)
    g = _gram(x, w, n * ridge)
    dof = max(n - t, 1)
    if dispersion == FIXED:
        sigma_e2 = 1.0
    else:
        s = 0.0
        for i in range(n):
            e = math.exp(min(-margin[i], _MAX_EXP))
            s += e if dispersion == PEARSON else (1.0 + e) ** 2
        sigma_e2 = s / dof
    if not np.trace(g) > 0:
        return np.full(t, np.inf), True
    c, bumped = _factor(g)
    if c.shape[0] != t:
        return np.full(t, np.inf), True
    return sigma_e2 * _inverse_diag(c), bumped


@njit(cache=True)
def summary(x, theta, y):
    """(mean logistic loss, fraction of positive margins)."""
    n = x.shape[0]
    margin = np.empty(n)
    _margins(x, theta, y, margin)
    hits = 0
    for i in range(n):
        if margin[i] > 0.0:
            hits += 1
    return _objective(margin, theta, 0.0), hits / n
