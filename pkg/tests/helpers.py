"""Independent oracles used by the test suite.

These deliberately avoid the library's solution paths: gradients come from
central finite differences, and the worst-case probability / sigma searches
come from dense grid evaluation of the underlying objective.
"""

import numpy as np

from drq import nn


def fd_gradient(params: nn.MlpParams, x, target, step=1e-5):
    """Central finite differences of (forward(params, x) - target)^2 for
    every parameter; returns a list of (dW, db) like nn.gradient."""

    def loss():
        return (nn.forward(params, x) - target) ** 2

    grads = []
    for w, b in zip(params.weights, params.biases):
        dw = np.zeros_like(w)
        for k in range(w.size):
            orig = w.flat[k]
            w.flat[k] = orig + step
            up = loss()
            w.flat[k] = orig - step
            down = loss()
            w.flat[k] = orig
            dw.flat[k] = (up - down) / (2 * step)
        db = np.zeros_like(b)
        for k in range(b.size):
            orig = b.flat[k]
            b.flat[k] = orig + step
            up = loss()
            b.flat[k] = orig - step
            down = loss()
            b.flat[k] = orig
            db.flat[k] = (up - down) / (2 * step)
        grads.append((dw, db))
    return grads


def max_relative_gradient_error(analytic, numeric) -> float:
    worst = 0.0
    for (aw, ab), (fw, fb) in zip(analytic, numeric):
        for a, f in ((aw, fw), (ab, fb)):
            denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-6)
            worst = max(worst, float(np.max(np.abs(a - f) / denom)))
    return worst


def h_objective(sigma, theta, epsilon, lam):
    """Direct evaluation of lam*eps + mean (1 - lam*(sigma - |theta_j|)^+)^+."""
    slack_pos = np.maximum(sigma - np.abs(np.asarray(theta, dtype=float)), 0.0)
    terms = np.maximum(1.0 - np.outer(np.atleast_1d(lam), slack_pos), 0.0)
    return np.atleast_1d(lam) * epsilon + terms.mean(axis=1)


def wcp_grid_oracle(sigma, theta, epsilon, n_grid=50_001, rounds=3):
    """Refining dense grid search over lam in [0, 10 * largest kink].

    The objective is convex in lam, so each round can re-grid around the
    previous argmin and shrink the bracket by a factor ~n_grid.
    """
    a = np.abs(np.asarray(theta, dtype=float))
    slacks = sigma - a[a < sigma]
    lo, hi = 0.0, 10.0 / slacks.min() if slacks.size else 1.0
    best = np.inf
    for _ in range(rounds):
        lam = np.linspace(lo, hi, n_grid)
        values = h_objective(sigma, theta, epsilon, lam)
        k = int(values.argmin())
        best = min(best, float(values[k]))
        width = lam[1] - lam[0]
        lo, hi = max(0.0, lam[k] - width), lam[k] + width
    if epsilon == 0.0:
        best = min(best, float(np.mean(a >= sigma)))
    return best


def sigma_grid_oracle(theta, epsilon, eta, sigma_max, n_sigma=2001, n_lam=20_001):
    """Smallest sigma on a grid whose grid-searched worst-case probability
    is <= eta; None if no grid point qualifies.

    Located by bisection over the grid indices, which returns the same
    point as a left-to-right scan because the worst-case probability is
    non-increasing in sigma (checked separately by the property tests).
    """
    grid = np.linspace(0.0, sigma_max, n_sigma)

    def ok(k):
        return wcp_grid_oracle(grid[k], theta, epsilon, n_lam, rounds=2) <= eta

    if not ok(n_sigma - 1):
        return None
    lo, hi = 0, n_sigma - 1  # invariant: ok(hi), and lo == 0 or not ok(lo)
    if ok(0):
        return float(grid[0])
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return float(grid[hi])
