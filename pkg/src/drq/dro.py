"""Constraint-tightening offsets from Wasserstein distributionally robust
optimization over an empirical sample of TD-error residuals.

Pipeline: standardize the samples, pick the Wasserstein radius from the
sample count, find the smallest symmetric interval that bounds the
worst-case out-of-interval probability by the risk level, and map that
interval back to an additive offset on the constraint boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WassersteinConfig:
    """Ambiguity-set settings: support diameter, ball confidence, risk level,
    and the sigma search window/tolerance (in standardized units)."""

    support_diameter: float = 0.2
    confidence: float = 0.98
    risk_level: float = 0.02
    sigma_max: float = 10.0
    bisection_tol: float = 1e-4

    def __post_init__(self):
        if not self.support_diameter > 0:
            raise ValueError("support_diameter must be > 0")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")
        if not 0 < self.risk_level < 1:
            raise ValueError("risk_level must lie in (0, 1)")
        if not self.sigma_max > 0:
            raise ValueError("sigma_max must be > 0")
        if not self.bisection_tol > 0:
            raise ValueError("bisection_tol must be > 0")


@dataclass(frozen=True)
class NormalizedSamples:
    """Standardized samples with the (mean, std) used to produce them.

    `degenerate` marks a zero-variance input, in which case `normalized`
    is all zeros and std is 0.
    """

    mean: float
    std: float
    normalized: np.ndarray
    degenerate: bool


@dataclass(frozen=True)
class DroOffset:
    """Offset q plus the provenance of its computation."""

    offset: float
    sigma: float
    epsilon: float
    n_samples: int
    mean: float
    std: float
    degenerate: bool = False
    feasible: bool = True


def _as_samples(samples) -> np.ndarray:
    arr = np.asarray(samples, dtype=float).ravel()
    if arr.size < 1:
        raise ValueError("need at least one sample")
    if not np.all(np.isfinite(arr)):
        raise ValueError("samples must be finite")
    return arr


def epsilon_radius(n_samples: int, cfg: WassersteinConfig) -> float:
    """Wasserstein ball radius: D * sqrt((2/n) * ln(1/(1 - confidence)))."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if not cfg.confidence < 1:
        raise ValueError("confidence must be < 1")
    return cfg.support_diameter * math.sqrt(
        (2.0 / n_samples) * math.log(1.0 / (1.0 - cfg.confidence))
    )


def normalize(samples) -> NormalizedSamples:
    """Center and scale to zero mean and unit (population) variance.

    An all-identical sample set (no spread to standardize) is flagged
    degenerate and maps to all-zero normalized values.
    """
    arr = _as_samples(samples)
    if np.all(arr == arr[0]):
        return NormalizedSamples(float(arr[0]), 0.0, np.zeros_like(arr), degenerate=True)
    mean = float(arr.mean())
    std = float(arr.std())  # population, ddof=0
    if std == 0.0:  # spread below float resolution
        return NormalizedSamples(mean, 0.0, np.zeros_like(arr), degenerate=True)
    return NormalizedSamples(mean, std, (arr - mean) / std, degenerate=False)


def worst_case_probability(sigma: float, theta, epsilon: float) -> float:
    """Worst probability, over the Wasserstein ball of radius epsilon around
    the empirical distribution of `theta`, that a draw falls outside the
    open interval (-sigma, sigma).

    Equals inf over lam >= 0 of
        lam * epsilon + mean_j (1 - lam * (sigma - |theta_j|)^+)^+,
    a convex piecewise-linear function of lam whose infimum sits at lam = 0,
    at a kink 1/(sigma - |theta_j|) for a strictly inside sample, or in the
    lam -> inf limit (finite only when epsilon = 0, where it equals the
    empirical fraction with |theta_j| >= sigma).
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    a = np.abs(np.asarray(theta, dtype=float).ravel())
    n = a.size
    if n == 0:
        raise ValueError("theta must be nonempty")
    n_outside = int(np.count_nonzero(a >= sigma))

    best = 1.0  # h(0) = 1 always
    slacks = np.sort(sigma - a[a < sigma])  # strictly positive, ascending
    if slacks.size:
        # At lam = 1/slacks[k], terms with smaller slack contribute
        # 1 - slack_j/slack_k; larger or equal slacks contribute 0.
        prefix = np.concatenate(([0.0], np.cumsum(slacks)))[:-1]
        k = np.arange(slacks.size)
        inside_sum = k - prefix / slacks
        h = epsilon / slacks + (n_outside + inside_sum) / n
        best = min(best, float(h.min()))
    if epsilon == 0.0:
        best = min(best, n_outside / n)
    return best


def solve_sigma(theta, epsilon: float, cfg: WassersteinConfig) -> tuple[float, bool]:
    """Smallest sigma in [0, sigma_max] whose worst-case out-of-interval
    probability is <= risk_level, by bisection (the probability is
    non-increasing in sigma). Returns (sigma, feasible); an infeasible
    search reports sigma_max with feasible=False.
    """
    eta = cfg.risk_level
    if worst_case_probability(cfg.sigma_max, theta, epsilon) > eta:
        return cfg.sigma_max, False
    lo, hi = 0.0, cfg.sigma_max
    while hi - lo > cfg.bisection_tol:
        mid = 0.5 * (lo + hi)
        if worst_case_probability(mid, theta, epsilon) <= eta:
            hi = mid
        else:
            lo = mid
    return hi, True


def compute_offset(
    samples, cfg: WassersteinConfig, epsilon: float | None = None
) -> DroOffset:
    """Full offset computation: q = mean + std * sigma*.

    For a scalar random variable the ambiguity interval is
    (mean - std*sigma, mean + std*sigma); the binding side of a one-sided
    upper constraint is the upper endpoint, hence the returned q. A
    zero-variance sample set short-circuits to q = mean. Pass `epsilon` to
    override the sample-count-derived radius (debugging).
    """
    arr = _as_samples(samples)
    eps = epsilon_radius(arr.size, cfg) if epsilon is None else float(epsilon)
    norm = normalize(arr)
    if norm.degenerate:
        return DroOffset(
            offset=norm.mean,
            sigma=0.0,
            epsilon=eps,
            n_samples=arr.size,
            mean=norm.mean,
            std=0.0,
            degenerate=True,
        )
    sigma, feasible = solve_sigma(norm.normalized, eps, cfg)
    return DroOffset(
        offset=norm.mean + norm.std * sigma,
        sigma=sigma,
        epsilon=eps,
        n_samples=arr.size,
        mean=norm.mean,
        std=norm.std,
        degenerate=False,
        feasible=feasible,
    )
