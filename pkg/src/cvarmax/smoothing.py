"""Smoothed CVaR auxiliary objectives for a mini-batch of scenarios.

The raw auxiliary function h(F, tau) = tau - (1/alpha)[tau - F]+ is kinked in
tau; averaging the threshold over a width-u window yields a differentiable
surrogate with closed form

    h_u(F, tau) = tau + u/2 - psi(tau - F) / (alpha * u),
    psi(a) = 0                 for a <= -u
           = (a + u)^2 / 2     for -u < a < 0
           = a*u + u^2/2       for a >= 0.

The batch objective is hbar(x) = max_tau mean_z h_u(F(x; z), tau); its inner
maximizer is found exactly from the piecewise-linear derivative, and its
x-gradient at that maximizer is the clipped-weight average implemented by
smooth_grad.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SmoothingParams",
    "h_value",
    "h_smooth_value",
    "indicator",
    "tau_subgradient",
    "smooth_tau",
    "smooth_grad",
    "smooth_grad_terms",
    "h_bar_value",
]


@dataclass(frozen=True)
class SmoothingParams:
    """Quantile level alpha in (0, 1] and smoothing width u > 0."""

    alpha: float
    u: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if self.u <= 0.0:
            raise ValueError("smoothing width u must be positive")

    @property
    def c_alpha(self) -> float:
        return max(1.0, 1.0 / self.alpha - 1.0)


def h_value(f_val, tau, alpha):
    """tau - (1/alpha) * max(tau - F, 0); accepts scalars or arrays."""
    f_val = np.asarray(f_val, dtype=float)
    return tau - np.maximum(tau - f_val, 0.0) / alpha


def _psi(a, u):
    # Branch-free form of the piecewise integral: 0 for a <= -u,
    # (a+u)^2/2 on (-u, 0), a*u + u^2/2 for a >= 0.
    c = np.clip(a + u, 0.0, u)
    return c * c * 0.5 + u * np.maximum(a, 0.0)


def h_smooth_value(f_val, tau, params: SmoothingParams):
    """Window-averaged surrogate of h_value; accepts scalars or arrays."""
    f_val = np.asarray(f_val, dtype=float)
    a = tau - f_val
    return tau + params.u / 2.0 - _psi(a, params.u) / (params.alpha * params.u)


def indicator(f_val, tau, u):
    """clamp((F - tau)/u, 0, 1): the fraction of the smoothing window that a
    scenario's value clears."""
    f_val = np.asarray(f_val, dtype=float)
    return np.clip((f_val - tau) / u, 0.0, 1.0)


def tau_subgradient(f_val, tau, params: SmoothingParams):
    """Exact d/dtau of h_smooth_value: 1 - (1 - indicator)/alpha.

    Always lies in [1 - 1/alpha, 1], hence bounded by max(1, 1/alpha - 1).
    """
    return 1.0 - (1.0 - indicator(f_val, tau, params.u)) / params.alpha


def smooth_tau(values, params: SmoothingParams) -> float:
    """Smallest maximizer in [0, 1] of tau -> mean_z h_smooth_value(F_z, tau).

    The derivative phi(tau) = sum_z tau_subgradient is piecewise linear and
    nonincreasing, with breakpoints at {F_z - u, F_z}; phi starts at |Z| > 0,
    so the smallest maximizer is the first root, found by scanning the sorted
    breakpoints and solving one linear equation on the active segment.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("empty batch")
    u, alpha = params.u, params.alpha
    bp = np.sort(np.concatenate([v - u, v]))
    ind = np.clip((v[None, :] - bp[:, None]) / u, 0.0, 1.0)
    phi = np.sum(1.0 - (1.0 - ind) / alpha, axis=1)
    below = np.nonzero(phi <= 0.0)[0]
    if below.size == 0:
        tau = bp[-1]  # unreachable for alpha <= 1; kept as a safe fallback
    else:
        i = int(below[0])
        if i == 0 or phi[i - 1] <= 0.0:
            tau = bp[i]
        else:
            tau = bp[i - 1] + phi[i - 1] * (bp[i] - bp[i - 1]) / (phi[i - 1] - phi[i])
    return float(np.clip(tau, 0.0, 1.0))


def smooth_grad_terms(values, tau, params: SmoothingParams) -> np.ndarray:
    """Per-scenario gradient weights (1 - indicator)/(alpha * |Z|).

    These are the coefficients multiplying each scenario gradient in the
    x-gradient of the batch surrogate at threshold tau.
    """
    v = np.asarray(values, dtype=float).ravel()
    return (1.0 - indicator(v, tau, params.u)) / (params.alpha * v.size)


def smooth_grad(x, tau, batch, objective, params: SmoothingParams) -> np.ndarray:
    """Gradient in x of mean_z h_smooth_value(F(x; z), tau).

    Equals grad of the batch objective hbar at its inner maximizer tau, by
    the envelope theorem; entries are nonnegative for monotone objectives.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    values = np.array([objective.value(x, z) for z in batch])
    weights = smooth_grad_terms(values, tau, params)
    grad = np.zeros_like(np.asarray(x, dtype=float))
    for w, z in zip(weights, batch):
        if w != 0.0:
            grad += w * np.asarray(objective.gradient(x, z), dtype=float)
    return grad


def h_bar_value(x, batch, objective, params: SmoothingParams):
    """(max_tau mean_z h_smooth_value, smallest maximizing tau) for a batch."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    values = np.array([objective.value(x, z) for z in batch])
    tau_star = smooth_tau(values, params)
    return float(np.mean(h_smooth_value(values, tau_star, params))), tau_star
