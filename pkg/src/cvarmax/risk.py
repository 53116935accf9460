"""Exact empirical VaR/CVaR and the variational characterization.

All evaluation in this package funnels through these functions, so they are
kept exact: the tail mean splits the boundary atom fractionally and therefore
agrees with the variational maximum for every alpha, integral tail count or
not.
"""

from __future__ import annotations

import numpy as np

__all__ = ["empirical_var", "empirical_cvar", "cvar_variational"]


def _as_sample(values, weights):
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("empty sample")
    if weights is None:
        w = np.full(v.size, 1.0 / v.size)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if w.shape != v.shape:
            raise ValueError("weights shape does not match values")
        if np.any(w < 0) or not np.isclose(w.sum(), 1.0):
            raise ValueError("weights must be nonnegative and sum to 1")
    order = np.argsort(v, kind="stable")
    return v[order], w[order]


def empirical_var(values, alpha, weights=None):
    """sup{tau : Pr(V <= tau) <= alpha} over the empirical distribution.

    Computed by a sorted scan: the supremum is the smallest sample value whose
    cumulative probability exceeds alpha, or the maximum value when no such
    point exists (alpha = 1).
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    v, w = _as_sample(values, weights)
    cum = np.cumsum(w)
    above = np.nonzero(cum > alpha)[0]
    if above.size == 0:
        return float(v[-1])
    return float(v[above[0]])


def empirical_cvar(values, alpha, weights=None):
    """Mean of the lowest alpha fraction of probability mass.

    The atom straddling the alpha boundary is split fractionally so that
    exactly alpha mass is averaged; this makes the result equal to the
    variational maximum for all alpha.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    v, w = _as_sample(values, weights)
    cum = np.cumsum(w)
    k = int(np.searchsorted(cum, alpha))  # first index with cum >= alpha
    if k >= v.size:
        k = v.size - 1
    below_w = cum[k - 1] if k > 0 else 0.0
    below_s = float(np.dot(w[:k], v[:k]))
    return float((below_s + (alpha - below_w) * v[k]) / alpha)


def cvar_variational(values, alpha, weights=None):
    """Maximize tau - (1/alpha)*E[(tau - V)+] over tau in [0, 1].

    The objective is piecewise linear and concave with kinks only at sample
    values, increasing to the left of the sample range, so the maximum is
    attained at a sample value.  Returns (max value, smallest maximizer).
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    v, w = _as_sample(values, weights)
    # g(v_k) = v_k - (1/alpha) * sum_{v_i < v_k} w_i (v_k - v_i); evaluate at
    # every sorted value via exclusive prefix sums (ties contribute zero).
    cum_w = np.concatenate([[0.0], np.cumsum(w)])
    cum_wv = np.concatenate([[0.0], np.cumsum(w * v)])
    lower = np.searchsorted(v, v, side="left")  # count of strictly smaller
    g = v - (cum_w[lower] * v - cum_wv[lower]) / alpha
    best = float(np.max(g))
    tol = 1e-12 * max(1.0, abs(best))
    tau_star = float(np.clip(v[np.nonzero(g >= best - tol)[0][0]], 0.0, 1.0))
    return best, tau_star
