"""Matroid-constrained portfolio optimization via rounding.

The continuous driver runs on r stacked copies of the base polytope with the
copy-averaged multilinear objective; each batch point's per-copy vertex
decomposition is merged into random bases by swap rounding, and the uniform
distribution over all rounded bases is returned as the portfolio.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .feasible import Matroid, MatroidBasePolytope, ProductRegion
from .objective import MultilinearObjective, ProductObjective, SetFunctionOracle
from .optimizers import RunParams, StochasticRunResult, VertexDecomposition, stochastic_rascal
from .risk import empirical_cvar

__all__ = [
    "Portfolio",
    "merge_bases",
    "swap_round",
    "build_portfolio",
    "portfolio_cvar",
    "default_copy_count",
    "default_rounding_count",
    "portfolio_to_csv",
    "portfolio_from_csv",
]


@dataclass
class Portfolio:
    """Distribution over matroid bases with exact rational weights."""

    entries: list[tuple[frozenset, Fraction]]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("portfolio must be nonempty")
        total = sum(w for _, w in self.entries)
        if total != 1:
            raise ValueError(f"portfolio weights sum to {total}, expected 1")
        if any(w < 0 for _, w in self.entries):
            raise ValueError("portfolio weights must be nonnegative")

    @classmethod
    def uniform(cls, sets) -> "Portfolio":
        sets = [frozenset(s) for s in sets]
        w = Fraction(1, len(sets))
        merged: dict[frozenset, Fraction] = {}
        for s in sets:
            merged[s] = merged.get(s, Fraction(0)) + w
        ordered = sorted(merged.items(), key=lambda kv: sorted(kv[0]))
        return cls(ordered)

    def mean_value(self, oracle: SetFunctionOracle, z) -> float:
        total = 0.0
        for s, w in self.entries:
            mask = np.zeros(oracle.ground_size, dtype=bool)
            mask[sorted(s)] = True
            total += float(w) * oracle.evaluate(mask, z)
        return total


def merge_bases(base_a, weight_a, base_b, weight_b, matroid: Matroid, rng) -> frozenset:
    """Randomly merge two bases into one, keeping element marginals.

    While the bases differ, take i from A-only, find the first j in B-only
    (index order) for which both single swaps stay independent, and resolve
    the pair toward A with probability weight_a / (weight_a + weight_b).
    """
    if weight_a <= 0 or weight_b <= 0:
        raise ValueError("merge weights must be positive")
    a, b = set(base_a), set(base_b)
    if not (matroid.is_base(a) and matroid.is_base(b)):
        raise ValueError("merge_bases requires two bases")
    p_a = weight_a / (weight_a + weight_b)
    while a != b:
        i = min(a - b)
        swap = None
        for j in sorted(b - a):
            if matroid.is_independent((a - {i}) | {j}) and matroid.is_independent((b - {j}) | {i}):
                swap = j
                break
        if swap is None:
            raise RuntimeError(
                "no valid exchange pair found: the matroid oracle violates the "
                "exchange property")
        if rng.random() < p_a:
            b.remove(swap)
            b.add(i)
        else:
            a.remove(i)
            a.add(swap)
    return frozenset(a)


def swap_round(decomposition: VertexDecomposition, matroid: Matroid, rng) -> frozenset:
    """Round a convex combination of base indicators to one random base.

    Left-fold of merge_bases over the decomposition; the output's element
    marginals equal the fractional point in expectation.
    """
    if any(w <= 0 for w in decomposition.weights):
        raise ValueError("decomposition weights must be positive")
    bases = [frozenset(np.nonzero(np.asarray(v) > 0.5)[0].tolist())
             for v in decomposition.vertices]
    current, mass = bases[0], decomposition.weights[0]
    if not matroid.is_base(current):
        raise ValueError("decomposition vertices must be bases")
    for nxt, w in zip(bases[1:], decomposition.weights[1:]):
        current = merge_bases(current, mass, nxt, w, matroid, rng)
        mass += w
    return current


def default_copy_count(T: int) -> int:
    """Schedule r ~ T^(1/5) with unit constant."""
    return max(1, round(T ** 0.2))


def default_rounding_count(T: int) -> int:
    """Schedule q ~ T^(3/4) with unit constant."""
    return max(1, round(T ** 0.75))


def build_portfolio(stream, set_objective: SetFunctionOracle, matroid: Matroid,
                    r: int | None = None, q: int | None = None, *,
                    params: RunParams, rng,
                    samples: int = 200) -> tuple[Portfolio, StochasticRunResult]:
    """Online portfolio construction under a matroid constraint.

    Runs the stochastic driver on r stacked copies of the base polytope with
    the copy-averaged Monte-Carlo multilinear objective, swap-rounds each
    copy of every batch point q times, and returns the uniform portfolio over
    all (batches * r * q) rounded bases (duplicates merged), along with the
    underlying continuous run.  r and q default to the horizon-derived
    schedules (~T^(1/5) and ~T^(3/4) with unit constants).
    """
    if r is None:
        r = default_copy_count(params.horizon)
    if q is None:
        q = default_rounding_count(params.horizon)
    if r < 1 or q < 1:
        raise ValueError("copy count r and rounding count q must be >= 1")
    n = set_objective.ground_size
    base_region = MatroidBasePolytope(matroid)
    region = ProductRegion(base_region, r)
    inner = MultilinearObjective(set_objective, samples=samples, rng=rng)
    objective = ProductObjective(inner, n, r)
    result = stochastic_rascal(stream, objective, region, params, rng)
    rounded = []
    for decomp in result.batch_points:
        for i in range(r):
            copy = VertexDecomposition(
                list(decomp.weights),
                [v[i * n:(i + 1) * n] for v in decomp.vertices])
            for _ in range(q):
                rounded.append(swap_round(copy, matroid, rng))
    return Portfolio.uniform(rounded), result


def portfolio_cvar(portfolio: Portfolio, scenarios, set_objective: SetFunctionOracle,
                   alpha: float) -> float:
    """CVaR over scenarios of the portfolio-expected set value."""
    vals = np.array([portfolio.mean_value(set_objective, z) for z in scenarios])
    return empirical_cvar(vals, alpha)


def portfolio_to_csv(portfolio: Portfolio) -> str:
    """weight,set rows; weights as exact fractions, sets as ;-joined ids."""
    lines = ["weight,set"]
    for s, w in portfolio.entries:
        lines.append(f"{w},{';'.join(str(i) for i in sorted(s))}")
    return "\n".join(lines) + "\n"


def portfolio_from_csv(text: str) -> Portfolio:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0] != "weight,set":
        raise ValueError("portfolio CSV must start with 'weight,set' header")
    entries = []
    for ln in lines[1:]:
        w_part, s_part = ln.split(",", 1)
        members = frozenset(int(t) for t in s_part.split(";") if t.strip())
        entries.append((members, Fraction(w_part)))
    return Portfolio(entries)
