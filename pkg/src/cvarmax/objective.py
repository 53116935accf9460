"""Stochastic objective oracles F(x; z).

Provides the sensor-placement detection objective (value and closed-form
gradient), Monte-Carlo multilinear-extension estimators for set functions,
and small deterministic objectives used for calibration and tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ScenarioTimes",
    "SensorObjective",
    "SetFunctionOracle",
    "sensor_value",
    "sensor_gradient",
    "multilinear_value_estimate",
    "multilinear_gradient_estimate",
    "MultilinearObjective",
    "ProductObjective",
    "BoundObjective",
    "LinearObjective",
    "SaturatingObjective",
    "modular_oracle",
    "coverage_oracle",
]


@dataclass(frozen=True)
class ScenarioTimes:
    """Per-vertex contagion reach times for one cascade realization.

    After simulation, unreachable vertices carry the maximum finite reach
    time, so z_max always equals the largest entry.  A scenario whose source
    is isolated has all-zero times and is flagged degenerate.
    """

    reach_time: np.ndarray
    z_max: float
    order: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        z = np.asarray(self.reach_time, dtype=float)
        object.__setattr__(self, "reach_time", z)
        if z.size == 0:
            raise ValueError("reach_time must be nonempty")
        if not np.all(np.isfinite(z)):
            raise ValueError("reach_time entries must be finite")
        if np.any(z < 0) or np.any(z > self.z_max + 1e-12):
            raise ValueError("reach_time entries must lie in [0, z_max]")
        if abs(float(np.max(z)) - self.z_max) > 1e-12 * max(1.0, self.z_max):
            raise ValueError("z_max must equal the maximum reach time")
        # Stable sort fixes tie order by vertex index: determinism across runs.
        object.__setattr__(self, "order", np.argsort(z, kind="stable"))

    @property
    def n(self) -> int:
        return self.reach_time.size

    @property
    def degenerate(self) -> bool:
        return self.z_max == 0.0


@dataclass(frozen=True)
class SensorObjective:
    """Expected detection time saved by an energy allocation.

    p is the detection probability per unit of energy.  With normalization on
    (the default), values are divided by z_max so the range is [0, 1].  The
    count_undetected flag adds back the undetected-mass term
    z_max * prod_v (1-p)^{x_v}, recovering the uncorrected detection-time
    form whose value at x = 0 is z_max instead of 0.
    """

    p: float
    normalization: bool = True
    count_undetected: bool = False

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must be in (0, 1]")

    def value(self, x, z: ScenarioTimes) -> float:
        return sensor_value(x, z, self)

    def gradient(self, x, z: ScenarioTimes) -> np.ndarray:
        return sensor_gradient(x, z, self)


def _check_allocation(x, z: ScenarioTimes) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != z.reach_time.shape:
        raise ValueError(f"allocation dimension {x.shape} does not match scenario {z.reach_time.shape}")
    if np.any(x < 0):
        raise ValueError("allocation must be nonnegative")
    return x


def sensor_value(x, z: ScenarioTimes, obj: SensorObjective) -> float:
    """Sum over vertices (in reach order) of time saved by first detection.

    Equals sum_i (z_max - z_{v_i}) * (1 - q^{x_{v_i}}) * prod_{j<i} q^{x_{v_j}}
    with q = 1 - p and z_{v_1} <= ... <= z_{v_n}.
    """
    x = _check_allocation(x, z)
    if z.degenerate:
        return 0.0
    q = 1.0 - obj.p
    xo = x[z.order]
    zo = z.reach_time[z.order]
    qp = q ** xo
    survive_before = np.concatenate([[1.0], np.cumprod(qp)[:-1]])
    detect_here = (1.0 - qp) * survive_before
    saved = float(np.dot(z.z_max - zo, detect_here))
    if obj.count_undetected:
        saved += z.z_max * float(np.prod(qp))
    return saved / z.z_max if obj.normalization else saved


def sensor_gradient(x, z: ScenarioTimes, obj: SensorObjective) -> np.ndarray:
    """Closed-form gradient of sensor_value; entries are nonnegative."""
    x = _check_allocation(x, z)
    if z.degenerate:
        return np.zeros_like(x)
    q = 1.0 - obj.p
    lnq = np.log(q)
    xo = x[z.order]
    zo = z.reach_time[z.order]
    qp = q ** xo
    prod_incl = np.cumprod(qp)
    survive_before = np.concatenate([[1.0], prod_incl[:-1]])
    c = z.z_max - zo
    detect_here = (1.0 - qp) * survive_before
    # d/dx_k = (-ln q) * (c_k * prod_{j<=k} q^{x_j} - sum_{i>k} c_i P_i)
    tail = np.concatenate([np.cumsum((c * detect_here)[::-1])[::-1][1:], [0.0]])
    go = -lnq * (c * prod_incl - tail)
    if obj.count_undetected:
        go += z.z_max * lnq * np.prod(qp)
    grad = np.empty_like(x)
    grad[z.order] = go
    return grad / z.z_max if obj.normalization else grad


@dataclass(frozen=True)
class SetFunctionOracle:
    """Monotone submodular set function f(S; z) with values in [0, 1].

    evaluate takes a boolean inclusion mask of length ground_size plus the
    scenario.  evaluate_batch, when provided, takes an (m, ground_size) mask
    matrix and returns m values; the multilinear estimators use it to avoid
    per-sample Python overhead.
    """

    ground_size: int
    evaluate: Callable[[np.ndarray, object], float]
    evaluate_batch: Optional[Callable[[np.ndarray, object], np.ndarray]] = None

    def values(self, masks: np.ndarray, z) -> np.ndarray:
        if self.evaluate_batch is not None:
            return np.asarray(self.evaluate_batch(masks, z), dtype=float)
        return np.array([self.evaluate(m, z) for m in masks], dtype=float)


def _check_box(x, n) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"point has dimension {x.shape}, expected ({n},)")
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("multilinear extension requires components in [0, 1]")
    return x


def multilinear_value_estimate(f: SetFunctionOracle, x, z, m: int, rng) -> float:
    """Unbiased Monte-Carlo estimate of E[f(S; z)], S including i w.p. x_i."""
    x = _check_box(x, f.ground_size)
    if m < 1:
        raise ValueError("sample count must be >= 1")
    masks = rng.random((m, f.ground_size)) < x
    return float(np.mean(f.values(masks, z)))


def multilinear_gradient_estimate(f: SetFunctionOracle, x, z, m: int, rng) -> np.ndarray:
    """Coordinate-wise marginal gains E[f(S+i) - f(S-i)] under common samples.

    The same base samples are reused for the two coupled evaluations of each
    coordinate, which keeps every per-sample difference nonnegative for
    monotone f and sharply reduces the estimator variance.
    """
    x = _check_box(x, f.ground_size)
    if m < 1:
        raise ValueError("sample count must be >= 1")
    n = f.ground_size
    masks = rng.random((m, n)) < x
    grad = np.empty(n)
    for i in range(n):
        hi = masks.copy()
        hi[:, i] = True
        lo = masks.copy()
        lo[:, i] = False
        grad[i] = np.mean(f.values(hi, z) - f.values(lo, z))
    return grad


class MultilinearObjective:
    """Stochastic objective adapter exposing MC multilinear value/gradient.

    Owns its rng stream: deterministic given the seed, but a single instance
    must not be shared across concurrent callers.
    """

    def __init__(self, oracle: SetFunctionOracle, samples: int = 200, rng=None, seed=0):
        self.oracle = oracle
        self.samples = samples
        self.rng = rng if rng is not None else np.random.default_rng(seed)

    @property
    def dim(self) -> int:
        return self.oracle.ground_size

    def value(self, x, z) -> float:
        return multilinear_value_estimate(self.oracle, x, z, self.samples, self.rng)

    def gradient(self, x, z) -> np.ndarray:
        return multilinear_gradient_estimate(self.oracle, x, z, self.samples, self.rng)


class ProductObjective:
    """Average of one base objective over r stacked copies of its domain.

    Points live in R^{r*n}; the value is (1/r) * sum_i base(x^i) and the
    gradient is the concatenation of the per-copy gradients scaled by 1/r.
    """

    def __init__(self, base, n: int, copies: int):
        self.base = base
        self.n = n
        self.copies = copies

    def split(self, x) -> list[np.ndarray]:
        x = np.asarray(x, dtype=float)
        if x.size != self.n * self.copies:
            raise ValueError("point does not match r stacked copies")
        return [x[i * self.n:(i + 1) * self.n] for i in range(self.copies)]

    def value(self, x, z) -> float:
        return sum(self.base.value(c, z) for c in self.split(x)) / self.copies

    def gradient(self, x, z) -> np.ndarray:
        return np.concatenate([self.base.gradient(c, z) for c in self.split(x)]) / self.copies


class BoundObjective:
    """One revealed function F_t: a stochastic objective bound to a scenario."""

    def __init__(self, objective, z):
        self.objective = objective
        self.z = z

    def value(self, x) -> float:
        return self.objective.value(x, self.z)

    def gradient(self, x) -> np.ndarray:
        return self.objective.gradient(x, self.z)


class LinearObjective:
    """Deterministic modular objective <w, x> * scale; the scenario is ignored."""

    def __init__(self, weights, scale: float = 1.0):
        self.w = np.asarray(weights, dtype=float)
        self.scale = scale

    def value(self, x, z=None) -> float:
        return float(np.dot(self.w, x)) * self.scale

    def gradient(self, x, z=None) -> np.ndarray:
        return self.w * self.scale


class SaturatingObjective:
    """Monotone smooth DR-submodular test objective 1 - exp(-<w(z), x>).

    The scenario supplies the weight vector, making the family stochastic;
    all cross second derivatives are nonpositive.
    """

    def value(self, x, z) -> float:
        return 1.0 - float(np.exp(-np.dot(np.asarray(z, dtype=float), x)))

    def gradient(self, x, z) -> np.ndarray:
        w = np.asarray(z, dtype=float)
        return w * np.exp(-np.dot(w, x))


def modular_oracle(weights) -> SetFunctionOracle:
    """f(S) = sum of fixed per-element weights (scenario ignored)."""
    w = np.asarray(weights, dtype=float)

    def batch(masks, z):
        return masks.astype(float) @ w

    return SetFunctionOracle(w.size, lambda mask, z: float(np.dot(mask, w)), batch)


def coverage_oracle(covers, item_weights=None) -> SetFunctionOracle:
    """Weighted coverage: f(S; z) = weight of items covered by S, in [0, 1].

    covers is an (n, m) boolean incidence matrix.  Item weights come from the
    scenario when it is an array of length m, else from item_weights, else
    uniform; weights are normalized so f(V) <= 1.
    """
    covers = np.asarray(covers, dtype=bool)
    n, m = covers.shape
    default = np.ones(m) if item_weights is None else np.asarray(item_weights, dtype=float)

    def weights_of(z):
        if z is not None and hasattr(z, "__len__") and len(z) == m:
            w = np.asarray(z, dtype=float)
        else:
            w = default
        total = float(np.sum(w))
        return w / total if total > 0 else w

    def single(mask, z):
        w = weights_of(z)
        covered = covers[np.asarray(mask, dtype=bool)].any(axis=0) if np.any(mask) else np.zeros(m, dtype=bool)
        return float(np.dot(covered, w))

    def batch(masks, z):
        w = weights_of(z)
        covered = (masks.astype(np.uint8) @ covers.astype(np.uint8)) > 0
        return covered.astype(float) @ w

    return SetFunctionOracle(n, single, batch)
