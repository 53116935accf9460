"""Online and offline maximizers of the batch CVaR surrogate.

The online drivers split the sample stream into mini-batches, run a perturbed
continuous greedy per batch (one follow-the-perturbed-leader instance per
inner step, with gradient accumulators shared across batches), and learn the
threshold tau by exact inner maximization (stochastic driver) or projected
gradient steps (adversarial driver).  Offline baselines run plain continuous
greedy on the whole-dataset surrogate or on the empirical mean.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .feasible import FeasibleRegion
from .risk import empirical_cvar
from .smoothing import (
    SmoothingParams,
    h_value,
    smooth_grad_terms,
    smooth_tau,
    tau_subgradient,
)
from ._util import fmt

__all__ = [
    "RunParams",
    "GreedyState",
    "VertexDecomposition",
    "TraceRecord",
    "StochasticRunResult",
    "OnlineRunResult",
    "ScheduleError",
    "schedule_continuous",
    "fpl_step",
    "ogd_tau_step",
    "continuous_greedy_batch",
    "stochastic_rascal",
    "online_rascal",
    "offline_rascal",
    "frank_wolfe_expectation",
    "best_fixed_value",
    "best_fixed_comparator",
    "achieved_value",
    "approx_regret",
    "alternating_modular_sequence",
    "fitted_growth_exponent",
    "trace_to_csv",
    "TRACE_COLUMNS",
]

FPL_DISTRIBUTIONS = ("uniform-cube", "standard-gaussian")


class ScheduleError(ValueError):
    """Raised when a parameter schedule degenerates (e.g. B rounds to 0)."""


@dataclass
class RunParams:
    """Hyperparameter bundle for the online drivers.

    delta must be (close to) the reciprocal of an integer; the number of
    inner greedy steps is round(1/delta).  When batch_size does not divide
    horizon, the trailing partial batch is discarded.
    """

    horizon: int
    batch_size: int
    delta: float
    fpl_rate: float
    ogd_rate: float
    smooth_u: float
    alpha: float
    fpl_distribution: str = "uniform-cube"
    seed: int = 0

    def __post_init__(self):
        if self.horizon < 1 or self.batch_size < 1:
            raise ValueError("horizon and batch_size must be positive")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError("delta must be in (0, 1]")
        steps = 1.0 / self.delta
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("1/delta must be an integer")
        if self.fpl_rate <= 0 or self.ogd_rate <= 0 or self.smooth_u <= 0:
            raise ValueError("rates and smoothing width must be positive")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if self.fpl_distribution not in FPL_DISTRIBUTIONS:
            raise ValueError(f"fpl_distribution must be one of {FPL_DISTRIBUTIONS}")

    @property
    def inner_steps(self) -> int:
        return round(1.0 / self.delta)

    @property
    def num_batches(self) -> int:
        return self.horizon // self.batch_size

    @property
    def smoothing(self) -> SmoothingParams:
        return SmoothingParams(self.alpha, self.smooth_u)


def schedule_continuous(T, alpha, D, G, L, beta, n, variant="general", k=None, G_inf=None,
                        seed=0) -> RunParams:
    """Evaluate the convergence-rate parameter schedules verbatim.

    The general variant uses uniform-cube perturbations; the integral variant
    (region inside {sum x = k} with 0/1 vertices) uses standard Gaussians.
    B is rounded to the nearest positive integer (clamped to at most T) and
    the step is rounded down to the reciprocal of an integer.
    """
    if T < 16:
        raise ScheduleError("schedules assume T >= 16")
    for name, value in (("alpha", alpha), ("D", D), ("G", G), ("L", L), ("n", n)):
        if value <= 0:
            raise ScheduleError(f"{name} must be positive, got {value}")
    if beta < 0:
        raise ScheduleError("beta must be nonnegative")
    c_alpha = max(1.0, 1.0 / alpha - 1.0)
    if variant == "general":
        b_raw = alpha * c_alpha * math.sqrt(T) / (D * G * n ** 0.25)
        dist = "uniform-cube"
    elif variant == "integral":
        if k is None or k <= 0:
            raise ScheduleError("integral variant needs the polytope rank k")
        if n < 2:
            raise ScheduleError("integral variant needs n >= 2")
        g_inf = G if G_inf is None else G_inf
        b_raw = math.sqrt(2) * c_alpha * math.sqrt(T) * alpha / (
            2 * g_inf * k ** 1.5 * math.sqrt(math.log(n)))
        dist = "standard-gaussian"
    else:
        raise ScheduleError(f"unknown schedule variant {variant!r}")
    B = int(round(b_raw))
    if B < 1:
        raise ScheduleError(
            f"mini-batch size rounds to zero (raw {b_raw:.3g}; T={T}, alpha={alpha}, "
            f"D={D}, G={G}, n={n})")
    B = min(B, T)
    delta_raw = alpha ** 2 / (D ** 2 * ((1 + alpha) * G * L * math.sqrt(T) + alpha * beta * T ** 0.25))
    delta = 1.0 / math.ceil(1.0 / delta_raw)
    if variant == "general":
        lam = alpha * D * n ** 0.25 * math.sqrt(B / T) / G
    else:
        lam = math.sqrt(B / (T * k))
    u = T ** -0.25 / (1 + 1 / alpha)
    eta = 1.0 / (c_alpha * math.sqrt(B))
    return RunParams(horizon=T, batch_size=B, delta=delta, fpl_rate=lam,
                     ogd_rate=eta, smooth_u=u, alpha=alpha,
                     fpl_distribution=dist, seed=seed)


def fpl_step(accumulated, fpl_rate, dist, region: FeasibleRegion, rng) -> np.ndarray:
    """Vertex maximizing <fpl_rate * accumulated + r, .>, r drawn fresh."""
    if dist == "uniform-cube":
        r = rng.random(region.n)
    elif dist == "standard-gaussian":
        r = rng.standard_normal(region.n)
    else:
        raise ValueError(f"fpl_distribution must be one of {FPL_DISTRIBUTIONS}")
    return region.linear_maximize(fpl_rate * np.asarray(accumulated, dtype=float) + r)


def ogd_tau_step(tau, gamma, eta) -> float:
    """Projected gradient ascent step on the threshold: clamp(tau + eta*gamma)."""
    return float(np.clip(tau + eta * gamma, 0.0, 1.0))


@dataclass
class GreedyState:
    """Per-inner-step gradient accumulators shared across mini-batches."""

    grad_accum: np.ndarray  # (inner_steps, n)
    batch_index: int = 0

    @classmethod
    def zeros(cls, inner_steps: int, n: int) -> "GreedyState":
        return cls(np.zeros((inner_steps, n)))


@dataclass
class VertexDecomposition:
    """Convex combination of region vertices produced by continuous greedy."""

    weights: list[float]
    vertices: list[np.ndarray]

    @property
    def point(self) -> np.ndarray:
        acc = np.zeros_like(self.vertices[0])
        for w, v in zip(self.weights, self.vertices):
            acc = acc + w * v
        return acc


@dataclass
class TraceRecord:
    batch: int
    samples: int
    tau: float
    holdout_cvar: float
    holdout_mean: float
    wallclock_ms: float


TRACE_COLUMNS = ("batch", "samples", "tau", "holdout_cvar", "holdout_mean", "wallclock_ms")


def trace_to_csv(records, include_wallclock=True) -> str:
    """Render trace rows; wallclock can be dropped for reproducibility checks."""
    cols = TRACE_COLUMNS if include_wallclock else TRACE_COLUMNS[:-1]
    lines = [",".join(cols)]
    for r in records:
        row = [str(r.batch), str(r.samples), fmt(r.tau), fmt(r.holdout_cvar), fmt(r.holdout_mean)]
        if include_wallclock:
            row.append(fmt(r.wallclock_ms))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


class _Apply:
    # Adapter so a list of bound objectives F_t can be consumed by machinery
    # written for (objective, scenario) pairs.
    def value(self, x, f):
        return f.value(x)

    def gradient(self, x, f):
        return f.gradient(x)


def continuous_greedy_batch(batch, objective, region: FeasibleRegion,
                            state: GreedyState, params: RunParams, rng,
                            gradient_log=None):
    """One perturbed continuous-greedy pass over a single mini-batch.

    Starts from the origin; at each inner step s it computes the batch
    threshold, accumulates the surrogate gradient into the shared slot for s,
    and moves by delta toward the perturbed-leader vertex.  Returns the
    vertex decomposition of the batch point and the final-step threshold.
    """
    if len(batch) != params.batch_size:
        raise ValueError(f"batch has {len(batch)} scenarios, expected {params.batch_size}")
    sm = params.smoothing
    x = np.zeros(region.n)
    vertices = []
    tau = 0.0
    for j in range(params.inner_steps):
        values = np.array([objective.value(x, z) for z in batch])
        tau = smooth_tau(values, sm)
        weights = smooth_grad_terms(values, tau, sm)
        g = np.zeros(region.n)
        for w, z in zip(weights, batch):
            if w != 0.0:
                g += w * np.asarray(objective.gradient(x, z), dtype=float)
        state.grad_accum[j] += g
        if gradient_log is not None:
            gradient_log.append((state.batch_index, j, g.copy()))
        d = fpl_step(state.grad_accum[j], params.fpl_rate, params.fpl_distribution, region, rng)
        vertices.append(d)
        x = x + params.delta * d
    state.batch_index += 1
    return VertexDecomposition([params.delta] * params.inner_steps, vertices), float(tau)


@dataclass
class StochasticRunResult:
    final: VertexDecomposition
    final_index: int
    batch_points: list[VertexDecomposition]
    trace: list[TraceRecord]
    effective_horizon: int
    state: GreedyState = field(repr=False)
    gradient_log: list | None = field(default=None, repr=False)


def _holdout_record(batch_no, samples, tau, objective, point, holdout, alpha, wallclock_ms):
    if holdout:
        vals = np.array([objective.value(point, z) for z in holdout])
        hc, hm = empirical_cvar(vals, alpha), float(np.mean(vals))
    else:
        hc = hm = float("nan")
    return TraceRecord(batch_no, samples, tau, hc, hm, wallclock_ms)


def stochastic_rascal(stream, objective, region: FeasibleRegion, params: RunParams,
                      rng, holdout=None, collect_gradients=False) -> StochasticRunResult:
    """Mini-batched perturbed continuous greedy over an i.i.d. scenario stream.

    Consumes horizon samples in batches of batch_size (discarding a trailing
    partial batch), shares the per-step gradient accumulators across batches,
    and returns the batch point at an index drawn uniformly at random from
    the same rng, together with every batch point and a per-batch trace.
    """
    B = params.batch_size
    num_batches = params.num_batches
    if num_batches < 1:
        raise ScheduleError(f"batch size {B} exceeds horizon {params.horizon}")
    state = GreedyState.zeros(params.inner_steps, region.n)
    gradient_log = [] if collect_gradients else None
    it = iter(stream)
    decomps = []
    trace = []
    for b in range(num_batches):
        batch = list(itertools.islice(it, B))
        if len(batch) < B:
            raise RuntimeError(
                f"scenario stream exhausted at batch {b + 1}: got {len(batch)} of {B}")
        t0 = time.perf_counter()
        decomp, tau = continuous_greedy_batch(batch, objective, region, state,
                                              params, rng, gradient_log)
        ms = (time.perf_counter() - t0) * 1e3
        decomps.append(decomp)
        trace.append(_holdout_record(b + 1, (b + 1) * B, tau, objective,
                                     decomp.point, holdout, params.alpha, ms))
    final_index = int(rng.integers(num_batches))
    return StochasticRunResult(decomps[final_index], final_index, decomps, trace,
                               num_batches * B, state, gradient_log)


@dataclass
class OnlineRunResult:
    xs: np.ndarray          # (T_eff, n) point played each round
    taus: np.ndarray        # (T_eff,) threshold played each round
    batch_points: list[VertexDecomposition]
    effective_horizon: int
    state: GreedyState = field(repr=False)
    batch_wallclock_ms: list[float] = field(default_factory=list, repr=False)


def online_rascal(sequence, region: FeasibleRegion, params: RunParams, rng) -> OnlineRunResult:
    """Adversarial driver: play a constant point per mini-batch, learn the
    threshold by projected gradient steps within the batch, and rebuild the
    point by perturbed continuous greedy on the batch surrogate at batch end.

    Each element of sequence exposes value(x) and gradient(x); the point for
    the first batch is the origin.
    """
    B = params.batch_size
    num_batches = len(sequence) // B
    if num_batches < 1:
        raise ScheduleError(f"batch size {B} exceeds sequence length {len(sequence)}")
    apply_obj = _Apply()
    state = GreedyState.zeros(params.inner_steps, region.n)
    x = np.zeros(region.n)
    xs = np.empty((num_batches * B, region.n))
    taus = np.empty(num_batches * B)
    batch_points = []
    wallclock = []
    for b in range(num_batches):
        t0 = time.perf_counter()
        tau = 0.0
        batch = sequence[b * B:(b + 1) * B]
        for i, f_t in enumerate(batch):
            t = b * B + i
            xs[t] = x
            taus[t] = tau
            gamma = tau_subgradient(f_t.value(x), tau, params.smoothing)
            tau = ogd_tau_step(tau, gamma, params.ogd_rate)
        decomp, _ = continuous_greedy_batch(batch, apply_obj, region, state, params, rng)
        batch_points.append(decomp)
        x = decomp.point
        wallclock.append((time.perf_counter() - t0) * 1e3)
    return OnlineRunResult(xs, taus, batch_points, num_batches * B, state, wallclock)


def offline_rascal(scenarios, objective, region: FeasibleRegion, steps: int,
                   u: float, alpha: float, trajectory=None) -> np.ndarray:
    """Unperturbed continuous greedy on the whole-dataset smoothed surrogate.

    When trajectory is a list, (point, tau, wallclock_ms) is appended after
    every step so callers can trace progress.
    """
    if not scenarios:
        raise ValueError("need at least one scenario")
    sm = SmoothingParams(alpha, u)
    x = np.zeros(region.n)
    tau = 0.0
    for _ in range(steps):
        t0 = time.perf_counter()
        values = np.array([objective.value(x, z) for z in scenarios])
        tau = smooth_tau(values, sm)
        weights = smooth_grad_terms(values, tau, sm)
        g = np.zeros(region.n)
        for w, z in zip(weights, scenarios):
            if w != 0.0:
                g += w * np.asarray(objective.gradient(x, z), dtype=float)
        x = x + region.linear_maximize(g) / steps
        if trajectory is not None:
            trajectory.append((x.copy(), float(tau), (time.perf_counter() - t0) * 1e3))
    return x


def frank_wolfe_expectation(scenarios, objective, region: FeasibleRegion,
                            steps: int, trajectory=None) -> np.ndarray:
    """Continuous greedy on the empirical mean objective (no tail weighting)."""
    if not scenarios:
        raise ValueError("need at least one scenario")
    x = np.zeros(region.n)
    for _ in range(steps):
        t0 = time.perf_counter()
        g = np.zeros(region.n)
        for z in scenarios:
            g += np.asarray(objective.gradient(x, z), dtype=float)
        x = x + region.linear_maximize(g / len(scenarios)) / steps
        if trajectory is not None:
            trajectory.append((x.copy(), float("nan"), (time.perf_counter() - t0) * 1e3))
    return x


def _comparator_points(region: FeasibleRegion, resolution: int) -> list[np.ndarray]:
    if region.n > 6:
        raise ValueError("comparator search is exhaustive and limited to n <= 6")
    vertices = region.enumerate_vertices()
    points = []
    for combo in itertools.combinations_with_replacement(range(len(vertices)), resolution):
        x = np.zeros(region.n)
        for i in combo:
            x = x + vertices[i]
        points.append(x / resolution)
    return points


def best_fixed_comparator(sequence, region: FeasibleRegion, alpha, tau_step=1e-3,
                          resolution=4):
    """Exhaustive search for the best fixed (x*, tau*) on a grid.

    Candidates are convex combinations of the region's vertices with weights
    in multiples of 1/resolution, crossed with a tau grid; returns
    (sum_t h(F_t(x*), tau*), x*, tau*).
    """
    taus = np.arange(0.0, 1.0 + tau_step / 2, tau_step)
    best, best_x, best_tau = -np.inf, None, None
    for x in _comparator_points(region, resolution):
        vals = np.sort(np.array([f.value(x) for f in sequence]))
        cum = np.concatenate([[0.0], np.cumsum(vals)])
        cnt = np.searchsorted(vals, taus, side="left")
        # sum_t (tau - v_t)+ = cnt*tau - (sum of the cnt smallest values)
        shortfall = cnt * taus - cum[cnt]
        total = len(sequence) * taus - shortfall / alpha
        i = int(np.argmax(total))
        if total[i] > best:
            best, best_x, best_tau = float(total[i]), x, float(taus[i])
    return best, best_x, best_tau


def best_fixed_value(sequence, region: FeasibleRegion, alpha, tau_step=1e-3,
                     resolution=4) -> float:
    """max over (x*, tau*) of sum_t h(F_t(x*), tau*) on the comparator grid."""
    return best_fixed_comparator(sequence, region, alpha, tau_step, resolution)[0]


def achieved_value(sequence, xs, taus, alpha) -> float:
    """sum_t h(F_t(x_t), tau_t) for the played sequence."""
    return float(sum(h_value(f.value(x), tau, alpha)
                     for f, x, tau in zip(sequence, xs, taus)))


def approx_regret(sequence, xs, taus, alpha, ratio, region: FeasibleRegion,
                  tau_step=1e-3, resolution=4) -> float:
    """ratio * (best fixed comparator value) - (achieved value)."""
    best = best_fixed_value(sequence, region, alpha, tau_step, resolution)
    return ratio * best - achieved_value(sequence, xs, taus, alpha)


def alternating_modular_sequence(n: int, T: int):
    """Adversarial toy stream alternating between two modular objectives whose
    best coordinates disagree, so no single vertex is optimal every round."""
    from .objective import LinearObjective

    w_even = np.full(n, 0.2)
    w_odd = np.full(n, 0.2)
    w_even[0] = 1.0
    w_odd[1 % n] = 1.0
    even = LinearObjective(w_even)
    odd = LinearObjective(w_odd)
    return [even if t % 2 == 0 else odd for t in range(T)]


def fitted_growth_exponent(horizons, regrets, floor=1e-6) -> float:
    """Slope of log regret against log T (regrets floored to stay positive)."""
    x = np.log(np.asarray(horizons, dtype=float))
    y = np.log(np.maximum(np.asarray(regrets, dtype=float), floor))
    return float(np.polyfit(x, y, 1)[0])
