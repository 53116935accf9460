"""Feasible regions behind a uniform oracle interface.

Every region exposes linear maximization (returning a vertex), membership
with a fixed slack tolerance, and its Euclidean diameter.  Concrete regions:
the capped budget polytope (down-closed) and matroid base polytopes for
uniform and partition matroids (not down-closed, flagged as such).
"""

from __future__ import annotations

import itertools
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FeasibleRegion",
    "BudgetPolytope",
    "Matroid",
    "UniformMatroid",
    "PartitionMatroid",
    "MatroidBasePolytope",
    "ProductRegion",
    "parse_partition_spec",
]

MEMBERSHIP_TOL = 1e-9  # absorbs accumulated float error from delta-step sums


class FeasibleRegion(ABC):
    """Oracle interface: linear maximization, membership, diameter."""

    n: int
    down_closed: bool = False
    integral_rank: int | None = None  # k when the region sits in {sum x = k}

    @abstractmethod
    def linear_maximize(self, w) -> np.ndarray:
        """A vertex maximizing <w, .>; ties broken toward the lexicographically
        smallest vertex vector."""

    @abstractmethod
    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        ...

    @abstractmethod
    def diameter(self) -> float:
        ...

    def enumerate_vertices(self) -> list[np.ndarray]:
        raise NotImplementedError(f"{type(self).__name__} does not enumerate vertices")

    def _check_dim(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.n,):
            raise ValueError(f"weight vector has shape {w.shape}, expected ({self.n},)")
        return w


def _desc_order(w: np.ndarray) -> np.ndarray:
    # Descending weight; ties go to the larger index so that tied optima
    # place mass on late coordinates, i.e. the lexicographically smallest
    # optimal vertex vector.
    return np.lexsort((-np.arange(w.size), -w))


class BudgetPolytope(FeasibleRegion):
    """{x >= 0 : sum x <= budget, x_i <= cap_i}; down-closed."""

    down_closed = True

    def __init__(self, n: int, budget: float, cap=None):
        if budget < 0:
            raise ValueError("budget must be nonnegative")
        self.n = n
        self.budget = float(budget)
        cap = budget if cap is None else cap
        self.cap = np.broadcast_to(np.asarray(cap, dtype=float), (n,)).copy()
        if np.any(self.cap < 0):
            raise ValueError("per-coordinate caps must be nonnegative")

    def linear_maximize(self, w) -> np.ndarray:
        w = self._check_dim(w)
        x = np.zeros(self.n)
        remaining = self.budget
        for i in _desc_order(w):
            if w[i] <= 0.0 or remaining <= 0.0:
                break  # down-closed: nonpositive weights take zero
            take = min(self.cap[i], remaining)
            x[i] = take
            remaining -= take
        return x

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        x = self._check_dim(x)
        return bool(
            np.all(x >= -tol)
            and np.all(x <= self.cap + tol)
            and x.sum() <= self.budget + tol
        )

    def diameter(self) -> float:
        caps = np.minimum(self.cap, self.budget)
        if self.budget == 0.0 or np.all(caps == 0.0):
            return 0.0  # the region is the single point {0}
        if np.all(caps == caps[0]):
            c = float(caps[0])
            # Farthest pair has disjoint supports; maximize over the split of
            # coordinates between the two endpoints.
            best = max(self._fill_sq(m1, c) + self._fill_sq(self.n - m1, c)
                       for m1 in range(self.n + 1))
            return float(np.sqrt(best))
        if self.n <= 12:
            return float(np.sqrt(self._diameter_sq_bruteforce(caps)))
        raise ValueError(
            "exact diameter for heterogeneous caps is only computed for n <= 12"
        )

    def _fill_sq(self, m: int, c: float) -> float:
        # Max sum of squares spendable on m equal-cap coordinates.
        if m == 0:
            return 0.0
        full = min(m, int(self.budget // c))
        rem = min(c, self.budget - full * c) if full < m else 0.0
        return full * c * c + rem * rem

    def _diameter_sq_bruteforce(self, caps) -> float:
        def fill_sq(idx):
            best = 0.0
            remaining = self.budget
            for c in sorted((caps[i] for i in idx), reverse=True):
                take = min(c, remaining)
                best += take * take
                remaining -= take
                if remaining <= 0:
                    break
            return best

        best = 0.0
        for assign in itertools.product((0, 1, 2), repeat=self.n):
            a = [i for i, g in enumerate(assign) if g == 1]
            b = [i for i, g in enumerate(assign) if g == 2]
            best = max(best, fill_sq(a) + fill_sq(b))
        return best

    def enumerate_vertices(self) -> list[np.ndarray]:
        if self.n > 12:
            raise NotImplementedError("vertex enumeration limited to n <= 12")
        verts = {}
        for full in itertools.chain.from_iterable(
            itertools.combinations(range(self.n), r) for r in range(self.n + 1)
        ):
            used = sum(self.cap[i] for i in full)
            if used > self.budget + 1e-12:
                continue
            base = np.zeros(self.n)
            for i in full:
                base[i] = self.cap[i]
            verts[tuple(base)] = base
            rem = self.budget - used
            if rem > 1e-12:
                for j in range(self.n):
                    if j in full or rem >= self.cap[j]:
                        continue
                    v = base.copy()
                    v[j] = rem
                    verts[tuple(v)] = v
        return [verts[k] for k in sorted(verts)]


class Matroid(ABC):
    """Independence oracle; subsets are boolean masks or index iterables."""

    ground_size: int
    rank: int

    @abstractmethod
    def is_independent(self, subset) -> bool:
        ...

    def _as_set(self, subset) -> frozenset:
        if isinstance(subset, (set, frozenset)):
            return frozenset(subset)
        arr = np.asarray(subset)
        if arr.dtype == bool:
            return frozenset(np.nonzero(arr)[0].tolist())
        return frozenset(int(i) for i in arr)

    def is_base(self, subset) -> bool:
        s = self._as_set(subset)
        return len(s) == self.rank and self.is_independent(s)

    def bases(self) -> list[frozenset]:
        if self.ground_size > 16:
            raise NotImplementedError("base enumeration limited to n <= 16")
        return [
            frozenset(c)
            for c in itertools.combinations(range(self.ground_size), self.rank)
            if self.is_independent(frozenset(c))
        ]


class UniformMatroid(Matroid):
    def __init__(self, n: int, k: int):
        if not 1 <= k <= n:
            raise ValueError("rank must satisfy 1 <= k <= n")
        self.ground_size = n
        self.rank = k

    def is_independent(self, subset) -> bool:
        return len(self._as_set(subset)) <= self.rank


class PartitionMatroid(Matroid):
    """Independent sets take at most cap_j elements from block j."""

    def __init__(self, blocks: list[tuple[list[int], int]]):
        seen: set[int] = set()
        for verts, cap in blocks:
            if cap < 0:
                raise ValueError("block capacity must be nonnegative")
            if seen.intersection(verts):
                raise ValueError("blocks must be disjoint")
            seen.update(verts)
        if seen != set(range(len(seen))):
            raise ValueError("blocks must cover 0..n-1 densely")
        self.blocks = [(list(v), int(c)) for v, c in blocks]
        self.ground_size = len(seen)
        self.rank = sum(min(c, len(v)) for v, c in self.blocks)
        self._block_of = np.empty(self.ground_size, dtype=int)
        for j, (verts, _) in enumerate(self.blocks):
            self._block_of[verts] = j

    def is_independent(self, subset) -> bool:
        counts = [0] * len(self.blocks)
        for i in self._as_set(subset):
            counts[self._block_of[i]] += 1
        return all(c <= min(cap, len(v)) for c, (v, cap) in zip(counts, self.blocks))


def parse_partition_spec(spec: str) -> PartitionMatroid:
    """Parse 'v,v,v:cap;v,v:cap' block descriptions from a config value."""
    blocks = []
    for chunk in spec.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            verts_part, cap_part = chunk.rsplit(":", 1)
            verts = [int(t) for t in verts_part.split(",") if t.strip()]
            blocks.append((verts, int(cap_part)))
        except ValueError as exc:
            raise ValueError(f"malformed partition block {chunk!r}") from exc
    return PartitionMatroid(blocks)


@dataclass
class MatroidBasePolytope(FeasibleRegion):
    """Convex hull of the matroid's bases; vertices are base indicators."""

    matroid: Matroid
    down_closed = False

    def __post_init__(self):
        self.n = self.matroid.ground_size
        self.integral_rank = self.matroid.rank

    def linear_maximize(self, w) -> np.ndarray:
        w = self._check_dim(w)
        chosen: set[int] = set()
        for i in _desc_order(w):
            # The output must be a base, so negative weights still enter.
            if self.matroid.is_independent(chosen | {int(i)}):
                chosen.add(int(i))
                if len(chosen) == self.matroid.rank:
                    break
        if len(chosen) != self.matroid.rank:
            raise RuntimeError("matroid oracle failed to extend to a base")
        x = np.zeros(self.n)
        x[sorted(chosen)] = 1.0
        return x

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        x = self._check_dim(x)
        if np.any(x < -tol) or np.any(x > 1 + tol):
            return False
        if abs(x.sum() - self.matroid.rank) > tol * max(1, self.n):
            return False
        m = self.matroid
        if isinstance(m, UniformMatroid):
            return True
        if isinstance(m, PartitionMatroid):
            return all(
                abs(x[verts].sum() - min(cap, len(verts))) <= tol * max(1, len(verts))
                for verts, cap in m.blocks
            )
        if self.n > 16:
            raise NotImplementedError("generic membership limited to n <= 16")
        for r in range(1, self.n):
            for sub in itertools.combinations(range(self.n), r):
                if x[list(sub)].sum() > self._rank_of(sub) + tol * max(1, r):
                    return False
        return True

    def _rank_of(self, subset) -> int:
        grown: set[int] = set()
        for i in subset:
            if self.matroid.is_independent(grown | {i}):
                grown.add(i)
        return len(grown)

    def diameter(self) -> float:
        # Two bases differ in at most 2k coordinates, each by 1.
        return float(np.sqrt(2 * self.matroid.rank))

    def enumerate_vertices(self) -> list[np.ndarray]:
        verts = []
        for b in self.matroid.bases():
            x = np.zeros(self.n)
            x[sorted(b)] = 1.0
            verts.append(x)
        return sorted(verts, key=tuple)


class ProductRegion(FeasibleRegion):
    """r independent copies of a base region, stacked into R^{r*n}."""

    def __init__(self, base: FeasibleRegion, copies: int):
        if copies < 1:
            raise ValueError("need at least one copy")
        self.base = base
        self.copies = copies
        self.n = base.n * copies
        self.down_closed = base.down_closed
        if base.integral_rank is not None:
            self.integral_rank = base.integral_rank * copies

    def _chunks(self, x):
        x = self._check_dim(x)
        return [x[i * self.base.n:(i + 1) * self.base.n] for i in range(self.copies)]

    def linear_maximize(self, w) -> np.ndarray:
        return np.concatenate([self.base.linear_maximize(c) for c in self._chunks(w)])

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        return all(self.base.contains(c, tol) for c in self._chunks(x))

    def diameter(self) -> float:
        return float(np.sqrt(self.copies) * self.base.diameter())
