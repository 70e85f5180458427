"""Dyadic decomposition: any frequency estimator turned into a rank/quantile sketch.

Level ``h`` (0 <= h < L) summarises the stream mapped through ``x -> x >> h``, so a
node at level h covers the dyadic interval ``[y * 2^h, (y+1) * 2^h)``. A prefix
``[0, x)`` is the disjoint union of the left siblings met while walking x's bits
upward, hence at most L estimator queries per rank.
"""

from __future__ import annotations

import math
from typing import Protocol, Sequence

import numpy as np

from .compiled import CompiledSpaceSaving
from .errors import EmptySketchError, ParameterError
from .linear import LinearKind, LinearSketch, dimensions_for
from .spacesaving import SketchConfig, SketchPolicy


class FrequencyEstimator(Protocol):
    def update_many(self, items, signs=None) -> None: ...
    def query(self, item: int) -> int: ...


def _dense_estimates(level, size: int) -> np.ndarray:
    """Clamped estimates for every node id in ``[0, size)`` of one level."""
    if isinstance(level, LinearSketch):
        return np.maximum(level.dense_query(size), 0)
    out = np.zeros(size, dtype=np.int64)
    ids, counts, _ = level.arrays()
    out[ids.astype(np.int64)] = np.maximum(counts, 0)
    return out


class DyadicSketch:
    def __init__(self, universe_bits: int, levels: Sequence[FrequencyEstimator], name: str = "dyadic"):
        if universe_bits < 1:
            raise ParameterError("universe_bits must be >= 1")
        if len(levels) != universe_bits:
            raise ParameterError(f"need {universe_bits} levels, got {len(levels)}")
        self.universe_bits = universe_bits
        self.levels = list(levels)
        self.name = name
        self.inserted = 0
        self.deleted = 0

    @property
    def universe(self) -> int:
        return 1 << self.universe_bits

    @property
    def total(self) -> int:
        return self.inserted - self.deleted

    # -- updates ----------------------------------------------------------

    def update(self, x: int, w: int) -> None:
        if w not in (1, -1):
            raise ParameterError(f"only unit updates are supported, got weight {w}")
        self.update_many(np.array([x], dtype=np.uint64), np.array([w], dtype=np.int8))

    def insert(self, x: int) -> None:
        self.update(x, 1)

    def delete(self, x: int) -> None:
        self.update(x, -1)

    def update_many(self, items, signs=None) -> None:
        items = np.ascontiguousarray(items, dtype=np.uint64)
        if signs is None:
            signs = np.ones(items.shape[0], dtype=np.int8)
        signs = np.ascontiguousarray(signs, dtype=np.int8)
        if items.size and int(items.max()) >= self.universe:
            raise ParameterError(f"item outside universe [0, 2^{self.universe_bits})")
        for h, level in enumerate(self.levels):
            level.update_many(items >> np.uint64(h), signs)
        n_ins = int(np.count_nonzero(signs > 0))
        self.inserted += n_ins
        self.deleted += items.shape[0] - n_ins

    # -- queries ----------------------------------------------------------

    def _check_point(self, x: int) -> None:
        if not 0 <= x <= self.universe:
            raise ParameterError(f"rank point {x} outside [0, {self.universe}]")

    def rank(self, x: int) -> int:
        """Estimated R<(x): mass of items strictly below x."""
        self._check_point(x)
        if x == self.universe:
            return self.total
        total = 0
        y = x
        for level in self.levels:
            if y & 1:
                total += max(level.query(y - 1), 0)
            y >>= 1
        return total

    def rank_le(self, x: int) -> int:
        """Estimated R<=(x), the 'less than or equal' convention."""
        return self.rank(x + 1)

    def level_tables(self) -> list[np.ndarray]:
        return [_dense_estimates(level, self.universe >> h) for h, level in enumerate(self.levels)]

    def ranks(self, xs=None) -> np.ndarray:
        """Vectorised R<(x) for many points (default: every x in ``[0, U]``)."""
        if xs is None:
            xs = np.arange(self.universe + 1, dtype=np.int64)
        xs = np.asarray(xs, dtype=np.int64)
        if xs.size and (xs.min() < 0 or xs.max() > self.universe):
            raise ParameterError("rank point outside [0, U]")
        out = np.zeros(xs.shape, dtype=np.int64)
        for h, table in enumerate(self.level_tables()):
            y = xs >> h
            odd = (y & 1).astype(bool) & (xs < self.universe)
            out[odd] += table[y[odd] - 1]
        out[xs == self.universe] = self.total
        return out

    def quantile(self, q: float) -> int:
        """Smallest x with R<=(x) >= max(1, ceil(q * (I - D))), by binary search."""
        if not 0 <= q <= 1:
            raise ParameterError(f"q must lie in [0, 1], got {q}")
        if self.total <= 0:
            raise EmptySketchError("quantile of an empty sketch")
        target = max(1, math.ceil(round(q * self.total, 9)))
        lo, hi = 0, self.universe - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if self.rank(mid + 1) >= target:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def counters(self) -> int:
        return sum(_level_counters(level) for level in self.levels)

    def space_bits(self) -> int:
        return sum(level.space_bits() for level in self.levels)


def _level_counters(level) -> int:
    if isinstance(level, LinearSketch):
        return level.counters
    return level.capacity


def dss_capacity(universe_bits: int, epsilon: float, alpha: float) -> int:
    """Per-level SpaceSaving± capacity ceil(2 * alpha * L / eps)."""
    if not 0 < epsilon <= 1 or alpha < 1:
        raise ParameterError("need 0 < epsilon <= 1 and alpha >= 1")
    return math.ceil(round(2 * alpha * universe_bits / epsilon, 9))


def dss_new(
    universe_bits: int,
    epsilon: float,
    alpha: float,
    *,
    capacity: int | None = None,
    strict: bool = True,
) -> DyadicSketch:
    """Dyadic SpaceSaving±; ``capacity`` overrides the guarantee-grade per-level size."""
    if universe_bits < 1:
        raise ParameterError("universe_bits must be >= 1")
    guarantee = dss_capacity(universe_bits, epsilon, alpha)
    k = guarantee if capacity is None else capacity
    config = SketchConfig(k, SketchPolicy.ACTIVE_DELETE, epsilon / universe_bits, alpha)
    levels = [CompiledSpaceSaving.from_config(config, strict=strict) for _ in range(universe_bits)]
    return DyadicSketch(universe_bits, levels, name="dss")


def dcs_new(universe_bits: int, epsilon: float, delta: float, seed: int = 0) -> DyadicSketch:
    """Dyadic Count-Median with accuracy eps/L and failure budget delta/L per level."""
    if universe_bits < 1:
        raise ParameterError("universe_bits must be >= 1")
    level_eps = epsilon / universe_bits
    level_delta = delta / universe_bits
    width, depth = dimensions_for(LinearKind.COUNT_MEDIAN, level_eps, level_delta)
    levels = [
        LinearSketch(LinearKind.COUNT_MEDIAN, width, depth, seed=(seed + 7919 * (h + 1)) % 2**64)
        for h in range(universe_bits)
    ]
    return DyadicSketch(universe_bits, levels, name="dcs")


def dcs_with_cells(universe_bits: int, cells_per_level: int, delta: float, seed: int = 0) -> DyadicSketch:
    """Dyadic Count-Median sized by a per-level cell budget instead of epsilon."""
    level_delta = delta / universe_bits
    levels = [
        LinearSketch.with_cells(LinearKind.COUNT_MEDIAN, cells_per_level, level_delta,
                                seed=(seed + 7919 * (h + 1)) % 2**64)
        for h in range(universe_bits)
    ]
    return DyadicSketch(universe_bits, levels, name="dcs")
