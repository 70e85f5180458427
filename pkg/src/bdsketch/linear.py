"""Count-Min and Count-Median linear sketches for the turnstile model.

Both hash an item into one cell per row with a seeded vector multiply-shift
family (2-independent on the two 32-bit halves of a 64-bit key). Count-Median
additionally multiplies each update by a per-row +/-1 sign hash.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .errors import ParameterError
from .stream import make_rng

_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_SHIFT63 = np.uint64(63)


class LinearKind(enum.Enum):
    COUNT_MIN = "cm"
    COUNT_MEDIAN = "cmedian"


def _ceil(x: float) -> int:
    return math.ceil(round(x, 9))


def dimensions_for(kind: LinearKind, epsilon: float, delta: float) -> tuple[int, int]:
    """``(width, depth)`` from the standard error/failure-probability constants."""
    if not 0 < epsilon <= 1:
        raise ParameterError(f"epsilon must be in (0, 1], got {epsilon}")
    if not 0 < delta < 1:
        raise ParameterError(f"delta must be in (0, 1), got {delta}")
    if kind is LinearKind.COUNT_MIN:
        return _ceil(math.e / epsilon), max(1, _ceil(math.log(1 / delta)))
    depth = max(1, _ceil(math.log2(1 / delta)))
    if depth % 2 == 0:
        depth += 1
    return _ceil(3 / epsilon), depth


class MultiplyShiftHash:
    """``d`` independent hashes from uint64 keys to 32-bit values."""

    def __init__(self, rows: int, rng: np.random.Generator):
        params = rng.integers(0, 2**64, size=(rows, 3), dtype=np.uint64, endpoint=False)
        self.a_lo = params[:, 0:1]
        self.a_hi = params[:, 1:2]
        self.b = params[:, 2:3]

    def __call__(self, items: np.ndarray) -> np.ndarray:
        """Return a ``(rows, len(items))`` array of hash values in ``[0, 2^32)``."""
        lo = items & _MASK32
        hi = items >> _SHIFT32
        with np.errstate(over="ignore"):
            return (self.a_lo * lo + self.a_hi * hi + self.b) >> _SHIFT32


class LinearSketch:
    def __init__(self, kind: LinearKind | str, width: int, depth: int, seed: int = 0):
        kind = LinearKind(kind)
        if width < 1 or depth < 1:
            raise ParameterError("width and depth must be positive")
        self.kind = kind
        self.width = width
        self.depth = depth
        self.seed = seed
        rng = make_rng(seed, 3)
        self._bucket_hash = MultiplyShiftHash(depth, rng)
        self._sign_hash = MultiplyShiftHash(depth, rng) if kind is LinearKind.COUNT_MEDIAN else None
        self.table = np.zeros((depth, width), dtype=np.int64)
        self._rows = np.arange(depth)[:, None]
        self.inserted = 0
        self.deleted = 0

    @classmethod
    def from_error(cls, kind: LinearKind | str, epsilon: float, delta: float, seed: int = 0) -> "LinearSketch":
        kind = LinearKind(kind)
        width, depth = dimensions_for(kind, epsilon, delta)
        return cls(kind, width, depth, seed)

    @classmethod
    def with_cells(cls, kind: LinearKind | str, cells: int, delta: float, seed: int = 0) -> "LinearSketch":
        """Fit roughly ``cells`` counters: depth from ``delta``, width = cells // depth."""
        kind = LinearKind(kind)
        _, depth = dimensions_for(kind, 1.0, delta)
        depth = min(depth, max(1, cells))
        if kind is LinearKind.COUNT_MEDIAN and depth % 2 == 0:
            depth -= 1
        return cls(kind, max(1, cells // depth), depth, seed)

    @property
    def counters(self) -> int:
        return self.width * self.depth

    def space_bits(self) -> int:
        return self.counters * 64

    @property
    def total(self) -> int:
        return self.inserted - self.deleted

    def _locate(self, items: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
        items = np.ascontiguousarray(items, dtype=np.uint64)
        h = self._bucket_hash(items)
        with np.errstate(over="ignore"):
            cols = ((h * np.uint64(self.width)) >> _SHIFT32).astype(np.int64)
        if self._sign_hash is None:
            return cols, None
        bit = (self._sign_hash(items) >> np.uint64(31)) & np.uint64(1)
        return cols, 1 - 2 * bit.astype(np.int64)

    def update(self, item: int, weight: int) -> None:
        if weight not in (1, -1):
            raise ParameterError(f"only unit updates are supported, got weight {weight}")
        self.update_many(np.array([item], dtype=np.uint64), np.array([weight], dtype=np.int8))

    def insert(self, item: int) -> None:
        self.update(item, 1)

    def delete(self, item: int) -> None:
        self.update(item, -1)

    def update_many(self, items, signs=None) -> None:
        items = np.ascontiguousarray(items, dtype=np.uint64)
        if signs is None:
            weights = np.ones(items.shape[0], dtype=np.int64)
        else:
            weights = np.asarray(signs, dtype=np.int64)
        if items.shape[0] == 0:
            return
        cols, sgn = self._locate(items)
        for r in range(self.depth):
            w = weights if sgn is None else weights * sgn[r]
            # integer weights, so the float accumulation in bincount is exact
            self.table[r] += np.rint(np.bincount(cols[r], weights=w, minlength=self.width)).astype(np.int64)
        n_ins = int(np.count_nonzero(weights > 0))
        self.inserted += n_ins
        self.deleted += items.shape[0] - n_ins

    def query_many(self, items) -> np.ndarray:
        items = np.atleast_1d(np.asarray(items, dtype=np.uint64))
        if items.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        cols, sgn = self._locate(items)
        cells = self.table[self._rows, cols]
        if sgn is None:
            return np.maximum(cells.min(axis=0), 0)
        signed = cells * sgn
        mid = self.depth // 2
        return np.partition(signed, mid, axis=0)[mid]

    def query(self, item: int) -> int:
        return int(self.query_many([item])[0])

    def dense_query(self, size: int) -> np.ndarray:
        """Estimates for every item id in ``[0, size)``."""
        out = np.empty(size, dtype=np.int64)
        step = 1 << 16
        for start in range(0, size, step):
            stop = min(size, start + step)
            out[start:stop] = self.query_many(np.arange(start, stop, dtype=np.uint64))
        return out


def count_min(epsilon: float, delta: float, seed: int = 0) -> LinearSketch:
    return LinearSketch.from_error(LinearKind.COUNT_MIN, epsilon, delta, seed)


def count_median(epsilon: float, delta: float, seed: int = 0) -> LinearSketch:
    return LinearSketch.from_error(LinearKind.COUNT_MEDIAN, epsilon, delta, seed)
