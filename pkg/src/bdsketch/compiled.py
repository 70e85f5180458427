"""Array-backed SpaceSaving-family sketch driven by the compiled kernels.

Behaves exactly like :class:`~bdsketch.spacesaving.SpaceSavingSketch` (same
tie-breaking, same final state) but processes whole streams in native code.
Used by the dyadic quantile sketch and the experiment harness.
"""

from __future__ import annotations

import numpy as np

from . import _kernels as K
from .dualheap import CounterEntry
from .errors import EmptySketchError, ModelViolationError, ParameterError
from .spacesaving import CounterSketchBase, SketchConfig, SketchPolicy

_POLICY_CODE = {
    SketchPolicy.INSERT_ONLY: K.INSERT_ONLY,
    SketchPolicy.LAZY_DELETE: K.LAZY_DELETE,
    SketchPolicy.ACTIVE_DELETE: K.ACTIVE_DELETE,
}

_I64_MAX = np.iinfo(np.int64).max


class CompiledSpaceSaving(CounterSketchBase):
    def __init__(
        self,
        capacity: int,
        policy: SketchPolicy = SketchPolicy.ACTIVE_DELETE,
        *,
        strict: bool = True,
        config: SketchConfig | None = None,
    ):
        self.config = config if config is not None else SketchConfig(capacity, policy)
        k = self.config.capacity
        self.strict = strict
        self._code = _POLICY_CODE[self.config.policy]
        self._slot_of = K.new_slot_map()
        self._ids = np.zeros(k, dtype=np.uint64)
        self._counts = np.zeros(k, dtype=np.int64)
        self._errors = np.zeros(k, dtype=np.int64)
        self._min_heap = np.zeros(k, dtype=np.int64)
        self._min_pos = np.zeros(k, dtype=np.int64)
        self._max_heap = np.zeros(k, dtype=np.int64)
        self._max_pos = np.zeros(k, dtype=np.int64)
        self._meta = np.zeros(4, dtype=np.int64)
        self._stats = np.array([0, _I64_MAX, _I64_MAX], dtype=np.int64)
        self._one_item = np.zeros(1, dtype=np.uint64)
        self._one_sign = np.zeros(1, dtype=np.int8)

    @classmethod
    def from_config(cls, config: SketchConfig, *, strict: bool = True) -> "CompiledSpaceSaving":
        return cls(config.capacity, config.policy, strict=strict, config=config)

    @classmethod
    def with_guarantee(
        cls, epsilon: float, alpha: float, policy: SketchPolicy, *, strict: bool = True
    ) -> "CompiledSpaceSaving":
        return cls.from_config(SketchConfig.for_guarantee(epsilon, alpha, policy), strict=strict)

    # -- counters ---------------------------------------------------------

    @property
    def size(self) -> int:
        return int(self._meta[K.META_SIZE])

    @property
    def inserted(self) -> int:
        return int(self._meta[K.META_INSERTED])

    @property
    def deleted(self) -> int:
        return int(self._meta[K.META_DELETED])

    @property
    def violations(self) -> int:
        return int(self._meta[K.META_VIOLATIONS])

    @property
    def peak_max_error(self) -> int:
        """Largest max-error observed after any update so far."""
        return int(self._stats[K.STAT_PEAK_MAX_ERROR])

    @property
    def lowest_error(self) -> int | None:
        """Smallest error any entry has held so far (None before the first insert)."""
        v = int(self._stats[K.STAT_MIN_ERROR])
        return None if v == _I64_MAX else v

    @property
    def lowest_count(self) -> int | None:
        v = int(self._stats[K.STAT_MIN_COUNT])
        return None if v == _I64_MAX else v

    def __len__(self) -> int:
        return self.size

    # -- updates ----------------------------------------------------------

    def update_many(self, items, signs=None) -> None:
        """Apply a batch of unit updates; ``signs`` defaults to all inserts."""
        items = np.ascontiguousarray(items, dtype=np.uint64)
        if signs is None:
            signs = np.ones(items.shape[0], dtype=np.int8)
        else:
            signs = np.ascontiguousarray(signs, dtype=np.int8)
            if signs.shape != items.shape:
                raise ParameterError("items and signs must have the same length")
            if self._code == K.INSERT_ONLY and (signs < 0).any():
                raise ParameterError("insert-only sketch does not accept deletes")
        bad = K.run_ops(
            items, signs, self._code, self.strict, self._slot_of,
            self._ids, self._counts, self._errors, self._min_heap, self._min_pos,
            self._max_heap, self._max_pos, self._meta, self._stats,
        )
        if bad >= 0:
            raise ModelViolationError(
                f"delete of item {int(items[bad])} cannot occur in a strict stream", position=int(bad)
            )

    def update_checked(self, items, signs) -> int:
        """Permissive batch update with a full structural audit after each op.

        Returns the number of structural defects observed (0 when sound).
        """
        items = np.ascontiguousarray(items, dtype=np.uint64)
        signs = np.ascontiguousarray(signs, dtype=np.int8)
        return int(K.run_ops_checked(
            items, signs, self._code, self._slot_of,
            self._ids, self._counts, self._errors, self._min_heap, self._min_pos,
            self._max_heap, self._max_pos, self._meta, self._stats,
        ))

    def insert(self, item: int) -> None:
        self._one_item[0] = item
        self._one_sign[0] = 1
        self.update_many(self._one_item, self._one_sign)

    def delete(self, item: int) -> None:
        if self._code == K.INSERT_ONLY:
            raise ParameterError("insert-only sketch does not accept deletes")
        self._one_item[0] = item
        self._one_sign[0] = -1
        self.update_many(self._one_item, self._one_sign)

    # -- reads ------------------------------------------------------------

    def _raw_count(self, item: int) -> int | None:
        slot = self._slot_of.get(np.uint64(item), -1)
        return None if slot < 0 else int(self._counts[slot])

    def raw_entry(self, item: int) -> CounterEntry | None:
        slot = self._slot_of.get(np.uint64(item), -1)
        if slot < 0:
            return None
        return CounterEntry(int(self._ids[slot]), int(self._counts[slot]), int(self._errors[slot]))

    def entries(self) -> list[CounterEntry]:
        n = self.size
        return [
            CounterEntry(int(i), int(c), int(e))
            for i, c, e in zip(self._ids[:n], self._counts[:n], self._errors[:n])
        ]

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Copies of the live ``(ids, counts, errors)`` columns."""
        n = self.size
        return self._ids[:n].copy(), self._counts[:n].copy(), self._errors[:n].copy()

    def sum_counts(self) -> int:
        return int(self._counts[: self.size].sum())

    def sum_errors(self) -> int:
        return int(self._errors[: self.size].sum())

    def min_count(self) -> int:
        if self.size == 0:
            raise EmptySketchError("no monitored entries")
        return int(self._counts[self._min_heap[0]])

    def max_error(self) -> int:
        if self.size == 0:
            raise EmptySketchError("no monitored entries")
        return int(self._errors[self._max_heap[0]])

    def check_structure(self) -> int:
        return int(K.check_structure(
            self._slot_of, self._ids, self._counts, self._errors, self._min_heap,
            self._min_pos, self._max_heap, self._max_pos, self.size,
        ))
