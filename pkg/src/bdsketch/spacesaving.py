"""SpaceSaving and its bounded-deletion variants.

Three update policies share one counter table:

* ``INSERT_ONLY``  -- classic SpaceSaving; deletes are rejected.
* ``LAZY_DELETE``  -- a delete decrements the item's counter if it is monitored,
  otherwise it is ignored.
* ``ACTIVE_DELETE`` -- SpaceSaving±: a delete of an unmonitored item decrements
  both count and error of the entry with the largest error.

Queries return the (clamped) count of a monitored item and 0 otherwise.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Iterable

from .dualheap import CounterEntry, DualHeapIndex
from .errors import EmptySketchError, ModelViolationError, ParameterError

log = logging.getLogger(__name__)


class SketchPolicy(enum.Enum):
    INSERT_ONLY = "insert-only"
    LAZY_DELETE = "lazy"
    ACTIVE_DELETE = "active"


def _ceil(x: float) -> int:
    # absorb float noise such as 4 / 0.01 == 400.00000000000006
    return math.ceil(round(x, 9))


def capacity_for(epsilon: float, alpha: float, policy: SketchPolicy) -> int:
    """Number of counters under which the policy's error theorem holds.

    ``ceil(1/eps)`` for insert-only, ``ceil(alpha/eps)`` for the lazy policy and
    ``ceil(2*alpha/eps)`` for SpaceSaving±.
    """
    if not 0 < epsilon <= 1:
        raise ParameterError(f"epsilon must be in (0, 1], got {epsilon}")
    if not alpha >= 1:
        raise ParameterError(f"alpha must be >= 1, got {alpha}")
    if policy is SketchPolicy.INSERT_ONLY:
        return _ceil(1 / epsilon)
    if policy is SketchPolicy.LAZY_DELETE:
        return _ceil(alpha / epsilon)
    return _ceil(2 * alpha / epsilon)


@dataclass(frozen=True)
class SketchConfig:
    capacity: int
    policy: SketchPolicy
    epsilon: float | None = None
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ParameterError("capacity must be at least 1")

    @classmethod
    def for_guarantee(cls, epsilon: float, alpha: float, policy: SketchPolicy) -> "SketchConfig":
        if policy is SketchPolicy.INSERT_ONLY:
            alpha = 1.0
        return cls(capacity_for(epsilon, alpha, policy), policy, epsilon, alpha)

    @property
    def guarantee_grade(self) -> bool:
        if self.epsilon is None:
            return False
        return self.capacity >= capacity_for(self.epsilon, self.alpha, self.policy)


class CounterSketchBase:
    """Query and reporting layer shared by the reference and compiled sketches.

    Subclasses provide ``entries()``, ``_raw_count(item)``, ``inserted``,
    ``deleted`` and ``config``.
    """

    config: SketchConfig

    @property
    def capacity(self) -> int:
        return self.config.capacity

    @property
    def policy(self) -> SketchPolicy:
        return self.config.policy

    @property
    def total(self) -> int:
        """I - D, the true l1 mass of the stream seen so far."""
        return self.inserted - self.deleted

    def entries(self) -> list[CounterEntry]:
        raise NotImplementedError

    def _raw_count(self, item: int) -> int | None:
        raise NotImplementedError

    def raw_entry(self, item: int) -> CounterEntry | None:
        count = self._raw_count(item)
        if count is None:
            return None
        for entry in self.entries():
            if entry.item == item:
                return entry
        return None

    def __contains__(self, item: int) -> bool:
        return self._raw_count(item) is not None

    def __len__(self) -> int:
        return len(self.entries())

    def query(self, item: int) -> int:
        count = self._raw_count(item)
        if count is None:
            return 0
        return count if count > 0 else 0

    def update(self, item: int, weight: int) -> None:
        if weight == 1:
            self.insert(item)
        elif weight == -1:
            self.delete(item)
        else:
            raise ParameterError(f"only unit updates are supported, got weight {weight}")

    def report_positive(self) -> set[tuple[int, int]]:
        """Every monitored item whose clamped estimate is above zero."""
        return {(e.item, e.count) for e in self.entries() if e.count > 0}

    def report_threshold(self, phi: float) -> set[tuple[int, int]]:
        """Items with estimate >= phi * (I - D); a non-positive cut-off falls back to > 0."""
        threshold = phi * self.total
        if threshold <= 0:
            return self.report_positive()
        return {(e.item, e.count) for e in self.entries() if e.count >= threshold}

    def sum_counts(self) -> int:
        return sum(e.count for e in self.entries())

    def sum_errors(self) -> int:
        return sum(e.error for e in self.entries())

    def dumps(self) -> str:
        """Line-oriented ``item,count,error`` dump sorted by item id."""
        lines = [f"{e.item},{e.count},{e.error}" for e in sorted(self.entries())]
        return "".join(line + "\n" for line in lines)

    def space_bits(self) -> int:
        # two 64-bit words per entry: count and error (the id is not charged)
        return self.capacity * 2 * 64


class SpaceSavingSketch(CounterSketchBase):
    """Reference SpaceSaving-family sketch backed by :class:`DualHeapIndex`.

    With ``strict=True`` a delete that provably cannot occur in a strict stream
    raises :class:`ModelViolationError`; with ``strict=False`` the delete is
    skipped and tallied in ``violations``.
    """

    def __init__(
        self,
        capacity: int,
        policy: SketchPolicy = SketchPolicy.ACTIVE_DELETE,
        *,
        strict: bool = True,
        config: SketchConfig | None = None,
    ):
        self.config = config if config is not None else SketchConfig(capacity, policy)
        self.index = DualHeapIndex(self.config.capacity)
        self.strict = strict
        self.inserted = 0
        self.deleted = 0
        self.violations = 0
        self._warned_negative = False

    @classmethod
    def from_config(cls, config: SketchConfig, *, strict: bool = True) -> "SpaceSavingSketch":
        return cls(config.capacity, config.policy, strict=strict, config=config)

    @classmethod
    def with_guarantee(
        cls, epsilon: float, alpha: float, policy: SketchPolicy, *, strict: bool = True
    ) -> "SpaceSavingSketch":
        return cls.from_config(SketchConfig.for_guarantee(epsilon, alpha, policy), strict=strict)

    def entries(self) -> list[CounterEntry]:
        return self.index.entries()

    def _raw_count(self, item: int) -> int | None:
        return self.index.count_of(item)

    def raw_entry(self, item: int) -> CounterEntry | None:
        return self.index.get(item)

    def __len__(self) -> int:
        return len(self.index)

    def insert(self, item: int) -> None:
        index = self.index
        self.inserted += 1
        if item in index:
            index.adjust(item, 1, 0)
        elif not index.full:
            index.add(item, 1, 0)
        else:
            index.replace_min(item)

    def delete(self, item: int) -> None:
        policy = self.config.policy
        if policy is SketchPolicy.INSERT_ONLY:
            raise ParameterError("insert-only sketch does not accept deletes")
        index = self.index
        if item in index:
            self.deleted += 1
            index.adjust(item, -1, 0)
            if index.count_of(item) < 0 and not self._warned_negative:
                # possible under strict input, even with all deletes after the inserts
                log.warning("count of monitored item %d went negative", item)
                self._warned_negative = True
            return
        # an unmonitored item in a table that never filled up was never inserted
        if not index.full:
            self._violation(f"delete of never-inserted item {item}")
            return
        if policy is SketchPolicy.LAZY_DELETE:
            self.deleted += 1
            return
        if index.max_error_entry().error <= 0:
            self._violation(f"delete of unmonitored item {item} with no error mass left")
            return
        self.deleted += 1
        index.adjust_max_error(-1, -1)

    def _violation(self, message: str) -> None:
        if self.strict:
            raise ModelViolationError(message)
        self.violations += 1

    def extend(self, items: Iterable[int], signs: Iterable[int] | None = None) -> None:
        if signs is None:
            for item in items:
                self.insert(int(item))
            return
        for item, sign in zip(items, signs):
            if sign > 0:
                self.insert(int(item))
            else:
                self.delete(int(item))

    def min_count(self) -> int:
        return self.index.min_entry().count

    def max_error(self) -> int:
        return self.index.max_error_entry().error

    def check_invariants(self) -> list[str]:
        return self.index.check_invariants()

    @classmethod
    def loads(
        cls, text: str, capacity: int, policy: SketchPolicy, *, inserted: int = 0, deleted: int = 0
    ) -> "SpaceSavingSketch":
        """Rebuild a sketch from :meth:`dumps` output (stream totals are not in the dump)."""
        sketch = cls(capacity, policy)
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                item, count, error = (int(field) for field in line.split(","))
            except ValueError:
                raise ParameterError(f"bad dump line {lineno}: {line!r}") from None
            sketch.index.add(item, count, error)
        sketch.inserted = inserted
        sketch.deleted = deleted
        return sketch


__all__ = [
    "CounterEntry",
    "CounterSketchBase",
    "EmptySketchError",
    "SketchConfig",
    "SketchPolicy",
    "SpaceSavingSketch",
    "capacity_for",
]
