"""Indexed dual heap: a min-heap on counts and a max-heap on errors over one entry table.

Entries live in fixed slots. Both heaps store slot numbers, and each slot records
its current index in either heap, so an item can be located and re-sifted in
O(log k) after any change to its count or error. The item -> slot dictionary
plus the two per-slot index arrays form the position map.
"""

from __future__ import annotations

from typing import Iterator, NamedTuple

from .errors import EmptySketchError


class CounterEntry(NamedTuple):
    """Snapshot of one monitored ``(item, count, error)`` triple."""

    item: int
    count: int
    error: int


class DualHeapIndex:
    """Fixed-capacity entry table ordered two ways at once.

    The root of the min-heap is the entry with the smallest count and the root of
    the max-heap is the entry with the largest error; both are readable in O(1).
    Ties are broken by whatever entry currently sits at the root.
    """

    __slots__ = (
        "capacity",
        "_items",
        "_counts",
        "_errors",
        "_min_heap",
        "_min_pos",
        "_max_heap",
        "_max_pos",
        "_slot",
    )

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.capacity = capacity
        self._items: list[int] = []
        self._counts: list[int] = []
        self._errors: list[int] = []
        self._min_heap: list[int] = []
        self._min_pos: list[int] = []
        self._max_heap: list[int] = []
        self._max_pos: list[int] = []
        self._slot: dict[int, int] = {}

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, item: int) -> bool:
        return item in self._slot

    def __iter__(self) -> Iterator[CounterEntry]:
        return iter(self.entries())

    @property
    def full(self) -> bool:
        return len(self._items) >= self.capacity

    def get(self, item: int) -> CounterEntry | None:
        slot = self._slot.get(item)
        if slot is None:
            return None
        return CounterEntry(item, self._counts[slot], self._errors[slot])

    def count_of(self, item: int) -> int | None:
        slot = self._slot.get(item)
        return None if slot is None else self._counts[slot]

    def positions(self, item: int) -> tuple[int, int, int]:
        """Return ``(slot, min_heap_index, max_heap_index)`` for a monitored item."""
        slot = self._slot[item]
        return slot, self._min_pos[slot], self._max_pos[slot]

    def entries(self) -> list[CounterEntry]:
        return [
            CounterEntry(item, count, error)
            for item, count, error in zip(self._items, self._counts, self._errors)
        ]

    def min_entry(self) -> CounterEntry:
        if not self._items:
            raise EmptySketchError("no monitored entries")
        slot = self._min_heap[0]
        return CounterEntry(self._items[slot], self._counts[slot], self._errors[slot])

    def max_error_entry(self) -> CounterEntry:
        if not self._items:
            raise EmptySketchError("no monitored entries")
        slot = self._max_heap[0]
        return CounterEntry(self._items[slot], self._counts[slot], self._errors[slot])

    # -- mutation ---------------------------------------------------------

    def add(self, item: int, count: int = 1, error: int = 0) -> None:
        """Monitor a new item in the next free slot."""
        if item in self._slot:
            raise KeyError(f"item {item} already monitored")
        if self.full:
            raise OverflowError("index is full")
        slot = len(self._items)
        self._items.append(item)
        self._counts.append(count)
        self._errors.append(error)
        self._slot[item] = slot
        self._min_heap.append(slot)
        self._min_pos.append(slot)
        self._max_heap.append(slot)
        self._max_pos.append(slot)
        self._min_up(slot)
        self._max_up(slot)

    def adjust(self, item: int, count_delta: int, error_delta: int = 0) -> None:
        """Add deltas to an item's count and error, then restore both heaps."""
        slot = self._slot[item]
        self._adjust_slot(slot, count_delta, error_delta)

    def adjust_max_error(self, count_delta: int, error_delta: int) -> CounterEntry:
        """Apply deltas to the max-error root; returns the entry after the change."""
        if not self._items:
            raise EmptySketchError("no monitored entries")
        slot = self._max_heap[0]
        self._adjust_slot(slot, count_delta, error_delta)
        return CounterEntry(self._items[slot], self._counts[slot], self._errors[slot])

    def replace_min(self, new_item: int) -> CounterEntry:
        """Evict the min-count entry in favour of ``new_item``.

        The new entry inherits ``count = minCount + 1`` and ``error = minCount``.
        Returns the evicted entry.
        """
        if new_item in self._slot:
            raise KeyError(f"item {new_item} already monitored; increment it instead")
        if not self._items:
            raise EmptySketchError("no entry to replace")
        slot = self._min_heap[0]
        old = CounterEntry(self._items[slot], self._counts[slot], self._errors[slot])
        del self._slot[old.item]
        self._slot[new_item] = slot
        self._items[slot] = new_item
        self._counts[slot] = old.count + 1
        self._errors[slot] = old.count
        self._min_down(0)
        pos = self._max_pos[slot]
        if old.count > old.error:
            self._max_up(pos)
        elif old.count < old.error:
            self._max_down(pos)
        return old

    def _adjust_slot(self, slot: int, count_delta: int, error_delta: int) -> None:
        self._counts[slot] += count_delta
        self._errors[slot] += error_delta
        if count_delta > 0:
            self._min_down(self._min_pos[slot])
        elif count_delta < 0:
            self._min_up(self._min_pos[slot])
        if error_delta > 0:
            self._max_up(self._max_pos[slot])
        elif error_delta < 0:
            self._max_down(self._max_pos[slot])

    # -- sifting ----------------------------------------------------------

    def _min_up(self, i: int) -> None:
        heap, pos, key = self._min_heap, self._min_pos, self._counts
        slot = heap[i]
        k = key[slot]
        while i > 0:
            parent = (i - 1) >> 1
            ps = heap[parent]
            if k < key[ps]:
                heap[i] = ps
                pos[ps] = i
                i = parent
            else:
                break
        heap[i] = slot
        pos[slot] = i

    def _min_down(self, i: int) -> None:
        heap, pos, key = self._min_heap, self._min_pos, self._counts
        n = len(heap)
        slot = heap[i]
        k = key[slot]
        while True:
            child = 2 * i + 1
            if child >= n:
                break
            right = child + 1
            if right < n and key[heap[right]] < key[heap[child]]:
                child = right
            cs = heap[child]
            if key[cs] < k:
                heap[i] = cs
                pos[cs] = i
                i = child
            else:
                break
        heap[i] = slot
        pos[slot] = i

    def _max_up(self, i: int) -> None:
        heap, pos, key = self._max_heap, self._max_pos, self._errors
        slot = heap[i]
        k = key[slot]
        while i > 0:
            parent = (i - 1) >> 1
            ps = heap[parent]
            if k > key[ps]:
                heap[i] = ps
                pos[ps] = i
                i = parent
            else:
                break
        heap[i] = slot
        pos[slot] = i

    def _max_down(self, i: int) -> None:
        heap, pos, key = self._max_heap, self._max_pos, self._errors
        n = len(heap)
        slot = heap[i]
        k = key[slot]
        while True:
            child = 2 * i + 1
            if child >= n:
                break
            right = child + 1
            if right < n and key[heap[right]] > key[heap[child]]:
                child = right
            cs = heap[child]
            if key[cs] > k:
                heap[i] = cs
                pos[cs] = i
                i = child
            else:
                break
        heap[i] = slot
        pos[slot] = i

    # -- verification -----------------------------------------------------

    def check_invariants(self) -> list[str]:
        """Full O(k) structural audit. Returns a list of problems (empty if sound)."""
        problems: list[str] = []
        n = len(self._items)
        if n > self.capacity:
            problems.append(f"{n} entries exceed capacity {self.capacity}")
        for name, heap, pos in (
            ("min", self._min_heap, self._min_pos),
            ("max", self._max_heap, self._max_pos),
        ):
            if len(heap) != n or len(pos) != n:
                problems.append(f"{name}-heap size mismatch")
                continue
            if sorted(heap) != list(range(n)):
                problems.append(f"{name}-heap is not a permutation of slots")
            for i, slot in enumerate(heap):
                if pos[slot] != i:
                    problems.append(f"{name}-heap position of slot {slot} is stale")
        if len(self._slot) != n:
            problems.append("position dictionary size mismatch")
        for item, slot in self._slot.items():
            if not 0 <= slot < n or self._items[slot] != item:
                problems.append(f"dictionary maps {item} to wrong slot {slot}")
        for i in range(1, n):
            parent = (i - 1) >> 1
            if self._counts[self._min_heap[i]] < self._counts[self._min_heap[parent]]:
                problems.append(f"min-heap order broken at index {i}")
            if self._errors[self._max_heap[i]] > self._errors[self._max_heap[parent]]:
                problems.append(f"max-heap order broken at index {i}")
        return problems
