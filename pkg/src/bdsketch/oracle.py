"""Exact frequency bookkeeping used as ground truth for every accuracy check."""

from __future__ import annotations

from collections import Counter

import numpy as np

from .errors import ModelViolationError
from .stream import OpKind, Stream, StreamOp


class ExactCounter:
    """Frequency vector F of a strict stream.

    Deleting an item whose frequency is already zero raises
    :class:`ModelViolationError`.
    """

    def __init__(self) -> None:
        self.counts: Counter[int] = Counter()
        self.inserted = 0
        self.deleted = 0

    @classmethod
    def from_stream(cls, stream: Stream) -> "ExactCounter":
        oracle = cls()
        oracle.apply_stream(stream)
        return oracle

    def apply(self, op: StreamOp) -> None:
        if op.kind is OpKind.INSERT:
            self.insert(op.item)
        else:
            self.delete(op.item)

    def insert(self, item: int) -> None:
        self.counts[item] += 1
        self.inserted += 1

    def delete(self, item: int) -> None:
        if self.counts.get(item, 0) <= 0:
            raise ModelViolationError(f"delete of item {item} with zero frequency")
        self.counts[item] -= 1
        if self.counts[item] == 0:
            del self.counts[item]
        self.deleted += 1

    def apply_stream(self, stream: Stream) -> None:
        """Vectorised replay that still rejects the first non-strict delete.

        A rejected stream leaves the oracle untouched. The error's ``position``
        is the 0-based op index; in a stream file that op sits on line position+2.
        """
        items, signs = stream.items, stream.signs.astype(np.int64)
        if items.shape[0] == 0:
            return
        order = np.argsort(items, kind="stable")
        s_items = items[order]
        s_signs = signs[order]
        running = np.cumsum(s_signs)
        starts = np.flatnonzero(np.r_[True, s_items[1:] != s_items[:-1]])
        group_len = np.diff(np.r_[starts, s_items.shape[0]])
        base = np.repeat(running[starts] - s_signs[starts], group_len)
        # include prior state for items already seen by this oracle
        prior = np.array([self.counts.get(int(x), 0) for x in s_items[starts].tolist()], dtype=np.int64)
        level = running - base + np.repeat(prior, group_len)
        bad = np.flatnonzero(level < 0)
        if bad.size:
            position = int(order[bad].min())
            raise ModelViolationError(
                f"op {position}: delete of item {int(items[position])} with zero frequency",
                position=position,
            )
        finals = level[np.r_[starts[1:] - 1, s_items.shape[0] - 1]]
        for item, value in zip(s_items[starts].tolist(), finals.tolist()):
            if value:
                self.counts[item] = value
            else:
                self.counts.pop(item, None)
        n_ins = int(np.count_nonzero(signs > 0))
        self.inserted += n_ins
        self.deleted += items.shape[0] - n_ins

    def freq(self, item: int) -> int:
        return self.counts.get(item, 0)

    def f1(self) -> int:
        """|F|_1 = I - D."""
        return self.inserted - self.deleted

    def frequent_items(self, phi: float) -> set[int]:
        """Items with ``f >= phi * |F|_1`` (and f > 0)."""
        threshold = phi * self.f1()
        return {x for x, f in self.counts.items() if f > 0 and f >= threshold}

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Sorted distinct live items and their frequencies."""
        if not self.counts:
            return np.empty(0, np.uint64), np.empty(0, np.int64)
        keys = np.array(sorted(self.counts), dtype=np.uint64)
        vals = np.array([self.counts[int(k)] for k in keys.tolist()], dtype=np.int64)
        return keys, vals

    def freqs(self, items) -> np.ndarray:
        keys, vals = self.arrays()
        items = np.asarray(items, dtype=np.uint64)
        if keys.size == 0:
            return np.zeros(items.shape, np.int64)
        idx = np.searchsorted(keys, items)
        idx_c = np.minimum(idx, keys.size - 1)
        hit = keys[idx_c] == items
        return np.where(hit, vals[idx_c], 0)

    def rank_lt(self, xs) -> np.ndarray:
        """True R<(x) = total frequency of items strictly below x."""
        keys, vals = self.arrays()
        cum = np.r_[0, np.cumsum(vals)]
        xs = np.asarray(xs, dtype=np.uint64)
        return cum[np.searchsorted(keys, xs, side="left")]

    def quantile(self, q: float) -> int:
        """Smallest x with R<=(x) >= max(1, ceil(q * |F|_1))."""
        keys, vals = self.arrays()
        if keys.size == 0:
            raise ModelViolationError("quantile of an empty frequency vector")
        target = max(1, int(np.ceil(q * self.f1() - 1e-12)))
        cum = np.cumsum(vals)
        return int(keys[np.searchsorted(cum, target, side="left")])
