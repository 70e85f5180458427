"""Compiled batch kernels for the SpaceSaving family.

The sift order and tie handling mirror :mod:`bdsketch.dualheap` exactly so that
the compiled and reference sketches end in identical states on any stream.

State layout (all arrays of length ``capacity`` unless noted):

    ids, counts, errors      entry table by slot
    min_heap, min_pos        min-heap of slots on counts and slot -> index
    max_heap, max_pos        max-heap of slots on errors and slot -> index
    meta[4]                  size, inserted, deleted, violations
    stats[3]                 peak max-error, lowest error, lowest count ever seen
"""

from __future__ import annotations

import numpy as np
from numba import njit, types
from numba.typed import Dict

INSERT_ONLY = 0
LAZY_DELETE = 1
ACTIVE_DELETE = 2

META_SIZE = 0
META_INSERTED = 1
META_DELETED = 2
META_VIOLATIONS = 3

STAT_PEAK_MAX_ERROR = 0
STAT_MIN_ERROR = 1
STAT_MIN_COUNT = 2


def new_slot_map():
    return Dict.empty(key_type=types.uint64, value_type=types.int64)


@njit(cache=True, inline="always")
def _min_up(heap, pos, key, i):
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


@njit(cache=True, inline="always")
def _min_down(heap, pos, key, i, n):
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


@njit(cache=True, inline="always")
def _max_up(heap, pos, key, i):
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


@njit(cache=True, inline="always")
def _max_down(heap, pos, key, i, n):
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


@njit(cache=True)
def run_ops(
    items, signs, policy, strict, slot_of,
    ids, counts, errors, min_heap, min_pos, max_heap, max_pos, meta, stats,
):
    """Apply ``items[t]`` with sign ``signs[t]`` for every t.

    Returns -1 on success, or the index of the first op that is a strict-model
    violation when ``strict`` is set (that op and later ones are not applied).
    """
    capacity = ids.shape[0]
    n = meta[META_SIZE]
    for t in range(items.shape[0]):
        item = items[t]
        if signs[t] > 0:
            meta[META_INSERTED] += 1
            if item in slot_of:
                slot = slot_of[item]
                counts[slot] += 1
                _min_down(min_heap, min_pos, counts, min_pos[slot], n)
            elif n < capacity:
                slot = n
                ids[slot] = item
                counts[slot] = 1
                errors[slot] = 0
                if stats[STAT_MIN_ERROR] > 0:
                    stats[STAT_MIN_ERROR] = 0
                slot_of[item] = slot
                min_heap[n] = slot
                max_heap[n] = slot
                n += 1
                meta[META_SIZE] = n
                _min_up(min_heap, min_pos, counts, n - 1)
                _max_up(max_heap, max_pos, errors, n - 1)
            else:
                slot = min_heap[0]
                old_count = counts[slot]
                old_error = errors[slot]
                del slot_of[ids[slot]]
                slot_of[item] = slot
                ids[slot] = item
                counts[slot] = old_count + 1
                errors[slot] = old_count
                if old_count < stats[STAT_MIN_ERROR]:
                    stats[STAT_MIN_ERROR] = old_count
                _min_down(min_heap, min_pos, counts, 0, n)
                if old_count > old_error:
                    _max_up(max_heap, max_pos, errors, max_pos[slot])
                elif old_count < old_error:
                    _max_down(max_heap, max_pos, errors, max_pos[slot], n)
        else:
            if item in slot_of:
                slot = slot_of[item]
                meta[META_DELETED] += 1
                counts[slot] -= 1
                _min_up(min_heap, min_pos, counts, min_pos[slot])
                if counts[slot] < stats[STAT_MIN_COUNT]:
                    stats[STAT_MIN_COUNT] = counts[slot]
            elif n < capacity:
                if strict:
                    meta[META_SIZE] = n
                    return t
                meta[META_VIOLATIONS] += 1
            elif policy == LAZY_DELETE:
                meta[META_DELETED] += 1
            else:
                slot = max_heap[0]
                if errors[slot] <= 0:
                    if strict:
                        meta[META_SIZE] = n
                        return t
                    meta[META_VIOLATIONS] += 1
                    continue
                meta[META_DELETED] += 1
                counts[slot] -= 1
                errors[slot] -= 1
                _max_down(max_heap, max_pos, errors, 0, n)
                _min_up(min_heap, min_pos, counts, min_pos[slot])
                if errors[slot] < stats[STAT_MIN_ERROR]:
                    stats[STAT_MIN_ERROR] = errors[slot]
                if counts[slot] < stats[STAT_MIN_COUNT]:
                    stats[STAT_MIN_COUNT] = counts[slot]
        if n > 0:
            e = errors[max_heap[0]]
            if e > stats[STAT_PEAK_MAX_ERROR]:
                stats[STAT_PEAK_MAX_ERROR] = e
    meta[META_SIZE] = n
    return -1


@njit(cache=True)
def check_structure(slot_of, ids, counts, errors, min_heap, min_pos, max_heap, max_pos, n):
    """Number of structural defects (0 when every invariant holds)."""
    bad = 0
    if len(slot_of) != n:
        bad += 1
    seen_min = np.zeros(n, dtype=np.bool_)
    seen_max = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        s = min_heap[i]
        if s < 0 or s >= n or seen_min[s] or min_pos[s] != i:
            bad += 1
        else:
            seen_min[s] = True
        s = max_heap[i]
        if s < 0 or s >= n or seen_max[s] or max_pos[s] != i:
            bad += 1
        else:
            seen_max[s] = True
    if bad:
        return bad
    for i in range(1, n):
        parent = (i - 1) >> 1
        if counts[min_heap[i]] < counts[min_heap[parent]]:
            bad += 1
        if errors[max_heap[i]] > errors[max_heap[parent]]:
            bad += 1
    for s in range(n):
        if ids[s] not in slot_of or slot_of[ids[s]] != s:
            bad += 1
    return bad


@njit(cache=True)
def run_ops_checked(
    items, signs, policy, slot_of,
    ids, counts, errors, min_heap, min_pos, max_heap, max_pos, meta, stats,
):
    """Permissive ``run_ops`` with a full structural audit after every op.

    Returns the total number of defects found.
    """
    defects = 0
    one_item = np.empty(1, dtype=items.dtype)
    one_sign = np.empty(1, dtype=signs.dtype)
    for t in range(items.shape[0]):
        one_item[0] = items[t]
        one_sign[0] = signs[t]
        run_ops(one_item, one_sign, policy, False, slot_of,
                ids, counts, errors, min_heap, min_pos, max_heap, max_pos, meta, stats)
        defects += check_structure(slot_of, ids, counts, errors, min_heap, min_pos,
                                   max_heap, max_pos, meta[META_SIZE])
    return defects
