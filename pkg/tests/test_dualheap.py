import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdsketch.dualheap import CounterEntry, DualHeapIndex
from bdsketch.errors import EmptySketchError


def _state(index):
    return sorted(index.entries())


def test_replace_min_matches_trace_step():
    index = DualHeapIndex(2)
    index.add(1, 2, 0)
    index.add(3, 1, 0)
    evicted = index.replace_min(2)
    assert evicted == CounterEntry(3, 1, 0)
    assert _state(index) == [(1, 2, 0), (2, 2, 1)]
    assert index.check_invariants() == []


def test_capacity_one_replace():
    index = DualHeapIndex(1)
    index.add(1)
    index.replace_min(2)
    assert _state(index) == [(2, 2, 1)]


def test_roots_on_small_table():
    index = DualHeapIndex(4)
    for item, count, error in [(5, 4, 1), (6, 2, 0), (7, 9, 3), (8, 2, 2)]:
        index.add(item, count, error)
    assert index.min_entry().count == 2
    assert index.max_error_entry() == CounterEntry(7, 9, 3)
    after = index.adjust_max_error(-1, -1)
    assert after == CounterEntry(7, 8, 2)
    assert index.max_error_entry().error == 2
    assert index.check_invariants() == []


def test_empty_and_misuse():
    index = DualHeapIndex(1)
    with pytest.raises(EmptySketchError):
        index.min_entry()
    with pytest.raises(EmptySketchError):
        index.max_error_entry()
    with pytest.raises(EmptySketchError):
        index.replace_min(1)
    index.add(1)
    with pytest.raises(KeyError):
        index.add(1)
    with pytest.raises(OverflowError):
        index.add(2)
    with pytest.raises(KeyError):
        index.replace_min(1)
    with pytest.raises(ValueError):
        DualHeapIndex(0)


def test_positions_point_back_to_item():
    index = DualHeapIndex(8)
    for i in range(8):
        index.add(100 + i, 8 - i, i % 3)
    for i in range(8):
        slot, lo, hi = index.positions(100 + i)
        assert index._min_heap[lo] == slot
        assert index._max_heap[hi] == slot
        assert index._items[slot] == 100 + i


def test_random_adjusts_keep_invariants():
    rng = random.Random(7)
    index = DualHeapIndex(16)
    model = {}
    for i in range(16):
        c, e = rng.randint(0, 20), rng.randint(0, 5)
        index.add(i, c, e)
        model[i] = [c, e]
    for step in range(100_000):
        kind = rng.random()
        if kind < 0.6:
            item = rng.randrange(16)
            dc, de = rng.randint(-3, 3), rng.randint(-2, 2)
            index.adjust(item, dc, de)
            model[item][0] += dc
            model[item][1] += de
        else:
            top = index.max_error_entry()
            index.adjust_max_error(-1, -1)
            model[top.item][0] -= 1
            model[top.item][1] -= 1
        if step % 97 == 0:
            assert index.check_invariants() == []
        assert index.min_entry().count == min(v[0] for v in model.values())
        assert index.max_error_entry().error == max(v[1] for v in model.values())
    assert {e.item: [e.count, e.error] for e in index.entries()} == model


def test_replace_sequence_conserves_mass():
    rng = random.Random(3)
    index = DualHeapIndex(5)
    inserted = 0
    for _ in range(5000):
        x = rng.randrange(40)
        inserted += 1
        if x in index:
            index.adjust(x, 1)
        elif not index.full:
            index.add(x)
        else:
            index.replace_min(x)
    assert sum(e.count for e in index.entries()) == inserted
    assert index.check_invariants() == []


ops = st.lists(
    st.tuples(st.sampled_from(["add", "adjust", "maxerr", "replace"]),
              st.integers(0, 12), st.integers(-3, 3), st.integers(-2, 2)),
    max_size=120,
)


@given(capacity=st.integers(1, 6), program=ops)
@settings(max_examples=300, deadline=None)
def test_matches_list_model(capacity, program):
    index = DualHeapIndex(capacity)
    model: dict[int, list[int]] = {}
    for op, item, dc, de in program:
        if op == "add" and item not in model and len(model) < capacity:
            index.add(item, dc, max(de, 0))
            model[item] = [dc, max(de, 0)]
        elif op == "adjust" and item in model:
            index.adjust(item, dc, de)
            model[item][0] += dc
            model[item][1] += de
        elif op == "maxerr" and model:
            top = index.max_error_entry()
            assert top.error == max(v[1] for v in model.values())
            index.adjust_max_error(dc, de)
            model[top.item][0] += dc
            model[top.item][1] += de
        elif op == "replace" and model and item not in model:
            low = index.min_entry()
            assert low.count == min(v[0] for v in model.values())
            old = index.replace_min(item)
            assert old == low
            del model[old.item]
            model[item] = [old.count + 1, old.count]
        assert index.check_invariants() == []
    assert {e.item: [e.count, e.error] for e in index.entries()} == model
