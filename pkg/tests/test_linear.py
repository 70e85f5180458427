import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdsketch.errors import ParameterError
from bdsketch.linear import LinearKind, LinearSketch, count_median, count_min, dimensions_for
from bdsketch.oracle import ExactCounter
from bdsketch.stream import generate

CM = LinearKind.COUNT_MIN
CMED = LinearKind.COUNT_MEDIAN


def test_dimensions():
    assert dimensions_for(CM, 0.01, 2**-16) == (272, 12)
    assert dimensions_for(CMED, 0.1, 0.5) == (30, 1)
    # even log2(1/delta) is bumped to the next odd depth
    assert dimensions_for(CMED, 0.1, 2**-4) == (30, 5)
    with pytest.raises(ParameterError):
        dimensions_for(CM, 0.0, 0.1)
    with pytest.raises(ParameterError):
        dimensions_for(CM, 0.1, 1.0)


def test_with_cells_fits_budget():
    sk = LinearSketch.with_cells(CMED, 1000, 2**-16, seed=1)
    assert sk.depth % 2 == 1 and sk.counters <= 1000
    cm = LinearSketch.with_cells(CM, 1000, 2**-16)
    assert cm.depth == 12 and cm.width == 83
    tiny = LinearSketch.with_cells(CMED, 4, 2**-16)
    assert tiny.depth == 3 and tiny.width == 1


@pytest.mark.parametrize("kind", [CM, CMED])
def test_empty_sketch(kind):
    sk = LinearSketch.from_error(kind, 0.1, 0.1)
    assert not sk.table.any()
    assert sk.query(12345) == 0
    assert sk.space_bits() == sk.counters * 64


@pytest.mark.parametrize("kind", [CM, CMED])
def test_insert_then_delete_restores_cells(kind):
    sk = LinearSketch.from_error(kind, 0.05, 0.01, seed=3)
    sk.update_many(np.arange(50, dtype=np.uint64))
    before = sk.table.copy()
    sk.insert(777)
    assert (sk.table != before).any()
    sk.delete(777)
    assert (sk.table == before).all()


@pytest.mark.parametrize("kind", [CM, CMED])
def test_single_item_exact(kind):
    sk = LinearSketch.from_error(kind, 0.1, 0.05, seed=9)
    for _ in range(3):
        sk.insert(42)
    assert sk.query(42) == 3


def test_batch_equals_single_updates():
    items = np.array([5, 9, 5, 2**40 + 1, 9, 5], dtype=np.uint64)
    signs = np.array([1, 1, 1, 1, -1, -1], dtype=np.int8)
    for kind in (CM, CMED):
        a = LinearSketch.from_error(kind, 0.2, 0.1, seed=4)
        b = LinearSketch.from_error(kind, 0.2, 0.1, seed=4)
        a.update_many(items, signs)
        for x, s in zip(items.tolist(), signs.tolist()):
            b.update(x, s)
        assert (a.table == b.table).all()
        assert a.total == b.total == 2


def test_unit_weights_only():
    with pytest.raises(ParameterError):
        count_min(0.1, 0.1).update(1, 2)


def test_seed_determinism():
    a, b = count_median(0.05, 0.01, seed=5), count_median(0.05, 0.01, seed=5)
    items = np.arange(1000, dtype=np.uint64)
    a.update_many(items)
    b.update_many(items)
    assert (a.table == b.table).all()
    c = count_median(0.05, 0.01, seed=6)
    c.update_many(items)
    assert (a.table != c.table).any()


@given(inserts=st.lists(st.integers(0, 200), min_size=1, max_size=150), data=st.data())
@settings(max_examples=150, deadline=None)
def test_count_min_never_underestimates(inserts, data):
    n_del = data.draw(st.integers(0, len(inserts)))
    deletes = data.draw(st.permutations(inserts))[:n_del]
    items = np.array(inserts + deletes, dtype=np.uint64)
    signs = np.array([1] * len(inserts) + [-1] * n_del, dtype=np.int8)
    sk = LinearSketch(CM, width=16, depth=3, seed=data.draw(st.integers(0, 2**32)))
    sk.update_many(items, signs)
    oracle = ExactCounter()
    for x, s in zip(items.tolist(), signs.tolist()):
        (oracle.insert if s > 0 else oracle.delete)(x)
    probe = np.arange(201, dtype=np.uint64)
    assert (sk.query_many(probe) >= oracle.freqs(probe)).all()


@pytest.mark.parametrize("kind", [CM, CMED])
def test_error_bound_for_most_items(kind):
    eps, delta = 0.01, 0.05
    stream = generate("zipf", universe_bits=16, num_inserts=50_000, ratio=0.5, seed=2, s=1.0)
    oracle = ExactCounter.from_stream(stream)
    sk = LinearSketch.from_error(kind, eps, delta, seed=2)
    sk.update_many(stream.items, stream.signs)
    probe = np.unique(stream.items)
    err = np.abs(sk.query_many(probe) - oracle.freqs(probe))
    assert np.mean(err <= eps * oracle.f1()) >= 1 - delta
