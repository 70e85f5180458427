import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdsketch.dyadic import DyadicSketch, dcs_new, dss_capacity, dss_new
from bdsketch.errors import EmptySketchError, ParameterError
from bdsketch.evaluation import ks_divergence, max_rank_error
from bdsketch.linear import LinearKind, dimensions_for
from bdsketch.oracle import ExactCounter
from bdsketch.stream import generate


def brute_rank(multiset, x):
    return sum(1 for v in multiset if v < x)


def brute_quantile(multiset, q):
    ordered = sorted(multiset)
    target = max(1, -(-int(round(q * len(ordered) * 10**9)) // 10**9))
    return ordered[target - 1]


def exact_dss(bits):
    # one counter per possible node id, so no level ever evicts
    return dss_new(bits, 0.5, 1.0, capacity=1 << bits)


def test_insert_touches_one_node_per_level():
    sk = exact_dss(3)
    sk.insert(5)
    touched = [[(e.item, e.count) for e in level.entries()] for level in sk.levels]
    assert touched == [[(5, 1)], [(2, 1)], [(1, 1)]]
    sk.delete(5)
    assert all(level.sum_counts() == 0 for level in sk.levels)


def test_small_rank_and_quantile():
    sk = exact_dss(3)
    for x in (1, 5, 5):
        sk.insert(x)
    assert sk.rank(0) == 0
    assert sk.rank(6) == 3
    assert sk.rank(5) == 1
    assert sk.rank_le(5) == 3
    assert sk.rank(8) == 3
    assert sk.quantile(0.5) == 5
    assert sk.quantile(0.0) == 1
    assert sk.quantile(1.0) == 5


def test_bad_inputs():
    sk = exact_dss(3)
    with pytest.raises(EmptySketchError):
        sk.quantile(0.5)
    with pytest.raises(ParameterError):
        sk.insert(8)
    with pytest.raises(ParameterError):
        sk.rank(9)
    with pytest.raises(ParameterError):
        sk.quantile(1.5)
    with pytest.raises(ParameterError):
        DyadicSketch(3, sk.levels[:2])


def test_sizing():
    assert dss_capacity(16, 0.1, 2) == 640
    sk = dss_new(16, 0.1, 2)
    assert [level.capacity for level in sk.levels] == [640] * 16
    assert sk.counters() == 16 * 640
    dcs = dcs_new(16, 0.05, 2**-16)
    width, depth = dimensions_for(LinearKind.COUNT_MEDIAN, 0.05 / 16, 2**-20)
    assert all((lv.width, lv.depth) == (width, depth) for lv in dcs.levels)
    assert depth == 21


def test_level_nodes_match_brute_force():
    stream = generate("zipf", universe_bits=8, num_inserts=1000, ratio=0.3, seed=4, s=1.0)
    sk = exact_dss(8)
    sk.update_many(stream.items, stream.signs)
    for h, level in enumerate(sk.levels):
        truth = {}
        for x, s in zip(stream.items.tolist(), stream.signs.tolist()):
            truth[x >> h] = truth.get(x >> h, 0) + s
        got = {e.item: e.count for e in level.entries() if e.count}
        assert got == {k: v for k, v in truth.items() if v}


@given(values=st.lists(st.integers(0, 15), min_size=1, max_size=60), data=st.data())
@settings(max_examples=150, deadline=None)
def test_exact_levels_match_brute_rank(values, data):
    n_del = data.draw(st.integers(0, len(values) - 1))
    deleted = data.draw(st.permutations(values))[:n_del]
    remaining = list(values)
    for x in deleted:
        remaining.remove(x)
    sk = exact_dss(4)
    sk.update_many(np.array(values + deleted, dtype=np.uint64),
                   np.array([1] * len(values) + [-1] * n_del, dtype=np.int8))
    for x in range(17):
        assert sk.rank(x) == brute_rank(remaining, x)
    assert list(sk.ranks()) == [brute_rank(remaining, x) for x in range(17)]
    q = data.draw(st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 0.99, 1.0]))
    assert sk.quantile(q) == brute_quantile(remaining, q)
    oracle = ExactCounter()
    for x in values:
        oracle.insert(x)
    for x in deleted:
        oracle.delete(x)
    assert oracle.quantile(q) == brute_quantile(remaining, q)
    assert ks_divergence(sk, oracle) == 0.0


@pytest.mark.parametrize("builder", ["dss", "dcs"])
def test_rank_error_within_bound(builder):
    eps = 0.05
    stream = generate("zipf", universe_bits=12, num_inserts=20_000, ratio=0.5, seed=8, s=1.0)
    sk = dss_new(12, eps, 2.0) if builder == "dss" else dcs_new(12, eps, 2**-12, seed=8)
    sk.update_many(stream.items, stream.signs)
    oracle = ExactCounter.from_stream(stream)
    assert max_rank_error(sk, oracle) <= eps * oracle.f1()
    assert ks_divergence(sk, oracle) <= eps


def test_uniform_median_near_centre():
    stream = generate("zipf", universe_bits=12, num_inserts=20_000, ratio=0.25, seed=1, s=0.0)
    sk = dss_new(12, 0.05, stream.alpha_declared)
    sk.update_many(stream.items, stream.signs)
    assert abs(sk.quantile(0.5) - 2048) <= 0.05 * 4096


def test_vectorised_ranks_agree_with_scalar():
    stream = generate("binomial", universe_bits=8, num_inserts=5000, ratio=0.4, seed=2)
    for sk in (dss_new(8, 0.2, 2.0, capacity=6), dcs_new(8, 0.2, 0.1, seed=1)):
        sk.update_many(stream.items, stream.signs)
        xs = np.arange(257)
        assert list(sk.ranks(xs)) == [sk.rank(int(x)) for x in xs]
