import math

import numpy as np
import pytest

from bdsketch.errors import ModelViolationError, ParameterError, StreamParseError
from bdsketch.oracle import ExactCounter
from bdsketch.spacesaving import SketchPolicy, SpaceSavingSketch, capacity_for
from bdsketch.stream import (
    DeletePattern,
    Stream,
    adversarial_stream,
    apply_deletions,
    gen_binomial,
    gen_zipf,
    generate,
    load_stream,
    save_stream,
    stream_dumps,
    stream_loads,
    zipf_mass,
)

from conftest import A, B, C, TRACE_OPS, brute_counts


# -- oracle first ----------------------------------------------------------------


def test_oracle_on_trace(trace_stream):
    oracle = ExactCounter.from_stream(trace_stream)
    assert oracle.freq(A) == 3
    assert oracle.freq(B) == oracle.freq(C) == oracle.freq(99) == 0
    assert oracle.f1() == 3
    assert dict(oracle.counts) == brute_counts(*zip(*TRACE_OPS))


def test_empty_oracle():
    oracle = ExactCounter()
    assert oracle.freq(5) == 0 and oracle.f1() == 0
    assert oracle.frequent_items(0.1) == set()
    with pytest.raises(ModelViolationError):
        oracle.quantile(0.5)


def test_oracle_rejects_early_delete():
    oracle = ExactCounter()
    oracle.insert(3)
    with pytest.raises(ModelViolationError):
        oracle.delete(7)
    stream = stream_loads("# universe_bits=4 alpha=1.0 seed=0\nI 3\nD 7\nI 7\n")
    with pytest.raises(ModelViolationError) as info:
        ExactCounter.from_stream(stream)
    assert info.value.position + 2 == 3  # the offending "D 7" line


def test_vectorised_replay_matches_scalar():
    stream = generate("zipf", universe_bits=10, num_inserts=5000, ratio=0.7,
                      order="interleaved", seed=5, s=1.2)
    fast = ExactCounter.from_stream(stream)
    slow = ExactCounter()
    for op in stream:
        slow.apply(op)
    assert fast.counts == slow.counts
    assert (fast.inserted, fast.deleted) == (slow.inserted, slow.deleted)


def test_oracle_quantile_and_ranks():
    oracle = ExactCounter()
    for x in (1, 5, 5):
        oracle.insert(x)
    assert oracle.quantile(0.5) == 5 and oracle.quantile(0.0) == 1
    assert list(oracle.rank_lt([0, 1, 2, 6])) == [0, 0, 1, 3]
    assert oracle.frequent_items(0.5) == {5}


# -- generators -------------------------------------------------------------------


def test_generators_deterministic():
    a = generate("zipf", universe_bits=12, num_inserts=3000, ratio=0.5, seed=9, s=1.3)
    b = generate("zipf", universe_bits=12, num_inserts=3000, ratio=0.5, seed=9, s=1.3)
    assert stream_dumps(a) == stream_dumps(b)
    c = generate("zipf", universe_bits=12, num_inserts=3000, ratio=0.5, seed=10, s=1.3)
    assert stream_dumps(a) != stream_dumps(c)
    assert (gen_binomial(8, 100, 0.5, 500, 3) == gen_binomial(8, 100, 0.5, 500, 3)).all()


def test_zipf_zero_skew_is_uniform():
    xs = gen_zipf(4, 0.0, 160_000, seed=1)
    counts = np.bincount(xs.astype(np.int64), minlength=16)
    assert counts.shape == (16,)
    # each cell ~ Binomial(I, 1/16); allow 4 sigma
    sigma = math.sqrt(160_000 / 16 * (15 / 16))
    assert np.all(np.abs(counts - 10_000) < 4 * sigma)


def test_zipf_top_frequency_matches_mass():
    n = 100_000
    xs = gen_zipf(16, 1.0, n, seed=3)
    p1 = zipf_mass(16, 1.0)[0]
    top = int(np.count_nonzero(xs == 0))
    assert abs(top - n * p1) <= 3 * math.sqrt(n * p1 * (1 - p1))
    assert xs.max() < 2**16


def test_zipf_permutation_moves_ids():
    plain = gen_zipf(10, 1.0, 1000, seed=2)
    moved = gen_zipf(10, 1.0, 1000, seed=2, permute_seed=7)
    assert sorted(np.bincount(plain.astype(np.int64), minlength=1024)) == \
        sorted(np.bincount(moved.astype(np.int64), minlength=1024))
    assert (plain != moved).any()


def test_binomial_moments_and_degenerate():
    n = 100_000
    xs = gen_binomial(8, 100, 0.5, n, seed=4)
    assert abs(xs.mean() - 50) <= 3 * math.sqrt(25 / n)
    assert not gen_binomial(8, 100, 0.0, 1000, seed=4).any()
    with pytest.raises(ParameterError):
        gen_binomial(4, 100, 0.5, 10, 0)


def test_deletion_counts_and_alpha():
    s0 = generate("zipf", num_inserts=1000, ratio=0.0, seed=1)
    assert s0.deletes == 0 and s0.alpha_declared == 1.0
    s1 = generate("zipf", num_inserts=100_000, ratio=0.5, seed=1)
    assert (s1.inserts, s1.deletes) == (100_000, 50_000)
    assert s1.alpha_declared == 2.0
    assert ExactCounter.from_stream(s1).f1() == 50_000
    with pytest.raises(ParameterError):
        generate("zipf", num_inserts=10, ratio=1.0)
    with pytest.raises(ParameterError):
        generate("pareto", num_inserts=10)


@pytest.mark.parametrize("pattern", ["shuffled", "targeted"])
@pytest.mark.parametrize("order", ["after", "interleaved"])
@pytest.mark.parametrize("dist", ["zipf", "binomial"])
def test_every_generated_stream_is_strict(pattern, order, dist):
    stream = generate(dist, universe_bits=10, num_inserts=4000, ratio=0.75,
                      pattern=pattern, order=order, seed=6)
    oracle = ExactCounter.from_stream(stream)
    assert oracle.f1() == 1000
    assert stream.alpha == pytest.approx(stream.alpha_declared)


def test_targeted_drains_rarest_items_first():
    inserts = np.array([7, 7, 7, 3, 3, 9, 1, 1], dtype=np.uint64)
    stream = apply_deletions(inserts, 0.5, pattern=DeletePattern.TARGETED_LEAST_FREQUENT)
    deleted = stream.items[stream.signs < 0].tolist()
    # frequency 1: item 9; frequency 2: items 1 then 3
    assert deleted == [9, 1, 1, 3]


def test_interleaved_keeps_multiset():
    a = generate("zipf", universe_bits=10, num_inserts=3000, ratio=0.5, order="after", seed=2)
    b = generate("zipf", universe_bits=10, num_inserts=3000, ratio=0.5, order="interleaved", seed=2)
    key = lambda s: sorted(zip(s.items.tolist(), s.signs.tolist()))
    assert key(a) == key(b)
    assert (b.signs[: b.inserts] < 0).any()


# -- adversarial construction -------------------------------------------------------


def test_adversary_shape():
    stream = adversarial_stream(0.25, 2.0, multiplicity=3)
    assert stream.meta["distinct"] == 8
    assert stream.inserts == 8 * stream.meta["per_item"]
    assert stream.deletes == stream.inserts // 2
    ExactCounter.from_stream(stream)


def _recall(stream, k, policy):
    sk = SpaceSavingSketch(k, policy)
    sk.extend(stream.items.tolist(), stream.signs.tolist())
    oracle = ExactCounter.from_stream(stream)
    truth = oracle.frequent_items(0.25)
    if policy is SketchPolicy.ACTIVE_DELETE:
        got = {x for x, _ in sk.report_positive()}
    else:
        got = {x for x, _ in sk.report_threshold(0.25)}
    return len(truth & got) / len(truth)


def test_adversary_defeats_small_sketch():
    stream = adversarial_stream(0.25, 2.0)
    full = capacity_for(0.25, 2.0, SketchPolicy.ACTIVE_DELETE)
    assert full == 16
    assert _recall(stream, full, SketchPolicy.ACTIVE_DELETE) == 1.0
    assert _recall(stream, 4, SketchPolicy.ACTIVE_DELETE) < 1.0
    assert _recall(stream, 4, SketchPolicy.LAZY_DELETE) < 1.0


def test_adversary_rejects_fractional_m():
    with pytest.raises(ParameterError):
        adversarial_stream(0.3, 2.0)


# -- file format --------------------------------------------------------------------


def test_file_round_trip(tmp_path):
    stream = generate("binomial", universe_bits=8, num_inserts=2000, ratio=0.25, seed=3)
    path = tmp_path / "s.txt"
    save_stream(stream, path)
    text = path.read_text()
    again = load_stream(path)
    assert stream_dumps(again) == text
    assert (again.items == stream.items).all() and (again.signs == stream.signs).all()
    assert again.alpha_declared == stream.alpha_declared and again.seed == 3


def test_header_without_generator_field():
    stream = stream_loads("# universe_bits=16 alpha=2.0 seed=42\n")
    assert (stream.universe_bits, stream.alpha_declared, stream.seed) == (16, 2.0, 42)
    assert len(stream) == 0


@pytest.mark.parametrize(
    "text, line",
    [
        ("I 1\n", 1),
        ("# universe_bits=4 alpha=1.0\n", 1),
        ("# universe_bits=x alpha=1.0 seed=0\n", 1),
        ("# universe_bits=4 alpha=1.0 seed=0\nI 1\nX 2\n", 3),
        ("# universe_bits=4 alpha=1.0 seed=0\nI -1\n", 2),
        ("# universe_bits=4 alpha=1.0 seed=0\nI\n", 2),
        ("# universe_bits=4 alpha=1.0 seed=0\nD 99999999999999999999999\n", 2),
        ("", 1),
    ],
)
def test_parse_errors_carry_line(text, line):
    with pytest.raises(StreamParseError) as info:
        stream_loads(text)
    assert info.value.lineno == line
    assert f"line {line}" in str(info.value)


def test_descriptor_cannot_hold_whitespace():
    with pytest.raises(ParameterError):
        Stream(np.zeros(1, np.uint64), np.ones(1, np.int8), 4, descriptor="a b")
