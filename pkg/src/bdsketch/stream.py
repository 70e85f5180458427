"""Bounded-deletion streams: representation, generators, and the text file format.

A stream is stored column-wise as ``items`` (uint64) and ``signs`` (+1 insert,
-1 delete). All randomness comes from a Philox counter-based generator keyed by
the stream seed, so every generator is a pure function of its arguments.

File format::

    # universe_bits=16 alpha=2.0 seed=42 gen=zipf:s=1.0
    I 17
    D 17
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import IO, Iterator, NamedTuple

import numpy as np
from scipy import stats

from .errors import ParameterError, StreamParseError

UINT64_MAX = (1 << 64) - 1


def make_rng(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Counter-based generator; ``stream_id`` gives independent substreams per seed."""
    if not 0 <= seed <= UINT64_MAX:
        raise ParameterError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.Philox(key=[seed, stream_id]))


class OpKind(enum.Enum):
    INSERT = "I"
    DELETE = "D"


class StreamOp(NamedTuple):
    kind: OpKind
    item: int


class DeletePattern(enum.Enum):
    SHUFFLED_UNIFORM = "shuffled"
    TARGETED_LEAST_FREQUENT = "targeted"


class DeleteOrder(enum.Enum):
    DELETES_AFTER_INSERTS = "after"
    INTERLEAVED = "interleaved"


@dataclass
class Stream:
    items: np.ndarray
    signs: np.ndarray
    universe_bits: int
    alpha_declared: float = 1.0
    seed: int = 0
    descriptor: str = "custom"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        self.items = np.ascontiguousarray(self.items, dtype=np.uint64)
        self.signs = np.ascontiguousarray(self.signs, dtype=np.int8)
        if self.items.shape != self.signs.shape:
            raise ParameterError("items and signs differ in length")
        if any(c.isspace() for c in self.descriptor):
            raise ParameterError("descriptor must not contain whitespace")

    def __len__(self) -> int:
        return int(self.items.shape[0])

    def __iter__(self) -> Iterator[StreamOp]:
        for item, sign in zip(self.items.tolist(), self.signs.tolist()):
            yield StreamOp(OpKind.INSERT if sign > 0 else OpKind.DELETE, item)

    @property
    def inserts(self) -> int:
        return int(np.count_nonzero(self.signs > 0))

    @property
    def deletes(self) -> int:
        return len(self) - self.inserts

    @property
    def alpha(self) -> float:
        """Observed ``I / (I - D)``; infinite if everything was deleted."""
        i, d = self.inserts, self.deletes
        return math.inf if i == d else i / (i - d)

    def inserted_items(self) -> np.ndarray:
        """Distinct items that appear in at least one insertion, sorted."""
        return np.unique(self.items[self.signs > 0])

    @classmethod
    def from_ops(cls, ops, universe_bits: int = 64, **kwargs) -> "Stream":
        """Build from ``(item, +1/-1)`` pairs or :class:`StreamOp` values."""
        items, signs = [], []
        for op in ops:
            if isinstance(op, StreamOp):
                items.append(op.item)
                signs.append(1 if op.kind is OpKind.INSERT else -1)
            else:
                item, sign = op
                items.append(item)
                signs.append(1 if sign > 0 else -1)
        stream = cls(np.array(items, dtype=np.uint64), np.array(signs, dtype=np.int8),
                     universe_bits, **kwargs)
        if "alpha_declared" not in kwargs:
            stream.alpha_declared = stream.alpha
        return stream


# -- insertion generators ------------------------------------------------------


def _check_universe(universe_bits: int) -> int:
    if not 1 <= universe_bits <= 64:
        raise ParameterError(f"universe_bits must be in [1, 64], got {universe_bits}")
    return 1 << universe_bits


def zipf_mass(universe_bits: int, s: float) -> np.ndarray:
    """Normalised Zipf(s) probabilities for ranks 1..U (entry r-1 is rank r)."""
    size = _check_universe(universe_bits)
    if size > 1 << 26:
        raise ParameterError("zipf generator materialises the CDF; universe_bits <= 26")
    ranks = np.arange(1, size + 1, dtype=np.float64)
    weights = ranks ** (-float(s))
    return weights / weights.sum()


def gen_zipf(
    universe_bits: int,
    s: float,
    num_inserts: int,
    seed: int,
    *,
    permute_seed: int | None = None,
) -> np.ndarray:
    """I.i.d. Zipf(s) samples by inverse CDF; rank r becomes item id r-1.

    ``permute_seed`` scrambles the rank -> id mapping with a seeded permutation.
    """
    if num_inserts < 1:
        raise ParameterError("num_inserts must be >= 1")
    if s < 0:
        raise ParameterError("zipf exponent must be >= 0")
    cdf = np.cumsum(zipf_mass(universe_bits, s))
    cdf[-1] = 1.0
    u = make_rng(seed).random(num_inserts)
    ranks0 = np.searchsorted(cdf, u, side="right")
    np.minimum(ranks0, cdf.shape[0] - 1, out=ranks0)
    if permute_seed is not None:
        perm = make_rng(permute_seed, 1).permutation(cdf.shape[0])
        ranks0 = perm[ranks0]
    return ranks0.astype(np.uint64)


def gen_binomial(universe_bits: int, n: int, p: float, num_inserts: int, seed: int) -> np.ndarray:
    """I.i.d. Binomial(n, p) samples by inversion of the exact CDF."""
    size = _check_universe(universe_bits)
    if not 0 <= n < size:
        raise ParameterError(f"n must lie in [0, 2^universe_bits), got {n}")
    if not 0 <= p <= 1:
        raise ParameterError(f"p must lie in [0, 1], got {p}")
    if num_inserts < 1:
        raise ParameterError("num_inserts must be >= 1")
    cdf = stats.binom.cdf(np.arange(n + 1), n, p)
    cdf[-1] = 1.0
    u = make_rng(seed).random(num_inserts)
    values = np.searchsorted(cdf, u, side="left")
    np.minimum(values, n, out=values)
    return values.astype(np.uint64)


# -- deletions -----------------------------------------------------------------


def apply_deletions(
    inserts: np.ndarray,
    ratio: float,
    pattern: DeletePattern = DeletePattern.SHUFFLED_UNIFORM,
    order: DeleteOrder = DeleteOrder.DELETES_AFTER_INSERTS,
    seed: int = 0,
    *,
    universe_bits: int = 64,
    descriptor: str = "custom",
) -> Stream:
    """Turn ``floor(ratio * I)`` insertion occurrences into deletions.

    Every returned stream is strict: each delete is matched to a distinct, earlier
    insertion of the same item.
    """
    if not 0 <= ratio < 1:
        raise ParameterError(f"delete ratio must lie in [0, 1), got {ratio}")
    inserts = np.ascontiguousarray(inserts, dtype=np.uint64)
    total = inserts.shape[0]
    n_del = int(math.floor(ratio * total))
    rng = make_rng(seed, 2)

    if n_del == 0:
        victims = np.empty(0, dtype=np.int64)
    elif pattern is DeletePattern.SHUFFLED_UNIFORM:
        victims = rng.choice(total, size=n_del, replace=False)
    else:
        victims = _targeted_victims(inserts, n_del)

    if order is DeleteOrder.DELETES_AFTER_INSERTS:
        items = np.concatenate([inserts, inserts[victims]])
        signs = np.concatenate([np.ones(total, np.int8), -np.ones(n_del, np.int8)])
    else:
        # each delete lands after a uniform position at or past its matched insert
        when = victims + (rng.random(n_del) * (total - victims)).astype(np.int64)
        keys = np.concatenate([2 * np.arange(total, dtype=np.int64), 2 * when + 1])
        order_idx = np.argsort(keys, kind="stable")
        items = np.concatenate([inserts, inserts[victims]])[order_idx]
        signs = np.concatenate([np.ones(total, np.int8), -np.ones(n_del, np.int8)])[order_idx]

    return Stream(items, signs, universe_bits, alpha_declared=total / (total - n_del),
                  seed=seed, descriptor=descriptor)


def _targeted_victims(inserts: np.ndarray, n_del: int) -> np.ndarray:
    """Occurrence indices deleted by repeatedly removing the least-frequent live item.

    Ties go to the smaller item id. Once an item is the least frequent it stays so
    until exhausted, so the order is: items by (frequency, id), each fully drained.
    """
    values, inverse, counts = np.unique(inserts, return_inverse=True, return_counts=True)
    rank_order = np.lexsort((values, counts))
    rank_of = np.empty_like(rank_order)
    rank_of[rank_order] = np.arange(rank_order.shape[0])
    occ_order = np.lexsort((np.arange(inserts.shape[0]), rank_of[inverse]))
    return occ_order[:n_del]


# -- lower-bound construction --------------------------------------------------


def adversarial_stream(
    epsilon: float,
    alpha: float,
    *,
    probe_capacity: int | None = None,
    multiplicity: int = 1,
) -> Stream:
    """Stream that defeats any counter-based summary with fewer than alpha/eps counters.

    ``m = alpha/eps`` distinct items are inserted round-robin, each exactly
    ``I/m`` times. A probe SpaceSaving sketch with ``probe_capacity`` counters
    (default ``ceil(alpha / (2 eps))``) then decides the deletions: first the
    occurrences of items it monitors, and if that is not enough to reach
    ``D = (1 - 1/alpha) I``, occurrences of unmonitored items other than a single
    reserved target. Some item the probe does not hold ends with frequency
    ``I/m >= eps * (I - D)``.
    """
    from .spacesaving import SketchPolicy, SpaceSavingSketch

    if not 0 < epsilon <= 1 or alpha < 1:
        raise ParameterError("need 0 < epsilon <= 1 and alpha >= 1")
    m_exact = alpha / epsilon
    m = round(m_exact)
    if m < 1 or abs(m - m_exact) > 1e-9 * max(1.0, m_exact):
        raise ParameterError(f"alpha/epsilon = {m_exact} must be an integer")
    if multiplicity < 1:
        raise ParameterError("multiplicity must be >= 1")
    # smallest per-item count c such that D = I - I/alpha is integral for I = m*c
    a = Fraction(alpha).limit_denominator(10**6)
    per_item = 1
    while (Fraction(m * per_item) / a).denominator != 1:
        per_item += 1
    per_item *= multiplicity
    total = m * per_item
    n_del = total - int(Fraction(total) / a)

    if probe_capacity is None:
        probe_capacity = max(1, math.ceil(round(alpha / (2 * epsilon), 9)))
    inserts = np.tile(np.arange(m, dtype=np.uint64), per_item)
    probe = SpaceSavingSketch(probe_capacity, SketchPolicy.INSERT_ONLY)
    for x in inserts.tolist():
        probe.insert(x)
    monitored = sorted(e.item for e in probe.entries())
    missing = [x for x in range(m) if x not in set(monitored)]

    remaining = dict.fromkeys(range(m), per_item)
    deletes: list[int] = []
    for x in monitored:
        take = min(per_item, n_del - len(deletes))
        deletes.extend([x] * take)
        remaining[x] -= take
    for x in missing[1:]:
        if len(deletes) >= n_del:
            break
        take = min(per_item, n_del - len(deletes))
        deletes.extend([x] * take)
        remaining[x] -= take
    if len(deletes) < n_del:
        raise ParameterError("probe capacity leaves too little mass to delete")

    items = np.concatenate([inserts, np.array(deletes, dtype=np.uint64)])
    signs = np.concatenate([np.ones(total, np.int8), -np.ones(n_del, np.int8)])
    bits = max(1, (m - 1).bit_length())
    stream = Stream(items, signs, bits, alpha_declared=float(alpha), seed=0,
                    descriptor=f"adversary:eps={epsilon},alpha={alpha},probe={probe_capacity}")
    stream.meta.update(distinct=m, per_item=per_item, probe_capacity=probe_capacity,
                       probe_missing=missing)
    return stream


# -- generator front end -------------------------------------------------------


def generate(
    dist: str,
    *,
    universe_bits: int = 16,
    num_inserts: int = 100_000,
    ratio: float = 0.0,
    pattern: DeletePattern | str = DeletePattern.SHUFFLED_UNIFORM,
    order: DeleteOrder | str = DeleteOrder.DELETES_AFTER_INSERTS,
    seed: int = 0,
    s: float = 1.0,
    n: int = 100,
    p: float = 0.5,
) -> Stream:
    """One-call stream construction used by the harness and the CLI."""
    pattern = DeletePattern(pattern)
    order = DeleteOrder(order)
    if dist == "zipf":
        inserts = gen_zipf(universe_bits, s, num_inserts, seed)
        params = f"zipf:s={s}"
    elif dist == "binomial":
        inserts = gen_binomial(universe_bits, n, p, num_inserts, seed)
        params = f"binomial:n={n},p={p}"
    else:
        raise ParameterError(f"unknown distribution {dist!r}")
    descriptor = f"{params},I={num_inserts},ratio={ratio},pattern={pattern.value},order={order.value}"
    return apply_deletions(inserts, ratio, pattern, order, seed,
                           universe_bits=universe_bits, descriptor=descriptor)


# -- file format ---------------------------------------------------------------


def format_header(stream: Stream) -> str:
    return (f"# universe_bits={stream.universe_bits} alpha={stream.alpha_declared!r} "
            f"seed={stream.seed} gen={stream.descriptor}\n")


def stream_write(stream: Stream, sink: IO[str]) -> None:
    sink.write(format_header(stream))
    codes = np.where(stream.signs > 0, "I", "D")
    body = "\n".join(f"{c} {x}" for c, x in zip(codes.tolist(), stream.items.tolist()))
    if body:
        sink.write(body + "\n")


def stream_dumps(stream: Stream) -> str:
    buf = io.StringIO()
    stream_write(stream, buf)
    return buf.getvalue()


def save_stream(stream: Stream, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        stream_write(stream, fh)


def _parse_header(line: str) -> dict[str, str]:
    if not line.startswith("#"):
        raise StreamParseError("missing '# ...' header", 1)
    fields: dict[str, str] = {}
    for token in line[1:].split():
        key, sep, value = token.partition("=")
        if not sep:
            raise StreamParseError(f"bad header token {token!r}", 1)
        fields[key] = value
    for key in ("universe_bits", "alpha", "seed"):
        if key not in fields:
            raise StreamParseError(f"header lacks {key}=", 1)
    return fields


def stream_read(source: IO[str]) -> Stream:
    """Parse the text format; errors carry 1-based line numbers."""
    header_line = source.readline()
    if not header_line:
        raise StreamParseError("empty stream file", 1)
    fields = _parse_header(header_line.rstrip("\n"))
    try:
        universe_bits = int(fields["universe_bits"])
        alpha = float(fields["alpha"])
        seed = int(fields["seed"])
    except ValueError as exc:
        raise StreamParseError(f"bad header value: {exc}", 1) from None

    items: list[int] = []
    signs: list[int] = []
    for lineno, line in enumerate(source, 2):
        line = line.rstrip("\n")
        code, sep, value = line.partition(" ")
        if code == "I":
            sign = 1
        elif code == "D":
            sign = -1
        else:
            raise StreamParseError(f"unknown op code {code!r}", lineno)
        if not sep or not value.isdigit():
            raise StreamParseError(f"malformed item in {line!r}", lineno)
        item = int(value)
        if item > UINT64_MAX:
            raise StreamParseError(f"item {item} exceeds 64 bits", lineno)
        items.append(item)
        signs.append(sign)
    return Stream(np.array(items, dtype=np.uint64), np.array(signs, dtype=np.int8),
                  universe_bits, alpha_declared=alpha, seed=seed, descriptor=fields.get("gen", "custom"))


def stream_loads(text: str) -> Stream:
    return stream_read(io.StringIO(text))


def load_stream(path) -> Stream:
    with open(path, encoding="utf-8", newline="\n") as fh:
        return stream_read(fh)
