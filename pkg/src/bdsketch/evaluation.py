"""Accuracy metrics, experiment runner and update-time benchmark.

An experiment is described by a JSON document::

    {
      "stream": {"dist": "zipf", "s": 1.0, "universe_bits": 16,
                 "num_inserts": 100000, "ratio": 0.5,
                 "pattern": "shuffled", "order": "after"},
      "sketch": {"name": "ssp", "epsilon": 0.01, "alpha": null,
                 "counters": null, "space_bits": null, "delta": null},
      "phi": 0.01, "reps": 5, "seed": 1,
      "eval_set": "inserted", "timing": false
    }

Sketch names: ``ss`` (insert-only SpaceSaving), ``lazy``, ``ssp`` (SpaceSaving±),
``cm``, ``cmedian``, ``dss``, ``dcs``. Leaving ``counters`` and ``space_bits``
unset on a counter sketch makes it guarantee-grade, and then the theorem bounds
are asserted rather than just reported. ``alpha`` defaults to the stream's
``I / (I - D)``; ``delta`` defaults to ``1/U``.
"""

from __future__ import annotations

import copy
import csv
import dataclasses
import io
import json
import math
import statistics
import time
from dataclasses import dataclass
from typing import Any, Iterable

import numpy as np

from .compiled import CompiledSpaceSaving
from .dyadic import DyadicSketch, dcs_new, dcs_with_cells, dss_new
from .errors import GuaranteeViolation, ParameterError
from .linear import LinearKind, LinearSketch
from .oracle import ExactCounter
from .spacesaving import SketchConfig, SketchPolicy, capacity_for
from .stream import Stream, generate

COUNTER_SKETCHES = {
    "ss": SketchPolicy.INSERT_ONLY,
    "lazy": SketchPolicy.LAZY_DELETE,
    "ssp": SketchPolicy.ACTIVE_DELETE,
}
LINEAR_SKETCHES = {"cm": LinearKind.COUNT_MIN, "cmedian": LinearKind.COUNT_MEDIAN}
RANK_SKETCHES = ("dss", "dcs")
SKETCH_NAMES = tuple(COUNTER_SKETCHES) + tuple(LINEAR_SKETCHES) + RANK_SKETCHES

BITS_PER_COUNTER_ENTRY = 128
BITS_PER_CELL = 64


@dataclass
class EvalReport:
    sketch_name: str
    policy: str
    counters: int
    space_bits: int
    epsilon: float | None
    alpha: float
    delete_ratio: float
    mse: float | None
    max_abs_error: int | None
    recall: float | None
    precision: float | None
    ks: float | None
    ns_per_update: float | None
    seed: int
    violations: int
    threshold: float | None = None
    recall_positive: float | None = None
    precision_positive: float | None = None
    eval_set: str = "inserted"
    reps: int = 1

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @staticmethod
    def csv_header() -> str:
        return ",".join(f.name for f in dataclasses.fields(EvalReport))

    def to_csv_row(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="").writerow(
            "" if v is None else v for v in self.to_dict().values()
        )
        return buf.getvalue()


# -- metrics -------------------------------------------------------------------


def mse(estimates, truths) -> float:
    """Mean of squared estimation errors over an evaluation set."""
    est = np.asarray(estimates, dtype=np.float64)
    tru = np.asarray(truths, dtype=np.float64)
    if est.size == 0:
        raise ParameterError("evaluation set is empty")
    return float(np.mean((est - tru) ** 2))


def sketch_mse(sketch, oracle: ExactCounter, eval_set) -> float:
    items = np.asarray(eval_set, dtype=np.uint64)
    if items.size == 0:
        raise ParameterError("evaluation set is empty")
    return mse(estimate_many(sketch, items), oracle.freqs(items))


def recall(reported: Iterable[int], truth: Iterable[int]) -> float | None:
    """TP / (TP + FN); ``None`` when there is nothing to find."""
    truth = set(truth)
    if not truth:
        return None
    return len(truth & set(reported)) / len(truth)


def precision(reported: Iterable[int], truth: Iterable[int]) -> float | None:
    """TP / (TP + FP); ``None`` when nothing was reported."""
    reported = set(reported)
    if not reported:
        return None
    return len(reported & set(truth)) / len(reported)


def ks_grid(universe_bits: int, stream_items=None) -> np.ndarray:
    size = 1 << universe_bits
    if universe_bits <= 16:
        return np.arange(size + 1, dtype=np.int64)
    points = np.linspace(0, size, 4096).astype(np.int64)
    if stream_items is not None:
        points = np.union1d(points, np.asarray(stream_items, dtype=np.int64))
    return points


def ks_divergence(rank_sketch: DyadicSketch, oracle: ExactCounter, grid=None) -> float:
    """max_x |R_est(x) - R_true(x)| / |F|_1 over the grid."""
    f1 = oracle.f1()
    if f1 <= 0:
        raise ParameterError("KS divergence needs |F|_1 > 0")
    if grid is None:
        grid = ks_grid(rank_sketch.universe_bits, oracle.arrays()[0])
    grid = np.asarray(grid, dtype=np.int64)
    est = rank_sketch.ranks(grid)
    true = oracle.rank_lt(grid.astype(np.uint64))
    return float(np.max(np.abs(est - true)) / f1)


def max_rank_error(rank_sketch: DyadicSketch, oracle: ExactCounter, grid=None) -> int:
    if grid is None:
        grid = ks_grid(rank_sketch.universe_bits, oracle.arrays()[0])
    grid = np.asarray(grid, dtype=np.int64)
    return int(np.max(np.abs(rank_sketch.ranks(grid) - oracle.rank_lt(grid.astype(np.uint64)))))


def estimate_many(sketch, items: np.ndarray) -> np.ndarray:
    """Clamped point estimates for an array of items from any frequency sketch."""
    items = np.asarray(items, dtype=np.uint64)
    if isinstance(sketch, LinearSketch):
        return sketch.query_many(items)
    if isinstance(sketch, CompiledSpaceSaving):
        ids, counts, _ = sketch.arrays()
        order = np.argsort(ids)
        ids, counts = ids[order], counts[order]
        if ids.size == 0:
            return np.zeros(items.shape, np.int64)
        idx = np.minimum(np.searchsorted(ids, items), ids.size - 1)
        return np.where(ids[idx] == items, np.maximum(counts[idx], 0), 0)
    return np.array([sketch.query(int(x)) for x in items.tolist()], dtype=np.int64)


# -- experiment runner -------------------------------------------------------------


DEFAULT_STREAM = {
    "dist": "zipf", "s": 1.0, "n": 100, "p": 0.5, "universe_bits": 16,
    "num_inserts": 100_000, "ratio": 0.5, "pattern": "shuffled", "order": "after",
}
DEFAULT_SKETCH = {
    "name": "ssp", "epsilon": 0.01, "alpha": None, "counters": None,
    "space_bits": None, "delta": None,
}
DEFAULT_SPEC = {
    "stream": DEFAULT_STREAM, "sketch": DEFAULT_SKETCH, "phi": None,
    "reps": 5, "seed": 1, "eval_set": "inserted", "timing": False,
}


def normalize_spec(spec: dict) -> dict:
    """Fill defaults and validate an experiment document."""
    unknown = set(spec) - set(DEFAULT_SPEC)
    if unknown:
        raise ParameterError(f"unknown experiment keys: {sorted(unknown)}")
    out = copy.deepcopy(DEFAULT_SPEC)
    out.update({k: v for k, v in spec.items() if k not in ("stream", "sketch")})
    for section, defaults in (("stream", DEFAULT_STREAM), ("sketch", DEFAULT_SKETCH)):
        given = spec.get(section, {}) or {}
        bad = set(given) - set(defaults)
        if bad:
            raise ParameterError(f"unknown {section} keys: {sorted(bad)}")
        out[section] = {**defaults, **given}
    if out["sketch"]["name"] not in SKETCH_NAMES:
        raise ParameterError(f"unknown sketch {out['sketch']['name']!r}")
    if out["reps"] < 1:
        raise ParameterError("reps must be >= 1")
    if out["eval_set"] not in ("inserted", "universe"):
        raise ParameterError("eval_set must be 'inserted' or 'universe'")
    return out


def stream_for(stream_spec: dict, seed: int) -> Stream:
    return generate(
        stream_spec["dist"],
        universe_bits=stream_spec["universe_bits"],
        num_inserts=stream_spec["num_inserts"],
        ratio=stream_spec["ratio"],
        pattern=stream_spec["pattern"],
        order=stream_spec["order"],
        seed=seed,
        s=stream_spec["s"],
        n=stream_spec["n"],
        p=stream_spec["p"],
    )


@dataclass
class BuiltSketch:
    sketch: Any
    name: str
    policy: str
    counters: int
    space_bits: int
    epsilon: float | None
    alpha: float
    guarantee: bool


def build_sketch(sketch_spec: dict, stream: Stream, seed: int) -> BuiltSketch:
    """Instantiate the sketch a spec describes, sized for ``stream``."""
    name = sketch_spec["name"]
    eps = sketch_spec["epsilon"]
    alpha = sketch_spec["alpha"]
    if alpha is None:
        alpha = stream.alpha_declared if math.isfinite(stream.alpha_declared) else stream.alpha
    alpha = float(alpha)
    delta = sketch_spec["delta"]
    if delta is None:
        delta = 1.0 / (1 << stream.universe_bits)
    counters = sketch_spec["counters"]
    space = sketch_spec["space_bits"]

    if name in COUNTER_SKETCHES:
        policy = COUNTER_SKETCHES[name]
        if policy is SketchPolicy.INSERT_ONLY:
            if stream.deletes:
                raise ParameterError("insert-only SpaceSaving cannot process a stream with deletes")
            alpha = 1.0
        if counters is None and space is not None:
            counters = max(1, space // BITS_PER_COUNTER_ENTRY)
        guarantee = counters is None
        if guarantee:
            if eps is None:
                raise ParameterError("counter sketch needs epsilon or an explicit size")
            counters = capacity_for(eps, alpha, policy)
        config = SketchConfig(counters, policy, eps, alpha)
        sketch = CompiledSpaceSaving.from_config(config, strict=False)
        return BuiltSketch(sketch, name, policy.value, counters, sketch.space_bits(), eps, alpha, guarantee)

    if name in LINEAR_SKETCHES:
        kind = LINEAR_SKETCHES[name]
        if counters is None and space is not None:
            counters = max(1, space // BITS_PER_CELL)
        if counters is not None:
            sketch = LinearSketch.with_cells(kind, counters, delta, seed)
        else:
            if eps is None:
                raise ParameterError("linear sketch needs epsilon or an explicit size")
            sketch = LinearSketch.from_error(kind, eps, delta, seed)
        return BuiltSketch(sketch, name, "turnstile", sketch.counters, sketch.space_bits(), eps, alpha, False)

    bits = stream.universe_bits
    if name == "dss":
        if eps is None:
            raise ParameterError("dss needs epsilon")
        per_level = counters
        if per_level is None and space is not None:
            per_level = max(1, space // (BITS_PER_COUNTER_ENTRY * bits))
        sketch = dss_new(bits, eps, alpha, capacity=per_level, strict=False)
        return BuiltSketch(sketch, name, SketchPolicy.ACTIVE_DELETE.value, sketch.counters(),
                           sketch.space_bits(), eps, alpha, per_level is None)
    per_level = counters
    if per_level is None and space is not None:
        per_level = max(1, space // (BITS_PER_CELL * bits))
    if per_level is not None:
        sketch = dcs_with_cells(bits, per_level, delta, seed)
    else:
        if eps is None:
            raise ParameterError("dcs needs epsilon or an explicit size")
        sketch = dcs_new(bits, eps, delta, seed)
    return BuiltSketch(sketch, name, "turnstile", sketch.counters(), sketch.space_bits(), eps, alpha, False)


def _sketch_violations(sketch) -> int:
    if isinstance(sketch, CompiledSpaceSaving):
        return sketch.violations
    if isinstance(sketch, DyadicSketch):
        return sum(getattr(level, "violations", 0) for level in sketch.levels)
    return 0


def evaluate_once(spec: dict, stream: Stream, seed: int) -> tuple[BuiltSketch, dict[str, Any]]:
    """Run one sketch over one stream and measure it against the exact oracle."""
    built = build_sketch(spec["sketch"], stream, seed)
    sketch = built.sketch
    oracle = ExactCounter.from_stream(stream)
    sketch.update_many(stream.items, stream.signs)
    f1 = oracle.f1()
    out: dict[str, Any] = {
        "mse": None, "max_abs_error": None, "recall": None, "precision": None, "ks": None,
        "recall_positive": None, "precision_positive": None,
        "violations": _sketch_violations(sketch), "ns_per_update": None,
    }
    if spec["timing"]:
        out["ns_per_update"] = bench_update(spec["sketch"], stream, seed=seed)

    if built.name in RANK_SKETCHES:
        if f1 > 0:
            out["ks"] = ks_divergence(sketch, oracle)
            out["max_abs_error"] = max_rank_error(sketch, oracle)
        if built.guarantee and out["ks"] is not None:
            bound = built.epsilon * f1
            if out["max_abs_error"] > bound or out["violations"]:
                raise GuaranteeViolation(
                    f"dss rank error {out['max_abs_error']} exceeds eps(I-D)={bound} "
                    f"(violations={out['violations']})"
                )
        return built, out

    if spec["eval_set"] == "universe":
        eval_items = np.arange(1 << stream.universe_bits, dtype=np.uint64)
    else:
        eval_items = stream.inserted_items()
    est = estimate_many(sketch, eval_items)
    truth = oracle.freqs(eval_items)
    out["mse"] = mse(est, truth)
    out["max_abs_error"] = int(np.max(np.abs(est - truth)))

    phi = spec["phi"] if spec["phi"] is not None else (built.epsilon or 0.01)
    truth_set = oracle.frequent_items(phi)
    cut = phi * f1
    if cut > 0:
        reported = {int(x) for x in eval_items[est >= cut].tolist()}
    else:
        reported = {int(x) for x in eval_items[est > 0].tolist()}
    out["recall"] = recall(reported, truth_set)
    out["precision"] = precision(reported, truth_set)
    if built.name in COUNTER_SKETCHES:
        positive = {item for item, _ in sketch.report_positive()}
        out["recall_positive"] = recall(positive, truth_set)
        out["precision_positive"] = precision(positive, truth_set)

    if built.guarantee:
        _assert_counter_guarantee(built, sketch, oracle, out)
    return built, out


def _assert_counter_guarantee(built: BuiltSketch, sketch, oracle: ExactCounter, out: dict) -> None:
    f1 = oracle.f1()
    eps = built.epsilon
    bound = eps * f1
    problems = []
    if out["violations"]:
        problems.append(f"{out['violations']} model violations")
    if out["max_abs_error"] > bound:
        problems.append(f"max |f - f_hat| = {out['max_abs_error']} > eps(I-D) = {bound}")
    truth = oracle.frequent_items(eps)
    if built.name == "ssp":
        reported = {item for item, _ in sketch.report_positive()}
    else:
        reported = {item for item, _ in sketch.report_threshold(eps)}
    r = recall(reported, truth)
    if r is not None and r < 1.0:
        problems.append(f"recall {r} < 1 at phi = eps")
    if problems:
        raise GuaranteeViolation(f"{built.name}: " + "; ".join(problems))


def _mean(values: list) -> float | None:
    vals = [v for v in values if v is not None]
    return float(statistics.fmean(vals)) if vals else None


def _aggregate(spec: dict, built: BuiltSketch, runs: list[dict], delete_ratio: float) -> EvalReport:
    max_errors = [m["max_abs_error"] for m in runs if m["max_abs_error"] is not None]
    phi = spec["phi"] if spec["phi"] is not None else (built.epsilon or 0.01)
    return EvalReport(
        sketch_name=built.name,
        policy=built.policy,
        counters=built.counters,
        space_bits=built.space_bits,
        epsilon=built.epsilon,
        alpha=built.alpha,
        delete_ratio=float(delete_ratio),
        mse=_mean([m["mse"] for m in runs]),
        max_abs_error=max(max_errors) if max_errors else None,
        recall=_mean([m["recall"] for m in runs]),
        precision=_mean([m["precision"] for m in runs]),
        ks=_mean([m["ks"] for m in runs]),
        ns_per_update=_mean([m["ns_per_update"] for m in runs]),
        seed=spec["seed"],
        violations=sum(m["violations"] for m in runs),
        threshold=phi,
        recall_positive=_mean([m["recall_positive"] for m in runs]),
        precision_positive=_mean([m["precision_positive"] for m in runs]),
        eval_set=spec["eval_set"],
        reps=spec["reps"],
    )


def run_experiment(spec: dict) -> EvalReport:
    """Average one sketch's metrics over ``reps`` independently seeded runs.

    Rep ``r`` uses seed ``seed + r`` for both the stream and any hash functions.
    """
    spec = normalize_spec(spec)
    runs = []
    for r in range(spec["reps"]):
        seed = spec["seed"] + r
        stream = stream_for(spec["stream"], seed)
        built, metrics = evaluate_once(spec, stream, seed)
        runs.append(metrics)
    return _aggregate(spec, built, runs, spec["stream"]["ratio"])


def _set_path(spec: dict, path: str, value) -> dict:
    out = copy.deepcopy(spec)
    node = out
    keys = path.split(".")
    for key in keys[:-1]:
        node = node.setdefault(key, {})
    node[keys[-1]] = value
    return out


def sweep(spec: dict, path: str, values: Iterable) -> list[EvalReport]:
    """Run ``spec`` once per value substituted at a dotted path, e.g. ``stream.ratio``."""
    return [run_experiment(_set_path(spec, path, v)) for v in values]


def evaluate_stream(spec: dict, stream: Stream) -> EvalReport:
    """Like :func:`run_experiment` but on a fixed stream; reps vary only hash seeds."""
    spec = normalize_spec(spec)
    runs = []
    for r in range(spec["reps"]):
        built, metrics = evaluate_once(spec, stream, spec["seed"] + r)
        runs.append(metrics)
    ratio = stream.deletes / stream.inserts if stream.inserts else 0.0
    return _aggregate(spec, built, runs, ratio)


# -- timing --------------------------------------------------------------------


def bench_update(sketch_spec: dict, stream: Stream, *, seed: int = 0, batches: int = 5) -> float:
    """Median-of-batches wall time per update, in nanoseconds.

    Each batch feeds the whole stream to a fresh sketch. Counter sketches run in
    the compiled kernel; linear sketches use vectorised numpy updates, so the two
    families are not comparable in absolute terms.
    """
    sketch_spec = {**DEFAULT_SKETCH, **sketch_spec}
    if len(stream) == 0:
        raise ParameterError("cannot time an empty stream")
    warm = build_sketch(sketch_spec, stream, seed).sketch
    n_warm = min(len(stream), 1000)
    warm.update_many(stream.items[:n_warm], stream.signs[:n_warm])
    times = []
    for _ in range(batches):
        sketch = build_sketch(sketch_spec, stream, seed).sketch
        t0 = time.perf_counter_ns()
        sketch.update_many(stream.items, stream.signs)
        times.append(time.perf_counter_ns() - t0)
    return statistics.median(times) / len(stream)


def dumps_reports(reports: Iterable[EvalReport]) -> str:
    rows = [EvalReport.csv_header()] + [r.to_csv_row() for r in reports]
    return "\n".join(rows) + "\n"
