"""Command-line front end.

Machine-readable output (JSON, CSV, stream files) goes to stdout or ``--out``;
human summaries go to stderr. Exit codes: 0 success, 1 guarantee violation,
2 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Sequence

from .errors import GuaranteeViolation, ModelViolationError, ParameterError, StreamParseError
from .evaluation import (
    COUNTER_SKETCHES,
    LINEAR_SKETCHES,
    bench_update,
    build_sketch,
    evaluate_stream,
    ks_divergence,
    max_rank_error,
    recall,
)
from .oracle import ExactCounter
from .spacesaving import capacity_for
from .stream import (
    DeleteOrder,
    DeletePattern,
    adversarial_stream,
    generate,
    load_stream,
    save_stream,
    stream_write,
)

EXIT_OK = 0
EXIT_GUARANTEE = 1
EXIT_USAGE = 2


def _ratio(text: str) -> float:
    value = float(text)
    if not 0 <= value < 1:
        raise argparse.ArgumentTypeError(f"ratio must lie in [0, 1), got {value}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        values = [int(float(v)) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("lengths must be positive")
    return values


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bdsketch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a bounded-deletion stream file")
    g.add_argument("--dist", choices=("zipf", "binomial"), required=True)
    g.add_argument("--s", type=float, default=1.0, help="zipf skew")
    g.add_argument("--n", type=int, default=100, help="binomial trials")
    g.add_argument("--p", type=float, default=0.5, help="binomial success probability")
    g.add_argument("--universe-bits", type=int, default=16)
    g.add_argument("--inserts", type=_positive_int, required=True)
    g.add_argument("--ratio", type=_ratio, default=0.0)
    g.add_argument("--pattern", choices=[p.value for p in DeletePattern], default="shuffled")
    g.add_argument("--order", choices=[o.value for o in DeleteOrder], default="after")
    g.add_argument("--seed", type=_seed, default=0)
    g.add_argument("--out")

    r = sub.add_parser("run", help="evaluate a frequency sketch on a stream file")
    r.add_argument("--sketch", choices=tuple(COUNTER_SKETCHES) + tuple(LINEAR_SKETCHES), required=True)
    r.add_argument("--stream", required=True)
    r.add_argument("--epsilon", type=float, default=0.01)
    r.add_argument("--alpha", type=float)
    r.add_argument("--counters", type=_positive_int)
    r.add_argument("--delta", type=float)
    r.add_argument("--phi", type=float)
    r.add_argument("--reps", type=_positive_int, default=1)
    r.add_argument("--seed", type=_seed, default=0)
    r.add_argument("--eval-set", choices=("inserted", "universe"), default="inserted")
    r.add_argument("--timing", action="store_true", help="fill ns_per_update (not deterministic)")
    r.add_argument("--out")

    q = sub.add_parser("quantile", help="evaluate a dyadic rank sketch on a stream file")
    q.add_argument("--sketch", choices=("dss", "dcs"), required=True)
    q.add_argument("--stream", required=True)
    q.add_argument("--universe-bits", type=int)
    q.add_argument("--epsilon", type=float, default=0.05)
    q.add_argument("--alpha", type=float)
    q.add_argument("--delta", type=float)
    q.add_argument("--counters", type=_positive_int, help="per-level size override")
    q.add_argument("--seed", type=_seed, default=0)
    q.add_argument("--q", type=_float_list, default=[])
    q.add_argument("--out")

    a = sub.add_parser("adversary", help="run the lower-bound construction against a sketch")
    a.add_argument("--epsilon", type=float, required=True)
    a.add_argument("--alpha", type=float, required=True)
    a.add_argument("--counters", type=_positive_int, required=True)
    a.add_argument("--sketch", choices=("lazy", "ssp"), default="ssp")
    a.add_argument("--multiplicity", type=_positive_int, default=1)
    a.add_argument("--out")

    b = sub.add_parser("bench", help="time updates per sketch and stream length")
    b.add_argument("--lengths", type=_int_list, required=True)
    b.add_argument("--sketch", default="lazy,ssp,cm,cmedian")
    b.add_argument("--epsilon", type=float, default=0.01)
    b.add_argument("--alpha", type=float, default=2.0)
    b.add_argument("--counters", type=_positive_int)
    b.add_argument("--s", type=float, default=1.0)
    b.add_argument("--ratio", type=_ratio, default=0.5)
    b.add_argument("--universe-bits", type=int, default=16)
    b.add_argument("--seed", type=_seed, default=0)
    b.add_argument("--out")
    return parser


# -- commands ------------------------------------------------------------------


def cmd_gen(args) -> int:
    stream = generate(
        args.dist, universe_bits=args.universe_bits, num_inserts=args.inserts, ratio=args.ratio,
        pattern=args.pattern, order=args.order, seed=args.seed, s=args.s, n=args.n, p=args.p,
    )
    summary = f"I={stream.inserts} D={stream.deletes} alpha={stream.alpha_declared!r}\n"
    if args.out:
        save_stream(stream, args.out)
        sys.stdout.write(summary)
    else:
        stream_write(stream, sys.stdout)
        sys.stderr.write(summary)
    return EXIT_OK


def _sketch_spec(args, name: str) -> dict:
    return {
        "name": name, "epsilon": args.epsilon, "alpha": args.alpha,
        "counters": args.counters, "space_bits": None, "delta": args.delta,
    }


def cmd_run(args) -> int:
    stream = load_stream(args.stream)
    spec = {
        "sketch": _sketch_spec(args, args.sketch), "phi": args.phi, "reps": args.reps,
        "seed": args.seed, "eval_set": args.eval_set, "timing": args.timing,
    }
    report = evaluate_stream(spec, stream)
    _emit(report.to_json() + "\n", args.out)
    sys.stderr.write(
        f"{report.sketch_name}: counters={report.counters} mse={report.mse} "
        f"max_abs_error={report.max_abs_error} recall={report.recall}\n"
    )
    return EXIT_OK


def cmd_quantile(args) -> int:
    stream = load_stream(args.stream)
    if args.universe_bits is not None and args.universe_bits != stream.universe_bits:
        raise ParameterError(
            f"--universe-bits {args.universe_bits} does not match stream header "
            f"universe_bits={stream.universe_bits}"
        )
    sketch_spec = _sketch_spec(args, args.sketch)
    built = build_sketch(sketch_spec, stream, args.seed)
    sketch = built.sketch
    oracle = ExactCounter.from_stream(stream)
    sketch.update_many(stream.items, stream.signs)
    result = {
        "sketch_name": built.name, "universe_bits": stream.universe_bits,
        "counters": built.counters, "space_bits": built.space_bits,
        "epsilon": built.epsilon, "alpha": built.alpha, "ks": None, "max_rank_error": None,
        "quantiles": [],
    }
    if oracle.f1() > 0:
        result["ks"] = ks_divergence(sketch, oracle)
        result["max_rank_error"] = max_rank_error(sketch, oracle)
        for qv in args.q:
            result["quantiles"].append(
                {"q": qv, "estimate": sketch.quantile(qv), "oracle": oracle.quantile(qv)}
            )
    _emit(json.dumps(result) + "\n", args.out)
    sys.stderr.write(f"{built.name}: ks={result['ks']} max_rank_error={result['max_rank_error']}\n")
    if built.guarantee and result["max_rank_error"] is not None:
        bound = built.epsilon * oracle.f1()
        if result["max_rank_error"] > bound:
            raise GuaranteeViolation(f"rank error {result['max_rank_error']} > eps(I-D) = {bound}")
    return EXIT_OK


def cmd_adversary(args) -> int:
    m = args.alpha / args.epsilon
    k = args.counters
    stream = adversarial_stream(
        args.epsilon, args.alpha,
        probe_capacity=min(k, max(1, round(m))), multiplicity=args.multiplicity,
    )
    spec = {"name": args.sketch, "epsilon": args.epsilon, "alpha": args.alpha,
            "counters": k, "space_bits": None, "delta": None}
    sketch = build_sketch(spec, stream, 0).sketch
    sketch.update_many(stream.items, stream.signs)
    oracle = ExactCounter.from_stream(stream)
    truth = oracle.frequent_items(args.epsilon)
    if args.sketch == "ssp":
        reported = {x for x, _ in sketch.report_positive()}
    else:
        reported = {x for x, _ in sketch.report_threshold(args.epsilon)}
    rec = recall(reported, truth)
    guarantee_k = capacity_for(args.epsilon, args.alpha, COUNTER_SKETCHES[args.sketch])
    result = {
        "sketch_name": args.sketch, "counters": k, "alpha_over_epsilon": m,
        "guarantee_counters": guarantee_k, "inserts": stream.inserts, "deletes": stream.deletes,
        "frequent": sorted(truth), "reported": sorted(reported), "recall": rec,
        "missed": sorted(truth - reported),
    }
    _emit(json.dumps(result) + "\n", args.out)
    if rec is not None and rec < 1.0:
        verdict = f"MISSED {len(truth - reported)} of {len(truth)} frequent items"
    else:
        verdict = "all frequent items reported"
    sys.stderr.write(f"k={k} alpha/eps={m:g}: {verdict} (recall={rec})\n")
    if k >= guarantee_k and rec is not None and rec < 1.0:
        raise GuaranteeViolation(f"recall {rec} < 1 with guarantee-grade k={k}")
    return EXIT_OK


def _inserts_for_length(length: int, ratio: float) -> int:
    """Insert count whose stream (inserts plus floor(ratio * inserts) deletes) is closest to ``length``."""
    guess = max(1, round(length / (1 + ratio)))
    candidates = range(max(1, guess - 2), guess + 3)
    return min(candidates, key=lambda i: (abs(i + math.floor(ratio * i) - length), i))


def cmd_bench(args) -> int:
    names = [n for n in args.sketch.split(",") if n]
    allowed = set(COUNTER_SKETCHES) | set(LINEAR_SKETCHES)
    for name in names:
        if name not in allowed:
            raise ParameterError(f"unknown sketch {name!r} (choose from {sorted(allowed)})")
    rows = ["sketch,length,ns_per_update"]
    for length in args.lengths:
        inserts = _inserts_for_length(length, args.ratio)
        stream = generate("zipf", universe_bits=args.universe_bits, num_inserts=inserts,
                          ratio=args.ratio, seed=args.seed, s=args.s)
        for name in names:
            spec = {"name": name, "epsilon": args.epsilon, "alpha": args.alpha,
                    "counters": args.counters, "space_bits": None, "delta": None}
            if name == "ss" and stream.deletes:
                raise ParameterError("insert-only 'ss' cannot be timed on a stream with deletes")
            ns = bench_update(spec, stream, seed=args.seed)
            rows.append(f"{name},{len(stream)},{ns:.3f}")
    _emit("\n".join(rows) + "\n", args.out)
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "run": cmd_run,
    "quantile": cmd_quantile,
    "adversary": cmd_adversary,
    "bench": cmd_bench,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except GuaranteeViolation as exc:
        sys.stderr.write(f"guarantee violated: {exc}\n")
        return EXIT_GUARANTEE
    except ModelViolationError as exc:
        where = ""
        if exc.position is not None and getattr(args, "stream", None):
            # op i of a stream file sits on line i + 2, after the header
            where = f"{args.stream}: line {exc.position + 2}: "
        sys.stderr.write(f"error: {where}{exc}\n")
        return EXIT_USAGE
    except (StreamParseError, ParameterError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
