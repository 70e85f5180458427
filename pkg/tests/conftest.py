import numpy as np
import pytest

from bdsketch.stream import Stream

A, B, C = 1, 2, 3

# (A, A, A, C, -A, B, A, -C, -B)
TRACE_OPS = [(A, 1), (A, 1), (A, 1), (C, 1), (A, -1), (B, 1), (A, 1), (C, -1), (B, -1)]


def brute_counts(items, signs):
    """Plain-dict frequency vector, the simplest possible oracle."""
    out = {}
    for x, s in zip(items, signs):
        out[int(x)] = out.get(int(x), 0) + int(s)
    return {k: v for k, v in out.items() if v}


def replay(sketch, ops):
    for item, sign in ops:
        if sign > 0:
            sketch.insert(item)
        else:
            sketch.delete(item)
    return sketch


@pytest.fixture
def trace_stream():
    items = np.array([x for x, _ in TRACE_OPS], dtype=np.uint64)
    signs = np.array([s for _, s in TRACE_OPS], dtype=np.int8)
    return Stream(items, signs, universe_bits=2, alpha_declared=3.0, descriptor="trace")


# one line per acceptance criterion, echoed after the run even when output is captured
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
