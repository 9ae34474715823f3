import random

import pytest

from gainrig.gain_graph import GainGraph, GainGraphError
from gainrig.symmetry_groups import Group, GroupElement


def random_gain(rng, group, spread=2):
    c = d = 0
    if group.has_translations:
        c, d = rng.randint(-spread, spread), rng.randint(-spread, spread)
    r = group.has_reflection and rng.random() < 0.5
    return GroupElement(c, d, r)


def capacity(group, n):
    """Most edges a valid graph can carry (Cs has two gains per pair, one loop gain)."""
    return n * n if group is Group.CS else 10**6


def random_gain_graph(rng, group, n, m, loops=True, spread=2):
    """Rejection-sampled valid gain graph with ``n`` vertices and ``m`` edges."""
    edges = []
    for _ in range(10_000):
        if len(edges) == m:
            break
        t, h = rng.randrange(n), rng.randrange(n)
        if t == h and not loops:
            continue
        cand = edges + [(t, h, random_gain(rng, group, spread))]
        try:
            GainGraph(group, n, cand)
        except GainGraphError:
            continue
        edges = cand
    else:
        raise ValueError(f"cannot fit {m} edges on {n} vertices in {group}")
    return GainGraph(group, n, edges)


def identity_k4(group=Group.Z2, extra=()):
    edges = [(a, b, (0, 0, 0)) for a in range(4) for b in range(a + 1, 4)]
    return GainGraph(group, 4, edges + list(extra))


@pytest.fixture
def rng():
    return random.Random(1234)


# acceptance summary -----------------------------------------------------------

ACCEPTANCE_LINES = {}


def record_criterion(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
