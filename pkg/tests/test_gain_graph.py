import random

import pytest
from hypothesis import given, settings, strategies as st

from gainrig import gain_graph as gg
from gainrig.gain_graph import (
    BrokenWalk,
    DuplicateParallelGain,
    Edge,
    GainGraph,
    GainOutsideGroup,
    IdentityLoop,
    ParseError,
    VertexOutOfRange,
)
from gainrig.symmetry_groups import IDENTITY, Group, GroupElement

from conftest import identity_k4, random_gain_graph

S = GroupElement(0, 0, True)
E = GroupElement


# validation -----------------------------------------------------------------


def test_identity_loop_rejected():
    with pytest.raises(IdentityLoop) as info:
        GainGraph(Group.Z2, 1, [(0, 0, (0, 0, 0))])
    assert info.value.edge_index == 0


def test_duplicate_parallel_rejected():
    with pytest.raises(DuplicateParallelGain):
        GainGraph(Group.Z2, 2, [(0, 1, (1, 0, 0)), (0, 1, (1, 0, 0))])


def test_antiparallel_inverse_rejected():
    # reversing the second edge gives (0, 1; (1,0,id)), a copy of the first
    with pytest.raises(DuplicateParallelGain) as info:
        GainGraph(Group.Z2, 2, [(0, 1, (1, 0, 0)), (1, 0, (-1, 0, 0))])
    assert info.value.pair == (0, 1)


def test_loop_and_its_inverse_are_the_same_loop():
    with pytest.raises(DuplicateParallelGain):
        GainGraph(Group.Z2, 1, [(0, 0, (1, 0, 0)), (0, 0, (-1, 0, 0))])


def test_group_membership_enforced():
    with pytest.raises(GainOutsideGroup):
        GainGraph(Group.Z2, 2, [(0, 1, (0, 0, 1))])
    with pytest.raises(GainOutsideGroup):
        GainGraph(Group.CS, 2, [(0, 1, (1, 0, 0))])


def test_vertex_range():
    with pytest.raises(VertexOutOfRange):
        GainGraph(Group.Z2, 2, [(0, 2, (0, 0, 0))])


def test_distinct_parallel_gains_allowed():
    g = GainGraph(Group.Z2, 2, [(0, 1, (0, 0, 0)), (0, 1, (1, 0, 0)), (1, 0, (1, 0, 0))])
    assert g.m == 3
    assert g.degree(0) == 3


def test_canonical_orientation():
    g = GainGraph(Group.Z2XCS, 2, [(1, 0, (1, 2, 0)), (1, 1, (0, 1, 1))])
    assert g.edges[0] == Edge(0, 1, E(-1, -2))
    assert g.edges[1].is_loop
    assert g.degree(1) == 3
    assert g.loops_at(1) == [1]
    assert g.neighbours(1) == {0}


# walks and switching ------------------------------------------------------------


def test_net_gain_empty_walk():
    g = identity_k4()
    assert net_gain_is(g, 2, [], IDENTITY)


def net_gain_is(g, v, steps, expected):
    return gg.net_gain(g, v, steps) == expected


def test_net_gain_back_and_forth():
    g = GainGraph(Group.Z2, 2, [(0, 1, (2, -1, 0))])
    assert gg.net_gain(g, 0, [(0, 1), (0, -1)]) == IDENTITY


def test_net_gain_triangle():
    g = GainGraph(Group.Z2XCS, 3, [(0, 1, (1, 0, 0)), (1, 2, (0, 1, 0)), (0, 2, (0, 0, 1))])
    # close the triangle by walking 2 -> 0, i.e. the third edge backwards
    steps = [(0, 1), (1, 1), (2, -1)]
    assert gg.net_gain(g, 0, steps) == E(1, 1) * S.inverse()
    # the three-forward-edges cycle with the third edge oriented 2 -> 0
    h = GainGraph(Group.Z2XCS, 3, [(0, 1, (1, 0, 0)), (1, 2, (0, 1, 0)), (2, 0, (0, 0, 1))])
    tri = [(0, 1), (1, 1), (2, -1 if h.edges[2].tail == 0 else 1)]
    assert gg.net_gain(h, 0, tri) == E(1, 1, True)


def test_net_gain_broken():
    g = GainGraph(Group.Z2, 3, [(0, 1, (0, 0, 0)), (1, 2, (0, 0, 0))])
    with pytest.raises(BrokenWalk):
        gg.net_gain(g, 0, [(1, 1)])
    with pytest.raises(BrokenWalk):
        gg.net_gain(g, 0, [(0, 2)])


def test_switch_identity_is_noop():
    g = GainGraph(Group.Z2XCS, 2, [(0, 1, (1, 0, 1))])
    assert gg.switch(g, 0, IDENTITY) == g


def test_switch_loop_conjugates():
    g = GainGraph(Group.Z2XCS, 1, [(0, 0, (0, 1, 1))])
    assert gg.switch(g, 0, S).edges[0].gain == E(0, -1, True)


def test_switch_outgoing_edge():
    g = GainGraph(Group.Z2XCS, 2, [(0, 1, (1, 0, 0))])
    assert gg.switch(g, 0, S).edges[0].gain == E(1, 0, True)


def test_switch_incoming_edge():
    g = GainGraph(Group.Z2XCS, 2, [(0, 1, (1, 0, 0))])
    assert gg.switch(g, 1, E(0, 2, True)).edges[0].gain == E(1, 0) * E(0, 2, True).inverse()


def test_switch_checks_group():
    with pytest.raises(GainOutsideGroup):
        gg.switch(identity_k4(), 0, S)


def closed_walks(g, start, rng, count=20, length=8):
    """Random closed walks from ``start`` built from a walk out and back."""
    walks = []
    for _ in range(count):
        here, steps = start, []
        for _ in range(rng.randrange(1, length)):
            options = g.incident(here)
            if not options:
                break
            idx = rng.choice(options)
            e = g.edges[idx]
            if e.is_loop:
                steps.append((idx, rng.choice((1, -1))))
            elif e.tail == here:
                steps.append((idx, 1))
                here = e.head
            else:
                steps.append((idx, -1))
                here = e.tail
        back = [(i, -a) for i, a in reversed(steps)]
        # splice a loop or a detour in the middle so the walk is not trivial
        walks.append(steps + [s for s in steps[-1:] if g.edges[s[0]].is_loop] + back)
    return walks


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(list(Group)))
def test_switch_conjugates_closed_walks(seed, group):
    rng = random.Random(seed)
    g = random_gain_graph(rng, group, 4, 7)
    v = rng.randrange(4)
    gamma = E(0, 0, True) if group is Group.CS else E(rng.randint(-2, 2), rng.randint(-2, 2),
                                                       group.has_reflection and rng.random() < .5)
    h = gg.switch(g, v, gamma)

    def in_h(walk):
        # a switched loop may be stored as its inverse, which flips the step
        out = []
        for idx, alpha in walk:
            e, f = g.edges[idx], h.edges[idx]
            if e.is_loop and e.tail == v and f.gain != gamma * e.gain * gamma.inverse():
                alpha = -alpha
            out.append((idx, alpha))
        return out

    for walk in closed_walks(g, v, rng):
        assert gg.net_gain(h, v, in_h(walk)) == gamma * gg.net_gain(g, v, walk) * gamma.inverse()
    other = (v + 1) % 4
    for walk in closed_walks(g, other, rng):
        assert gg.net_gain(h, other, in_h(walk)) == gg.net_gain(g, other, walk)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(list(Group)))
def test_switching_preserves_balance_and_periodicity(seed, group):
    rng = random.Random(seed)
    g = random_gain_graph(rng, group, 3, rng.randrange(1, 6))
    h, _ = gg.spanning_tree_normalize(g)
    assert gg.is_balanced(h) == gg.is_balanced(g)
    assert gg.is_purely_periodic(h) == gg.is_purely_periodic(g)


# normalisation and cycle gains --------------------------------------------------------


def test_normalize_is_idempotent():
    g, log = gg.spanning_tree_normalize(identity_k4())
    assert g == identity_k4() and log == []


def test_normalize_path():
    g = GainGraph(Group.Z2, 2, [(0, 1, (2, 3, 0))])
    h, log = gg.spanning_tree_normalize(g)
    assert h.edges[0].gain == IDENTITY
    assert log == [(1, E(2, 3))]


def test_normalize_keeps_cycle_classes():
    g = identity_k4(Group.Z2XCS, [(0, 3, (1, 0, 1))])
    g = gg.switch_many(g, [(1, E(1, 1, True)), (2, E(-1, 0))])
    h, _ = gg.spanning_tree_normalize(g)
    _, tree = gg.spanning_forest(h)
    assert all(h.edges[i].gain == IDENTITY for i in tree)
    before = sorted(x for _, x in gg.fundamental_cycle_gains(g))
    after = sorted(x for _, x in gg.fundamental_cycle_gains(h))
    # root potential is identity, so the cycle gains read from the root agree
    assert before == after


def test_fundamental_cycles():
    tree = GainGraph(Group.Z2, 3, [(0, 1, (1, 0, 0)), (1, 2, (0, 1, 0))])
    assert gg.fundamental_cycle_gains(tree) == []
    loop = GainGraph(Group.Z2XCS, 1, [(0, 0, (0, 1, 1))])
    assert gg.fundamental_cycle_gains(loop) == [(0, E(0, 1, True))]
    cycles = gg.fundamental_cycle_gains(identity_k4())
    assert len(cycles) == 3 and all(x == IDENTITY for _, x in cycles)


# predicates ------------------------------------------------------------------------


def test_balanced_examples():
    assert gg.is_balanced(identity_k4())
    assert not gg.is_balanced(GainGraph(Group.CS, 1, [(0, 0, (0, 0, 1))]))
    square = GainGraph(Group.Z2XCS, 4, [
        (0, 1, (1, 0, 1)), (1, 2, (0, 2, 0)), (2, 3, (3, 1, 1)),
    ])
    closing = gg.net_gain(square, 0, [(0, 1), (1, 1), (2, 1)])
    square = square.with_edges(list(square.edges) + [Edge(3, 0, closing.inverse())])
    assert gg.net_gain(square, 0, [(0, 1), (1, 1), (2, 1), (3, 1 if square.edges[3].tail == 3 else -1)]) == IDENTITY
    assert gg.is_balanced(square)


def test_purely_periodic_examples():
    assert gg.is_purely_periodic(GainGraph(Group.Z2, 1, [(0, 0, (1, 0, 0))]))
    assert gg.is_purely_periodic(GainGraph(Group.Z2XCS, 1, [(0, 0, (1, 0, 0))]))
    assert not gg.is_purely_periodic(GainGraph(Group.Z2XCS, 1, [(0, 0, (0, 1, 1))]))
    # two reflections around a cycle compose to a translation
    g = GainGraph(Group.Z2XCS, 2, [(0, 1, (0, 0, 1)), (0, 1, (1, 0, 1))])
    assert gg.is_purely_periodic(g)
    assert not gg.is_balanced(g)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6))
def test_purely_periodic_matches_full_products(seed):
    rng = random.Random(seed)
    g = random_gain_graph(rng, Group.Z2XCS, 4, rng.randrange(1, 7))
    expected = all(x.is_translation for _, x in gg.fundamental_cycle_gains(g))
    assert gg.is_purely_periodic(g) == expected


# derived graph -------------------------------------------------------------------


def test_derived_isolated():
    cover = gg.derived_graph(GainGraph(Group.Z2, 1), 1)
    assert cover.number_of_nodes() == 9 and cover.number_of_edges() == 0


def test_derived_horizontal_paths():
    cover = gg.derived_graph(GainGraph(Group.Z2, 1, [(0, 0, (1, 0, 0))]), 1)
    expected = {
        frozenset({(0, E(c, d)), (0, E(c + 1, d))}) for c in (-1, 0) for d in (-1, 0, 1)
    }
    assert {frozenset(e) for e in cover.edges} == expected


def test_derived_reflection_doubles():
    g = GainGraph(Group.CS, 3, [(0, 1, (0, 0, 1)), (1, 2, (0, 0, 0))])
    cover = gg.derived_graph(g, 2, include_reflection=True)
    assert cover.number_of_nodes() == 6
    assert cover.number_of_edges() == 4


# text and json formats -------------------------------------------------------------


def test_parse_example():
    text = """# a loop with a glide gain
group Z2xCs
vertices 1
edge 0 0 0 1 1
point 0 0.25 0.75
"""
    g, points = gg.parse(text)
    assert g == GainGraph(Group.Z2XCS, 1, [(0, 0, (0, 1, 1))])
    assert points == {0: (0.25, 0.75)}


@pytest.mark.parametrize(
    "text, line",
    [
        ("group Z2\nvertices 2\nedge 0 1 0 0\n", 3),
        ("group Z2\nvertices 2\nedge 0 1 0 x 0\n", 3),
        ("group Z2\nvertices 2\nedge 0 1 0 0 2\n", 3),
        ("group Z2\nvertices 2\nedge 0 1 0 0 0\nedge 1 0 0 0 0\n", 4),
        ("group Q\nvertices 2\n", 1),
        ("vertices 2\n", 1),
        ("group Z2\nvertices 1\nedge 0 0 0 0 0\n", 3),
        ("group Z2\nvertices 2\nbogus\n", 3),
    ],
)
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as info:
        gg.parse(text)
    assert info.value.line_no == line


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(list(Group)))
def test_round_trips(seed, group):
    rng = random.Random(seed)
    n = rng.randrange(2, 5)
    g = random_gain_graph(rng, group, n, rng.randrange(0, n + 2))
    assert gg.parse(gg.serialize(g))[0] == g
    assert gg.from_json(gg.to_json(g)) == g
    points = [(rng.uniform(-5, 5), rng.uniform(-5, 5)) for _ in range(n)]
    _, back = gg.parse(gg.serialize(g, points))
    assert [back[v] for v in range(n)] == points


def test_same_as_ignores_order():
    a = GainGraph(Group.Z2, 2, [(0, 1, (0, 0, 0)), (0, 1, (1, 0, 0))])
    b = GainGraph(Group.Z2, 2, [(0, 1, (1, 0, 0)), (1, 0, (0, 0, 0))])
    assert a != b and a.same_as(b)
    assert hash(a) == hash(GainGraph(Group.Z2, 2, a.edges))
