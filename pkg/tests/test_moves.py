import pytest
from hypothesis import given, settings, strategies as st

from gainrig import gain_graph as gg
from gainrig.gain_graph import DuplicateParallelGain, GainGraph
from gainrig.symmetry_groups import IDENTITY, Group, GroupElement
from gainrig.moves import (
    AlreadyBase,
    Construction,
    GainConstraintViolated,
    LinearPartTrivial,
    LoopInput,
    MoveKind,
    MoveRecord,
    NotIncident,
    NotTight,
    Setting,
    WrongDegree,
    allowed_moves,
    apply_move,
    candidate_reductions,
    edge_join,
    edge_to_k3,
    is_base,
    k1,
    k1_loop,
    k4_plus_e,
    loop_one_extension,
    one_extension,
    random_construction,
    random_tight_graph,
    reduce_once,
    reduce_to_base,
    reduce_to_construction,
    vertex_to_4cycle,
    vertex_to_k4,
    zero_extension,
)
from gainrig.sparsity import check_tight

from conftest import identity_k4

E = GroupElement
S = E(0, 0, True)
GLIDE = E(0, 1, True)

SETTINGS = [
    Setting.lq(3, Group.Z2),
    Setting.lq(3, Group.CS),
    Setting.lq(3, Group.Z2XCS),
    Setting.linf(Group.Z2),
    Setting.linf(Group.Z2XCS),
]
IDS = [str(s) for s in SETTINGS]


# settings --------------------------------------------------------------------


def test_setting_parse():
    assert Setting.parse("q=1.5", "Z2").q == 1.5
    assert Setting.parse("inf", "Z2xCs").is_inf
    assert Setting.parse("3", Group.CS).norm_label == "q=3"
    with pytest.raises(ValueError):
        Setting.parse("inf", "Cs")
    with pytest.raises(ValueError):
        Setting.lq(2, Group.Z2)
    with pytest.raises(ValueError):
        Setting.lq(1, Group.Z2)


def test_allowed_moves():
    K = MoveKind
    assert K.LOOP_ONE_EXT not in allowed_moves(Setting.lq(3, Group.Z2))
    assert K.EDGE_JOIN in allowed_moves(Setting.lq(1.5, Group.CS))
    assert K.EDGE_TO_K3 in allowed_moves(Setting.linf(Group.Z2))
    assert K.VERTEX_TO_4CYCLE not in allowed_moves(Setting.linf(Group.Z2XCS))
    assert all(k.is_extension and not k.inverse.is_extension for k in K if k.is_extension)
    assert all(k.inverse.inverse is k for k in K)


# extensions ---------------------------------------------------------------------


def test_zero_extension_on_k1():
    g, rec = zero_extension(k1(), 0, 0, IDENTITY, E(1, 0))
    assert g.n == 2 and g.m == 2
    assert check_tight(g).tight
    assert rec.kind is MoveKind.ZERO_EXT and rec.new_vertices == (1,)


def test_zero_extension_duplicate():
    with pytest.raises(DuplicateParallelGain):
        zero_extension(k1(), 0, 0, E(1, 0), E(1, 0))


def test_one_extension_constraint():
    g = GainGraph(Group.Z2, 2, [(0, 1, (1, 0, 0)), (0, 1, (0, 0, 0)), (0, 1, (0, 1, 0))])
    big, _ = one_extension(g, 0, 1, IDENTITY, E(1, 0), E(2, 2))
    assert big.m == g.m + 2
    with pytest.raises(GainConstraintViolated):
        one_extension(g, 0, 1, E(1, 1), E(1, 1), E(2, 2))


def test_one_extension_loop_to_three_parallel():
    g = k1_loop(GLIDE)
    big, _ = one_extension(g, 0, 0, IDENTITY, GLIDE, E(1, 0))
    assert big.n == 2 and big.m == 3
    assert not any(e.is_loop for e in big.edges)
    assert check_tight(big).tight


def test_loop_one_extension():
    big, _ = loop_one_extension(k1_loop(GLIDE), 0, GLIDE, E(1, 1))
    assert check_tight(big).tight
    with pytest.raises(LinearPartTrivial):
        loop_one_extension(k1_loop(GLIDE), 0, E(1, 0), IDENTITY)


def test_vertex_to_4cycle():
    g = identity_k4()
    big, rec = vertex_to_4cycle(g, 0, 0, 1, IDENTITY, IDENTITY, transfer=[2])
    assert big.n == 5 and big.m == 8
    assert check_tight(big).tight
    with pytest.raises(NotIncident):
        h = GainGraph(Group.Z2, 2, [(0, 1, (0, 0, 0)), (0, 1, (1, 0, 0))])
        vertex_to_4cycle(h, 0, 0, 1, IDENTITY, E(1, 0))
    with pytest.raises(GainConstraintViolated):
        vertex_to_4cycle(g, 0, 0, 1, IDENTITY, E(1, 0))


def test_vertex_to_k4_isolated():
    big, rec = vertex_to_k4(k1(), 0)
    assert big == identity_k4()
    assert rec.new_vertices == (1, 2, 3)


def test_vertex_to_k4_reroots_loop():
    for corners in [(0, 0), (1, 2), (3, 3)]:
        big, _ = vertex_to_k4(k1_loop(GLIDE), 0, {0: corners})
        assert big.n == 4 and big.m == 7
        assert check_tight(big).tight


def test_edge_to_k3():
    g = GainGraph(Group.Z2, 2, [(0, 1, (1, 0, 0)), (0, 1, (0, 0, 0)), (0, 1, (0, 1, 0))])
    big, _ = edge_to_k3(g, 0, IDENTITY, E(1, 0))
    assert big.m == g.m + 2
    with pytest.raises(LoopInput):
        edge_to_k3(k1_loop(GLIDE), 0, IDENTITY, GLIDE)
    with pytest.raises(GainConstraintViolated):
        edge_to_k3(g, 0, E(1, 1), E(1, 1))


def test_edge_join():
    a = k1_loop(S, Group.CS)
    big, rec = edge_join(a, a, 0, 0, IDENTITY)
    assert big.n == 2 and big.m == 3
    assert check_tight(big).tight
    joined, _ = edge_join(k4_plus_e(), a, 2, 0, S)
    assert joined.m == 7 + 1 + 1
    assert check_tight(joined).tight


def test_transferred_edges_get_the_offset():
    # the new vertex sits over gain1 * v1, so the transferred parallel edge
    # must be re-based; keeping its old gain makes the result non-tight
    g = GainGraph(Group.Z2XCS, 2, [(0, 1, (-1, -2, 1)), (0, 1, (0, 0, 0)), (0, 1, (2, 0, 1))])
    assert check_tight(g).tight
    g1 = E(-1, 0, True)
    big, _ = edge_to_k3(g, 0, g1, g1 * g.edges[0].gain, transfer=[1], v1=0)
    assert check_tight(big).tight
    # new vertex 2 replaces vertex 0 on the transferred edge (0, 1; id)
    assert gg.Edge(2, 1, g1 * g.edges[1].gain).canonical() in big.edges


# records ------------------------------------------------------------------------------


@pytest.mark.parametrize("setting", SETTINGS, ids=IDS)
def test_extension_then_inverse_round_trips(setting):
    for seed in range(30):
        construction, g = random_construction(setting, 6, seed)
        small = construction.base
        for rec in construction.moves:
            big = apply_move(small, rec)
            back = apply_move(big, rec.inverse())
            assert back.same_as(small)
            small = big
        assert small == g


def test_record_json_round_trip():
    construction, g = random_construction(Setting.lq(3, Group.CS), 8, 11)
    text = construction.to_jsonl()
    again = Construction.from_jsonl(text)
    assert again.replay() == g
    assert [r.kind for r in again.moves] == [r.kind for r in construction.moves]
    with pytest.raises(ValueError):
        Construction.from_jsonl('{"kind": "ZeroExt"}\n')


# reductions --------------------------------------------------------------------------


def test_degree_two_gives_zero_reduction():
    g, _ = zero_extension(identity_k4(), 0, 1, IDENTITY, E(1, 0))
    found = candidate_reductions(g, Setting.lq(3, Group.Z2), 4)
    assert found[0][0].kind is MoveKind.ZERO_RED
    assert all(small.same_as(identity_k4()) for _, small in found)


def test_three_parallel_edges_give_loop_candidates():
    g, _ = one_extension(k1_loop(GLIDE), 0, 0, IDENTITY, GLIDE, E(1, 0))
    found = candidate_reductions(g, Setting.lq(3, Group.Z2XCS), 1)
    ones = [(r, s) for r, s in found if r.kind is MoveKind.ONE_RED]
    assert 1 <= len(ones) <= 3
    assert all(s.n == 1 and s.edges[0].is_loop for _, s in ones)
    assert any(check_tight(s).tight for _, s in ones)


def test_wrong_degree():
    g, _ = zero_extension(identity_k4(), 0, 1, IDENTITY, E(1, 0))
    with pytest.raises(WrongDegree):
        candidate_reductions(g, Setting.lq(3, Group.Z2), 0)


def test_k4_contraction_found():
    g = identity_k4(Group.Z2XCS, [(0, 0, (0, 1, 1))])
    g = gg.switch_many(g, [(2, E(1, -1, True)), (3, E(0, 2))])
    assert check_tight(g).tight
    small, rec = reduce_once(g, Setting.lq(3, Group.Z2XCS))
    assert rec.kind is MoveKind.K4_TO_VERTEX
    assert small.n == 1 and check_tight(small).tight


def test_reduce_zero_extension_of_base():
    base = k1()
    big, _ = zero_extension(base, 0, 0, IDENTITY, E(0, 1))
    small, rec = reduce_once(big, Setting.lq(3, Group.Z2))
    assert small == base and rec.kind is MoveKind.ZERO_RED


def test_base_inputs():
    cs = Setting.lq(3, Group.CS)
    assert is_base(k4_plus_e(), cs)
    assert is_base(k1_loop(S, Group.CS), cs)
    assert reduce_to_base(k4_plus_e(), cs) == []
    with pytest.raises(AlreadyBase):
        reduce_once(k1(), Setting.lq(3, Group.Z2))
    assert not is_base(k1_loop(E(1, 0), Group.Z2XCS), Setting.lq(3, Group.Z2XCS))


def test_not_tight_input():
    with pytest.raises(NotTight):
        reduce_to_base(k1_loop(E(1, 0), Group.Z2XCS), Setting.lq(3, Group.Z2XCS))


def test_edge_split_detaches_piece():
    a = k1_loop(S, Group.CS)
    joined, _ = edge_join(k4_plus_e(), a, 2, 0, IDENTITY)
    records = reduce_to_base(joined, Setting.lq(3, Group.CS))
    assert records[0].kind is MoveKind.EDGE_SPLIT
    assert records[0].branch.replay() == a


@pytest.mark.parametrize("setting", SETTINGS, ids=IDS)
def test_reduce_to_base_generated(setting):
    for seed in range(40):
        g, _ = random_tight_graph(setting, 10, seed)
        h = g
        for rec in reduce_to_base(g, setting):
            h = apply_move(h, rec)
            assert check_tight(h).tight
        assert is_base(h, setting)


@pytest.mark.parametrize("setting", SETTINGS, ids=IDS)
def test_reduce_to_construction_replays(setting):
    for seed in range(10):
        g, _ = random_tight_graph(setting, 8, 1000 + seed)
        construction = reduce_to_construction(g, setting)
        assert is_base(construction.base, setting)
        assert construction.replay().same_as(g)


# generator ------------------------------------------------------------------------------


def test_zero_moves_is_base():
    for setting in SETTINGS:
        g, moves = random_tight_graph(setting, 0, 3)
        assert moves == [] and is_base(g, setting)


def test_generator_is_seeded():
    s = Setting.lq(1.5, Group.Z2XCS)
    assert random_tight_graph(s, 7, 42)[0] == random_tight_graph(s, 7, 42)[0]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(range(len(SETTINGS))), st.integers(0, 10))
def test_generated_graphs_are_tight(seed, which, n_moves):
    setting = SETTINGS[which]
    g, moves = random_tight_graph(setting, n_moves, seed)
    assert check_tight(g).tight
    assert g.n <= 14
    assert {m.kind for m in moves} <= set(allowed_moves(setting))
    if setting.group is Group.Z2:
        assert not any(e.is_loop for e in g.edges)


def test_max_vertices_respected():
    g, moves = random_tight_graph(Setting.lq(3, Group.Z2), 20, 0, max_vertices=5)
    assert g.n <= 5


def test_negative_moves():
    with pytest.raises(ValueError):
        random_tight_graph(Setting.lq(3, Group.Z2), -1, 0)
