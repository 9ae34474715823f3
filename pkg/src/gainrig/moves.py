"""Gained extension moves, their inverses, reduction search and generation.

Every move is stored as a difference between a *small* and a *big* graph:

* ``new_vertices`` -- ids (in the big graph) of the vertices the extension
  creates;
* ``small_edges`` -- edges only present in the small graph (small ids);
* ``big_edges`` -- edges only present in the big graph (big ids), written
  for the big graph *after* ``switches`` have been applied to it.

An extension turns small into big and a reduction turns big into small, so
inverting a record only flips its kind.  Switches let a reduction first move
the big graph to an equivalent gain assignment (for instance, making a
balanced K4 carry identity gains) without losing exact replay.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
import random
from dataclasses import dataclass, field, replace

from .gain_graph import (
    DuplicateParallelGain,
    Edge,
    GainGraph,
    GainGraphError,
    from_json,
    is_balanced,
    switch_many,
    to_json,
)
from .symmetry_groups import IDENTITY, Group, GroupElement
from .sparsity import check_tight

MAX_DRAWS = 10_000


class MoveError(ValueError):
    pass


class GainConstraintViolated(MoveError):
    pass


class LinearPartTrivial(MoveError):
    pass


class NotIncident(MoveError):
    pass


class LoopInput(MoveError):
    pass


class WrongDegree(MoveError):
    pass


class AlreadyBase(MoveError):
    pass


class NotTight(MoveError):
    pass


class NoAdmissibleReduction(RuntimeError):
    """No candidate reduction keeps the graph tight.

    Every tight graph should reduce, so this signals a counterexample; the
    offending graph is attached for inspection.
    """

    def __init__(self, graph, setting=None):
        super().__init__(f"no admissible reduction for {graph!r} under {setting}")
        self.graph = graph
        self.setting = setting


class MoveKind(str, enum.Enum):
    ZERO_EXT = "ZeroExt"
    ONE_EXT = "OneExt"
    LOOP_ONE_EXT = "LoopOneExt"
    VERTEX_TO_4CYCLE = "VertexTo4Cycle"
    VERTEX_TO_K4 = "VertexToK4"
    EDGE_TO_K3 = "EdgeToK3"
    EDGE_JOIN = "EdgeJoin"
    ZERO_RED = "ZeroRed"
    ONE_RED = "OneRed"
    LOOP_ONE_RED = "LoopOneRed"
    FOUR_CYCLE_TO_VERTEX = "FourCycleToVertex"
    K4_TO_VERTEX = "K4ToVertex"
    K3_TO_EDGE = "K3ToEdge"
    EDGE_SPLIT = "EdgeSplit"

    @property
    def is_extension(self) -> bool:
        return self in _EXTENSIONS

    @property
    def inverse(self) -> "MoveKind":
        return _INVERSE[self]

    def __str__(self):
        return self.value


_PAIRS = [
    (MoveKind.ZERO_EXT, MoveKind.ZERO_RED),
    (MoveKind.ONE_EXT, MoveKind.ONE_RED),
    (MoveKind.LOOP_ONE_EXT, MoveKind.LOOP_ONE_RED),
    (MoveKind.VERTEX_TO_4CYCLE, MoveKind.FOUR_CYCLE_TO_VERTEX),
    (MoveKind.VERTEX_TO_K4, MoveKind.K4_TO_VERTEX),
    (MoveKind.EDGE_TO_K3, MoveKind.K3_TO_EDGE),
    (MoveKind.EDGE_JOIN, MoveKind.EDGE_SPLIT),
]
_EXTENSIONS = {a for a, _ in _PAIRS}
_INVERSE = {**{a: b for a, b in _PAIRS}, **{b: a for a, b in _PAIRS}}

# settings ---------------------------------------------------------------------


@dataclass(frozen=True)
class Setting:
    """A norm (finite q, or ``math.inf``) together with a symmetry group."""

    group: Group
    q: float

    def __post_init__(self):
        group = self.group if isinstance(self.group, Group) else Group.parse(self.group)
        object.__setattr__(self, "group", group)
        q = float(self.q)
        object.__setattr__(self, "q", q)
        if not (q > 1.0) or q == 2.0:
            raise ValueError(f"q must lie in (1, inf) and differ from 2, got {q}")
        if math.isinf(q) and group is Group.CS:
            raise ValueError("the ell-infinity setting is implemented for Z2 and Z2xCs only")

    @classmethod
    def lq(cls, q, group) -> "Setting":
        if math.isinf(float(q)):
            raise ValueError("use Setting.linf for the infinity norm")
        return cls(group, q)

    @classmethod
    def linf(cls, group) -> "Setting":
        return cls(group, math.inf)

    @classmethod
    def parse(cls, norm: str, group) -> "Setting":
        text = norm.strip().lower()
        if text in ("inf", "linf", "infinity"):
            return cls.linf(group)
        if text.startswith("q="):
            text = text[2:]
        return cls.lq(float(text), group)

    @property
    def is_inf(self) -> bool:
        return math.isinf(self.q)

    @property
    def norm_label(self) -> str:
        return "inf" if self.is_inf else f"q={self.q:g}"

    def __str__(self):
        return f"({'Linf' if self.is_inf else f'Lq q={self.q:g}'}, {self.group.value})"


def allowed_moves(setting: Setting) -> tuple:
    K = MoveKind
    if setting.is_inf:
        moves = [K.ZERO_EXT, K.ONE_EXT, K.EDGE_TO_K3, K.VERTEX_TO_K4]
        if setting.group is Group.Z2XCS:
            moves.insert(2, K.LOOP_ONE_EXT)
        return tuple(moves)
    if setting.group is Group.Z2:
        return (K.ZERO_EXT, K.ONE_EXT, K.VERTEX_TO_4CYCLE, K.VERTEX_TO_K4)
    if setting.group is Group.CS:
        return (K.ZERO_EXT, K.ONE_EXT, K.LOOP_ONE_EXT, K.VERTEX_TO_4CYCLE,
                K.VERTEX_TO_K4, K.EDGE_JOIN)
    return (K.ZERO_EXT, K.ONE_EXT, K.LOOP_ONE_EXT, K.VERTEX_TO_4CYCLE, K.VERTEX_TO_K4)


# records ------------------------------------------------------------------------


def _edge_json(e: Edge):
    return [e.tail, e.head, *e.gain.as_tuple()]


def _edge_from(data) -> Edge:
    t, h, c, d, r = data
    return Edge(t, h, GroupElement(c, d, r))


@dataclass(frozen=True)
class MoveRecord:
    kind: MoveKind
    new_vertices: tuple
    small_edges: tuple = ()
    big_edges: tuple = ()
    switches: tuple = ()
    params: dict = field(default_factory=dict, compare=False)
    branch: "Construction | None" = field(default=None, compare=False)

    def inverse(self) -> "MoveRecord":
        return replace(self, kind=self.kind.inverse)

    def to_json(self) -> dict:
        out = {
            "kind": self.kind.value,
            "new_vertices": list(self.new_vertices),
            "small_edges": [_edge_json(e) for e in self.small_edges],
            "big_edges": [_edge_json(e) for e in self.big_edges],
            "switches": [[v, *g.as_tuple()] for v, g in self.switches],
            "params": self.params,
        }
        if self.branch is not None:
            out["branch"] = self.branch.to_json()
        return out

    @classmethod
    def from_json(cls, data) -> "MoveRecord":
        branch = data.get("branch")
        return cls(
            kind=MoveKind(data["kind"]),
            new_vertices=tuple(data["new_vertices"]),
            small_edges=tuple(_edge_from(e) for e in data["small_edges"]),
            big_edges=tuple(_edge_from(e) for e in data["big_edges"]),
            switches=tuple((v, GroupElement(c, d, r)) for v, c, d, r in data["switches"]),
            params=data.get("params", {}),
            branch=Construction.from_json(branch) if branch is not None else None,
        )


@dataclass
class Construction:
    """A base graph plus the extension records that rebuild a graph from it."""

    base: GainGraph
    moves: list

    def replay(self) -> GainGraph:
        g = self.base
        for rec in self.moves:
            g = apply_move(g, rec)
        return g

    def to_json(self) -> dict:
        return {"base": to_json(self.base), "moves": [r.to_json() for r in self.moves]}

    @classmethod
    def from_json(cls, data) -> "Construction":
        return cls(from_json(data["base"]), [MoveRecord.from_json(r) for r in data["moves"]])

    def to_jsonl(self) -> str:
        lines = [json.dumps({"base": to_json(self.base)})]
        lines += [json.dumps(r.to_json()) for r in self.moves]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "Construction":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or "base" not in rows[0]:
            raise ValueError("replay file must start with a base graph line")
        return cls(from_json(rows[0]["base"]), [MoveRecord.from_json(r) for r in rows[1:]])


def _remove(edges, targets):
    edges = list(edges)
    for e in targets:
        try:
            edges.remove(e)
        except ValueError:
            raise MoveError(f"edge {e} is not present") from None
    return edges


def apply_move(g: GainGraph, rec: MoveRecord) -> GainGraph:
    new = set(rec.new_vertices)
    if rec.kind.is_extension:
        big_n = g.n + len(new)
        up = [b for b in range(big_n) if b not in new]
        edges = [e.relabel(up.__getitem__) for e in g.edges]
        edges = _remove(edges, [e.relabel(up.__getitem__) for e in rec.small_edges])
        edges += list(rec.big_edges)
        out = GainGraph(g.group, big_n, edges)
        undo = [(v, gamma.inverse()) for v, gamma in reversed(rec.switches)]
        return switch_many(out, undo)
    switched = switch_many(g, rec.switches)
    edges = _remove(switched.edges, rec.big_edges)
    for e in edges:
        if e.tail in new or e.head in new:
            raise MoveError(f"edge {e} still touches a removed vertex")
    down = {}
    for b in range(g.n):
        if b not in new:
            down[b] = len(down)
    edges = [e.relabel(down.__getitem__) for e in edges] + list(rec.small_edges)
    return GainGraph(g.group, g.n - len(new), edges)


# extensions ---------------------------------------------------------------------


def _new_ids(g, count, at):
    if at is None:
        ids = tuple(range(g.n, g.n + count))
    else:
        ids = (at,) if isinstance(at, int) else tuple(at)
        if len(ids) != count or len(set(ids)) != count:
            raise ValueError(f"need {count} distinct positions for new vertices")
        if any(not 0 <= v < g.n + count for v in ids):
            raise ValueError("new vertex position out of range")
    new = set(ids)
    up = [b for b in range(g.n + count) if b not in new]
    return ids, up.__getitem__


def _check_vertex(g, v):
    if not 0 <= v < g.n:
        raise NotIncident(f"vertex {v} not in graph")


def _g(x):
    return GroupElement.coerce(x)


def _finish(g, kind, ids, small, big, params):
    big = tuple(e.canonical() for e in big)
    if len(set(big)) < len(big):
        # cheap early rejection; the full check happens in GainGraph
        raise DuplicateParallelGain(*[i for i, e in enumerate(big) if big.count(e) > 1][:2])
    rec = MoveRecord(kind, tuple(sorted(ids)), tuple(small), big, (), params)
    return apply_move(g, rec), rec


def zero_extension(g, v1, v2, gain1, gain2, at=None):
    _check_vertex(g, v1)
    _check_vertex(g, v2)
    (v0,), up = _new_ids(g, 1, at)
    big = [Edge(v0, up(v1), _g(gain1)), Edge(v0, up(v2), _g(gain2))]
    return _finish(g, MoveKind.ZERO_EXT, (v0,), (), big, {"v1": v1, "v2": v2})


def one_extension(g, removed_edge, v3, gain1, gain2, gain3, at=None):
    e = g.edges[removed_edge]
    _check_vertex(g, v3)
    gain1, gain2, gain3 = _g(gain1), _g(gain2), _g(gain3)
    path = gain1.inverse() * gain2
    ok = path == e.gain or (e.is_loop and path == e.gain.inverse())
    if not ok:
        raise GainConstraintViolated(f"gain1^-1 gain2 = {path} but the edge has {e.gain}")
    (v0,), up = _new_ids(g, 1, at)
    big = [Edge(v0, up(e.tail), gain1), Edge(v0, up(e.head), gain2), Edge(v0, up(v3), gain3)]
    params = {"edge": removed_edge, "v3": v3}
    return _finish(g, MoveKind.ONE_EXT, (v0,), (e,), big, params)


def loop_one_extension(g, v1, loop_gain, edge_gain, at=None):
    _check_vertex(g, v1)
    loop_gain = _g(loop_gain)
    if not loop_gain.r:
        raise LinearPartTrivial(f"loop gain {loop_gain} has trivial linear part")
    (v0,), up = _new_ids(g, 1, at)
    big = [Edge(v0, v0, loop_gain), Edge(v0, up(v1), _g(edge_gain))]
    return _finish(g, MoveKind.LOOP_ONE_EXT, (v0,), (), big, {"v1": v1})


def _far_end(g, idx, v):
    e = g.edges[idx]
    if v not in (e.tail, e.head) or e.is_loop:
        raise NotIncident(f"edge {idx} is not a non-loop edge at vertex {v}")
    return e.other(v), e.gain_from(v)


def _rerooted(g, idx, old, new, up, offset=IDENTITY):
    """Edge ``idx`` with its end(s) at ``old`` moved to the big-graph vertex ``new``.

    The new vertex sits over ``offset * old`` in the covering graph, so the
    moved edge's gain is multiplied by ``offset`` on the left (and conjugated
    for a loop).  With an identity offset the gain is unchanged.
    """
    e = g.edges[idx]
    if e.is_loop:
        return Edge(new, new, offset * e.gain * offset.inverse())
    return Edge(new, up(e.other(old)), offset * e.gain_from(old))


def _check_transfer(g, v, transfer, exclude):
    transfer = sorted(set(transfer))
    for idx in transfer:
        if idx in exclude or idx not in g.incident(v):
            raise NotIncident(f"edge {idx} cannot be transferred from vertex {v}")
    return transfer


def vertex_to_4cycle(g, v1, e12, e13, gain02, gain03, transfer=(), at=None):
    _check_vertex(g, v1)
    v2, m12 = _far_end(g, e12, v1)
    v3, m13 = _far_end(g, e13, v1)
    if v2 == v3:
        raise NotIncident("the two edges must reach distinct vertices")
    gain02, gain03 = _g(gain02), _g(gain03)
    if gain02.inverse() * gain03 != m12.inverse() * m13:
        raise GainConstraintViolated("4-cycle gain condition fails")
    transfer = _check_transfer(g, v1, transfer, {e12, e13})
    (v0,), up = _new_ids(g, 1, at)
    big = [Edge(v0, up(v2), gain02), Edge(v0, up(v3), gain03)]
    offset = gain02 * m12.inverse()
    big += [_rerooted(g, i, v1, v0, up, offset) for i in transfer]
    small = [g.edges[i] for i in transfer]
    params = {"v1": v1, "e12": e12, "e13": e13, "transfer": transfer}
    return _finish(g, MoveKind.VERTEX_TO_4CYCLE, (v0,), small, big, params)


def vertex_to_k4(g, v1, transfer=None, at=None):
    """Replace ``v1`` by an identity-gain K4.

    ``transfer`` maps an incident edge index to the corner (0..3, 0 being
    ``v1`` itself) receiving its end at ``v1``; a loop maps to a pair of
    corners, one per end.
    """
    _check_vertex(g, v1)
    transfer = dict(transfer or {})
    ids, up = _new_ids(g, 3, at)
    corners = [up(v1), *ids]
    big = [Edge(a, b, IDENTITY) for a, b in itertools.combinations(corners, 2)]
    small = []
    for idx, where in sorted(transfer.items()):
        if idx not in g.incident(v1):
            raise NotIncident(f"edge {idx} is not incident to vertex {v1}")
        e = g.edges[idx]
        if e.is_loop:
            a, b = where
            if a == 0 and b == 0:
                continue
            moved = Edge(corners[a], corners[b], e.gain)
        else:
            if where == 0:
                continue
            moved = Edge(corners[where], up(e.other(v1)), e.gain_from(v1))
        small.append(e)
        big.append(moved)
    params = {"v1": v1, "transfer": {str(k): v for k, v in sorted(transfer.items())}}
    return _finish(g, MoveKind.VERTEX_TO_K4, ids, small, big, params)


def edge_to_k3(g, e, gain1, gain2, transfer=(), at=None, v1=None):
    edge = g.edges[e]
    if edge.is_loop:
        raise LoopInput(f"edge {e} is a loop")
    v1 = edge.tail if v1 is None else v1
    v2, m = _far_end(g, e, v1)
    gain1, gain2 = _g(gain1), _g(gain2)
    if gain1.inverse() * gain2 != m:
        raise GainConstraintViolated("gain1^-1 gain2 must equal the split edge's gain")
    transfer = _check_transfer(g, v1, transfer, {e})
    (v0,), up = _new_ids(g, 1, at)
    big = [Edge(v0, up(v1), gain1), Edge(v0, up(v2), gain2)]
    big += [_rerooted(g, i, v1, v0, up, gain1) for i in transfer]
    small = [g.edges[i] for i in transfer]
    params = {"edge": e, "v1": v1, "transfer": transfer}
    return _finish(g, MoveKind.EDGE_TO_K3, (v0,), small, big, params)


def edge_join(g1, g2, v1, v2, gain):
    if g1.group is not g2.group:
        raise MoveError("edge-join needs graphs over the same group")
    _check_vertex(g1, v1)
    _check_vertex(g2, v2)
    shift = g1.n
    ids = tuple(range(shift, shift + g2.n))
    big = [Edge(e.tail + shift, e.head + shift, e.gain) for e in g2.edges]
    big.append(Edge(v1, v2 + shift, _g(gain)))
    rec = MoveRecord(MoveKind.EDGE_JOIN, ids, (), tuple(e.canonical() for e in big), (),
                     {"v1": v1, "v2": v2}, Construction(g2, []))
    return apply_move(g1, rec), rec


# base graphs ---------------------------------------------------------------------


def k1(group=Group.Z2) -> GainGraph:
    return GainGraph(group, 1, [])


def k1_loop(gain, group=Group.Z2XCS) -> GainGraph:
    return GainGraph(group, 1, [(0, 0, gain)])


def k4_plus_e(a=0, b=1, gain=(0, 0, 1), group=Group.CS) -> GainGraph:
    edges = [(i, j, IDENTITY) for i, j in itertools.combinations(range(4), 2)]
    edges.append((a, b, gain))
    return GainGraph(group, 4, edges)


def _has_balanced_k4(g, vertices):
    """Is there one edge per pair of ``vertices`` forming a balanced K4?"""
    for choice in _k4_choices(g, vertices):
        if is_balanced(g, choice):
            return True
    return False


def _k4_choices(g, vertices):
    per_pair = []
    for a, b in itertools.combinations(sorted(vertices), 2):
        between = [i for i in g.incident(a) if g.edges[i].other(a) == b and a != b]
        if not between:
            return
        per_pair.append(between)
    for choice in itertools.product(*per_pair):
        yield list(choice)


def is_base(g: GainGraph, setting: Setting) -> bool:
    if setting.group is Group.Z2:
        return g.n == 1 and g.m == 0
    one_loop = g.n == 1 and g.m == 1 and g.edges[0].gain.r
    if setting.group is Group.Z2XCS:
        return one_loop
    if one_loop:
        return True
    if g.n == 4 and g.m == 7 and not any(e.is_loop for e in g.edges):
        return _has_balanced_k4(g, range(4)) and not is_balanced(g)
    return False


# reductions ----------------------------------------------------------------------


def _down_map(n, removed):
    removed = set(removed)
    out = {}
    for b in range(n):
        if b not in removed:
            out[b] = len(out)
    return out


def _merge(g, switched, removed, keep, kind, switches, params, drop=()):
    """Delete the ``removed`` vertices, re-rooting their surviving edges at ``keep``.

    ``removed`` maps each deleted vertex to the vertex that absorbs it.
    ``drop`` lists edge ids (valid in both graphs) that simply disappear.
    """
    down = _down_map(g.n, removed)
    big, small = [], []
    drop = set(drop)
    touched = sorted({i for v in removed for i in switched.incident(v)} | drop)
    for idx in touched:
        e = switched.edges[idx]
        big.append(e)
        if idx in drop:
            continue
        t = removed.get(e.tail, e.tail)
        h = removed.get(e.head, e.head)
        small.append(Edge(down[t], down[h], e.gain).canonical())
    rec = MoveRecord(kind, tuple(sorted(removed)), tuple(small), tuple(big),
                     tuple(switches), params)
    return rec


def _attempt(g, rec, out):
    try:
        out.append((rec, apply_move(g, rec)))
    except (GainGraphError, MoveError):
        pass


def _k4_candidates(g, v, out):
    nbrs = sorted(g.neighbours(v))
    for trio in itertools.combinations(nbrs, 3):
        quad = sorted((v, *trio))
        for choice in _k4_choices(g, quad):
            if not is_balanced(g, choice):
                continue
            keep = quad[0]
            potential = {keep: IDENTITY}
            frontier = [keep]
            while frontier:
                u = frontier.pop()
                for i in choice:
                    e = g.edges[i]
                    if u in (e.tail, e.head):
                        w = e.other(u)
                        if w not in potential:
                            potential[w] = potential[u] * e.gain_from(u)
                            frontier.append(w)
            switches = [(x, potential[x]) for x in quad[1:] if not potential[x].is_identity]
            switched = switch_many(g, switches)
            removed = {x: keep for x in quad[1:]}
            rec = _merge(g, switched, removed, keep, MoveKind.K4_TO_VERTEX, switches,
                         {"k4": quad, "edges": choice}, drop=choice)
            _attempt(g, rec, out)


def _four_cycle_candidates(g, v, out):
    """Merge ``v`` into a vertex u closing a 4-cycle v-w2-u-w3 with matching gains."""
    plain = [i for i in g.incident(v) if not g.edges[i].is_loop]
    for e02, e03 in itertools.combinations(plain, 2):
        w2, m02 = _far_end(g, e02, v)
        w3, m03 = _far_end(g, e03, v)
        if w2 == w3:
            continue
        target = m02.inverse() * m03
        for u in sorted((g.neighbours(w2) & g.neighbours(w3)) - {v, w2, w3}):
            for e12 in g.incident(u):
                if g.edges[e12].is_loop or g.edges[e12].other(u) != w2:
                    continue
                m12 = g.edges[e12].gain_from(u)
                for e13 in g.incident(u):
                    if g.edges[e13].is_loop or g.edges[e13].other(u) != w3:
                        continue
                    m13 = g.edges[e13].gain_from(u)
                    if m12.inverse() * m13 != target:
                        continue
                    delta = m12 * m02.inverse()
                    switches = [(v, delta)] if not delta.is_identity else []
                    switched = switch_many(g, switches)
                    rec = _merge(g, switched, {v: u}, u, MoveKind.FOUR_CYCLE_TO_VERTEX,
                                 switches, {"v0": v, "v1": u, "e02": e02, "e03": e03,
                                            "e12": e12, "e13": e13}, drop=(e02, e03))
                    _attempt(g, rec, out)


def _k3_candidates(g, x, out):
    """Contract an edge x-u lying in a triangle x-u-w, deleting x."""
    plain = [i for i in g.incident(x) if not g.edges[i].is_loop]
    for e1 in plain:
        u, m1 = _far_end(g, e1, x)
        for e2 in plain:
            if e2 == e1:
                continue
            w, m2 = _far_end(g, e2, x)
            if w == u:
                continue
            want = m1.inverse() * m2
            for e in g.incident(u):
                edge = g.edges[e]
                if edge.is_loop or edge.other(u) != w or edge.gain_from(u) != want:
                    continue
                delta = m1.inverse()
                switches = [(x, delta)] if not delta.is_identity else []
                switched = switch_many(g, switches)
                rec = _merge(g, switched, {x: u}, u, MoveKind.K3_TO_EDGE, switches,
                             {"v0": x, "v1": u, "v2": w, "e1": e1, "e2": e2, "e": e},
                             drop=(e1, e2))
                _attempt(g, rec, out)


def candidate_reductions(g: GainGraph, setting: Setting, v: int) -> list:
    """Every inverse move of the setting's construction applicable at ``v``.

    Returned in preference order as ``(record, smaller graph)`` pairs; each
    smaller graph has passed gain-graph validation, not yet the tightness
    checker.
    """
    deg = g.degree(v)
    if deg not in (2, 3):
        raise WrongDegree(f"vertex {v} has degree {deg}")
    allowed = allowed_moves(setting)
    out = []
    inc = list(g.incident(v))
    loops = [i for i in inc if g.edges[i].is_loop]
    down = _down_map(g.n, [v])
    if deg == 2 and not loops:
        rec = MoveRecord(MoveKind.ZERO_RED, (v,), (), tuple(g.edges[i] for i in inc),
                         (), {"v0": v})
        _attempt(g, rec, out)
    if deg == 3 and len(loops) == 1 and MoveKind.LOOP_ONE_EXT in allowed:
        if g.edges[loops[0]].gain.r:
            rec = MoveRecord(MoveKind.LOOP_ONE_RED, (v,), (),
                             tuple(g.edges[i] for i in inc), (), {"v0": v})
            _attempt(g, rec, out)
    if deg == 3 and not loops:
        ends = [_far_end(g, i, v) for i in inc]
        for a, b in itertools.combinations(range(3), 2):
            (wa, ga), (wb, gb) = ends[a], ends[b]
            gain = ga.inverse() * gb
            if wa == wb and gain.is_identity:
                continue
            added = Edge(down[wa], down[wb], gain).canonical()
            rec = MoveRecord(MoveKind.ONE_RED, (v,), (added,),
                             tuple(g.edges[i] for i in inc), (),
                             {"v0": v, "pair": [inc[a], inc[b]]})
            _attempt(g, rec, out)
    if MoveKind.VERTEX_TO_K4 in allowed:
        _k4_candidates(g, v, out)
    if MoveKind.VERTEX_TO_4CYCLE in allowed:
        _four_cycle_candidates(g, v, out)
    if MoveKind.EDGE_TO_K3 in allowed:
        _k3_candidates(g, v, out)
        for u in sorted(g.neighbours(v)):
            _k3_candidates_into(g, u, v, out)
    return out


def _k3_candidates_into(g, x, keep, out):
    found = []
    _k3_candidates(g, x, found)
    out.extend(item for item in found if item[0].params["v1"] == keep)


def _bridges(g):
    out = []
    for idx, e in enumerate(g.edges):
        if e.is_loop:
            continue
        seen = {e.tail}
        stack = [e.tail]
        while stack:
            u = stack.pop()
            for j in g.incident(u):
                if j == idx:
                    continue
                w = g.edges[j].other(u)
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if e.head not in seen:
            out.append((idx, seen))
    return out


def _edge_split(g, idx, side):
    """Detach the side of bridge ``idx`` that does not contain vertex 0."""
    part = sorted(side) if 0 not in side else sorted(set(range(g.n)) - side)
    members = set(part)
    local = {v: i for i, v in enumerate(part)}
    part_edges = [i for i, e in enumerate(g.edges) if e.tail in members and e.head in members]
    piece = GainGraph(g.group, len(part),
                      [Edge(local[g.edges[i].tail], local[g.edges[i].head], g.edges[i].gain)
                       for i in part_edges])
    big = tuple(g.edges[i] for i in sorted(part_edges + [idx]))
    bridge = g.edges[idx]
    inner = bridge.tail if bridge.tail not in members else bridge.head
    rec = MoveRecord(MoveKind.EDGE_SPLIT, tuple(part), (), big, (),
                     {"bridge": idx, "v1": inner}, Construction(piece, []))
    return rec


def reduce_once(g: GainGraph, setting: Setting, check: bool = True):
    """One tightness-preserving reduction, chosen by generate-and-test."""
    if g.group is not setting.group:
        raise ValueError(f"graph group {g.group} does not match setting {setting}")
    if is_base(g, setting):
        raise AlreadyBase("graph is already a base graph")
    if check and not check_tight(g).tight:
        raise NotTight("input graph is not tight for the setting")
    if setting.group is Group.CS:
        for idx, side in _bridges(g):
            rec = _edge_split(g, idx, side)
            smaller = apply_move(g, rec)
            if check_tight(smaller).tight and check_tight(rec.branch.base).tight:
                return smaller, rec
    for v in range(g.n):
        if g.degree(v) not in (2, 3):
            continue
        for rec, smaller in candidate_reductions(g, setting, v):
            if check_tight(smaller).tight:
                return smaller, rec
    # contractions away from low-degree vertices
    allowed = allowed_moves(setting)
    for x in range(g.n):
        found = []
        if MoveKind.EDGE_TO_K3 in allowed:
            _k3_candidates(g, x, found)
        if MoveKind.VERTEX_TO_4CYCLE in allowed:
            _four_cycle_candidates(g, x, found)
        for rec, smaller in found:
            if check_tight(smaller).tight:
                return smaller, rec
    raise NoAdmissibleReduction(g, setting)


def reduce_to_base(g: GainGraph, setting: Setting) -> list:
    """Reduction records taking ``g`` to a base graph of the setting."""
    if not check_tight(g).tight:
        raise NotTight("input graph is not tight for the setting")
    records = []
    while not is_base(g, setting):
        g, rec = reduce_once(g, setting, check=False)
        if rec.kind is MoveKind.EDGE_SPLIT:
            piece = rec.branch.base
            rec = replace(rec, branch=reduce_to_construction(piece, setting))
        records.append(rec)
    return records


def reduce_to_construction(g: GainGraph, setting: Setting) -> Construction:
    records = reduce_to_base(g, setting)
    base = g
    for rec in records:
        base = apply_move(base, rec)
    return Construction(base, [r.inverse() for r in reversed(records)])


# random generation -------------------------------------------------------------


def _random_gain(rng, group, reflect=None):
    c = d = 0
    if group.has_translations:
        c, d = rng.randint(-2, 2), rng.randint(-2, 2)
    r = False
    if group.has_reflection:
        r = bool(rng.getrandbits(1)) if reflect is None else reflect
    return GroupElement(c, d, r)


def random_base(setting: Setting, rng) -> GainGraph:
    group = setting.group
    if group is Group.Z2:
        return k1(group)
    if group is Group.Z2XCS:
        return k1_loop(_random_gain(rng, group, reflect=True), group)
    if rng.random() < 0.5:
        return k1_loop(GroupElement(0, 0, True), group)
    a, b = sorted(rng.sample(range(4), 2))
    return k4_plus_e(a, b, GroupElement(0, 0, True), group)


def _subset(rng, items):
    return [x for x in items if rng.random() < 0.5]


def _sample_move(kind, g, setting, rng, room):
    group = g.group
    K = MoveKind
    n = g.n
    if kind is K.ZERO_EXT:
        return zero_extension(g, rng.randrange(n), rng.randrange(n),
                              _random_gain(rng, group), _random_gain(rng, group))
    if kind is K.ONE_EXT:
        idx = rng.randrange(g.m)
        g1 = _random_gain(rng, group)
        return one_extension(g, idx, rng.randrange(n), g1, g1 * g.edges[idx].gain,
                             _random_gain(rng, group))
    if kind is K.LOOP_ONE_EXT:
        return loop_one_extension(g, rng.randrange(n), _random_gain(rng, group, True),
                                  _random_gain(rng, group))
    if kind is K.VERTEX_TO_4CYCLE:
        v1 = rng.randrange(n)
        plain = [i for i in g.incident(v1) if not g.edges[i].is_loop]
        if len(plain) < 2:
            raise NotIncident("not enough edges")
        e12, e13 = rng.sample(plain, 2)
        _, m12 = _far_end(g, e12, v1)
        _, m13 = _far_end(g, e13, v1)
        g02 = _random_gain(rng, group)
        rest = [i for i in g.incident(v1) if i not in (e12, e13)]
        return vertex_to_4cycle(g, v1, e12, e13, g02, g02 * m12.inverse() * m13,
                                _subset(rng, rest))
    if kind is K.VERTEX_TO_K4:
        v1 = rng.randrange(n)
        transfer = {}
        for i in g.incident(v1):
            if g.edges[i].is_loop:
                transfer[i] = (rng.randrange(4), rng.randrange(4))
            else:
                transfer[i] = rng.randrange(4)
        return vertex_to_k4(g, v1, transfer)
    if kind is K.EDGE_TO_K3:
        plain = [i for i, e in enumerate(g.edges) if not e.is_loop]
        idx = rng.choice(plain)
        e = g.edges[idx]
        v1 = rng.choice((e.tail, e.head))
        g1 = _random_gain(rng, group)
        rest = [i for i in g.incident(v1) if i != idx]
        return edge_to_k3(g, idx, g1, g1 * e.gain_from(v1), _subset(rng, rest), v1=v1)
    if kind is K.EDGE_JOIN:
        options = [k1_loop(GroupElement(0, 0, True), group)]
        if room >= 4:
            a, b = sorted(rng.sample(range(4), 2))
            options.append(k4_plus_e(a, b, GroupElement(0, 0, True), group))
        partner = rng.choice(options)
        return edge_join(g, partner, rng.randrange(n), rng.randrange(partner.n),
                         _random_gain(rng, group))
    raise ValueError(kind)


_GROWTH = {MoveKind.VERTEX_TO_K4: 3, MoveKind.EDGE_JOIN: 1}


def _feasible(kind, g, room):
    if room < _GROWTH.get(kind, 1):
        return False
    if kind is MoveKind.ONE_EXT:
        return g.m > 0
    if kind is MoveKind.EDGE_TO_K3:
        return any(not e.is_loop for e in g.edges)
    if kind is MoveKind.VERTEX_TO_4CYCLE:
        return any(len(g.neighbours(v)) >= 2 for v in range(g.n))
    return True


def random_construction(setting: Setting, n_moves: int, seed, max_vertices: int = 14):
    """Random construction from a base graph using the setting's moves.

    Stops early only if no move fits under ``max_vertices``.
    """
    if n_moves < 0:
        raise ValueError("n_moves must be non-negative")
    rng = random.Random(seed)
    base = random_base(setting, rng)
    g = base
    records = []
    kinds = allowed_moves(setting)
    for _ in range(n_moves):
        room = max_vertices - g.n
        pool = [k for k in kinds if _feasible(k, g, room)]
        done = False
        while pool and not done:
            kind = rng.choice(pool)
            for _attempt_no in range(MAX_DRAWS):
                try:
                    g2, rec = _sample_move(kind, g, setting, rng, room)
                except (MoveError, GainGraphError):
                    continue
                if g2.n <= max_vertices:
                    g, done = g2, True
                    records.append(rec)
                    break
            else:
                pool.remove(kind)
        if not done:
            break
    return Construction(base, records), g


def random_tight_graph(setting: Setting, n_moves: int, seed, max_vertices: int = 14):
    construction, g = random_construction(setting, n_moves, seed, max_vertices)
    return g, construction.moves
