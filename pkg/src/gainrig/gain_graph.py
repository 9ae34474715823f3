"""Quotient gain graphs over Z^2 x| Cs and its subgroups.

An edge ``(i, j; m)`` joins the vertex ``i`` to the translate ``m * j`` in the
derived (covering) graph.  Graphs are immutable; every operation returns a
new, validated graph.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

from .symmetry_groups import IDENTITY, Group, GroupElement


class GainGraphError(ValueError):
    """Base class for rejected gain graphs."""


class VertexOutOfRange(GainGraphError):
    def __init__(self, edge_index, vertex, n):
        super().__init__(f"edge {edge_index}: vertex {vertex} not in 0..{n - 1}")
        self.edge_index = edge_index


class IdentityLoop(GainGraphError):
    def __init__(self, edge_index):
        super().__init__(f"edge {edge_index} is a loop with identity gain")
        self.edge_index = edge_index


class DuplicateParallelGain(GainGraphError):
    def __init__(self, first, second):
        super().__init__(f"edges {first} and {second} are parallel with equal gains")
        self.pair = (first, second)


class GainOutsideGroup(GainGraphError):
    def __init__(self, edge_index, gain, group):
        where = "switch" if edge_index is None else f"edge {edge_index}"
        super().__init__(f"{where}: gain {gain} is not in {group}")
        self.edge_index = edge_index


class BrokenWalk(GainGraphError):
    pass


class ParseError(GainGraphError):
    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class Edge:
    tail: int
    head: int
    gain: GroupElement

    @property
    def is_loop(self) -> bool:
        return self.tail == self.head

    def reversed(self) -> "Edge":
        return Edge(self.head, self.tail, self.gain.inverse())

    def canonical(self) -> "Edge":
        """Tail <= head; a loop keeps the smaller of its gain and its inverse."""
        if self.tail > self.head:
            return self.reversed()
        if self.is_loop:
            inv = self.gain.inverse()
            if inv < self.gain:
                return Edge(self.tail, self.head, inv)
        return self

    def gain_from(self, v: int) -> GroupElement:
        """Gain of the edge read as leaving ``v``."""
        if v == self.tail:
            return self.gain
        if v == self.head:
            return self.gain.inverse()
        raise ValueError(f"vertex {v} not on edge {self}")

    def other(self, v: int) -> int:
        return self.head if v == self.tail else self.tail

    def relabel(self, mapping) -> "Edge":
        return Edge(mapping(self.tail), mapping(self.head), self.gain).canonical()

    def __str__(self):
        return f"({self.tail},{self.head};{self.gain})"


def _as_edge(raw) -> Edge:
    if isinstance(raw, Edge):
        return raw
    t, h, gain = raw
    return Edge(int(t), int(h), GroupElement.coerce(gain))


class GainGraph:
    """A validated gain graph.

    Edges are stored in canonical orientation (tail <= head) in the order
    given; edge indices are positions in that list.
    """

    __slots__ = ("group", "n", "edges", "_incidence", "_hash")

    def __init__(self, group, n: int, edges: Iterable = ()):
        group = group if isinstance(group, Group) else Group.parse(group)
        n = int(n)
        if n < 0:
            raise GainGraphError("negative vertex count")
        canon = []
        seen = {}
        for idx, raw in enumerate(edges):
            e = _as_edge(raw)
            for v in (e.tail, e.head):
                if not 0 <= v < n:
                    raise VertexOutOfRange(idx, v, n)
            if not group.contains(e.gain):
                raise GainOutsideGroup(idx, e.gain, group)
            if e.is_loop and e.gain.is_identity:
                raise IdentityLoop(idx)
            e = e.canonical()
            if e in seen:
                raise DuplicateParallelGain(seen[e], idx)
            seen[e] = idx
            canon.append(e)
        self.group = group
        self.n = n
        self.edges = tuple(canon)
        inc = [[] for _ in range(n)]
        for idx, e in enumerate(self.edges):
            inc[e.tail].append(idx)
            if not e.is_loop:
                inc[e.head].append(idx)
        self._incidence = tuple(tuple(x) for x in inc)
        self._hash = None

    # basic structure -----------------------------------------------------

    @property
    def m(self) -> int:
        return len(self.edges)

    def incident(self, v: int) -> tuple:
        return self._incidence[v]

    def degree(self, v: int) -> int:
        return sum(2 if self.edges[i].is_loop else 1 for i in self._incidence[v])

    def loops_at(self, v: int) -> list:
        return [i for i in self._incidence[v] if self.edges[i].is_loop]

    def neighbours(self, v: int) -> set:
        return {self.edges[i].other(v) for i in self._incidence[v]} - {v}

    def pairs(self) -> list:
        return [(e.tail, e.head) for e in self.edges]

    def support(self, edge_ids) -> set:
        out = set()
        for i in edge_ids:
            out.add(self.edges[i].tail)
            out.add(self.edges[i].head)
        return out

    def with_edges(self, edges, n=None) -> "GainGraph":
        return GainGraph(self.group, self.n if n is None else n, edges)

    def canonical_key(self):
        return (self.group.value, self.n,
                tuple(sorted((e.tail, e.head, e.gain) for e in self.edges)))

    def same_as(self, other: "GainGraph") -> bool:
        """Equality up to edge order."""
        return self.canonical_key() == other.canonical_key()

    def __eq__(self, other):
        if not isinstance(other, GainGraph):
            return NotImplemented
        return (self.group, self.n, self.edges) == (other.group, other.n, other.edges)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.group, self.n, self.edges))
        return self._hash

    def __repr__(self):
        body = ", ".join(str(e) for e in self.edges)
        return f"GainGraph({self.group.value}, n={self.n}, [{body}])"


def validate(group, n, edges) -> GainGraph:
    return GainGraph(group, n, edges)


# walks and switching ---------------------------------------------------------


def net_gain(g: GainGraph, start: int, steps: Sequence = ()) -> GroupElement:
    """Net gain of the walk leaving ``start`` along ``steps``.

    Each step is ``(edge_index, alpha)`` with ``alpha = +1`` for a traversal
    from tail to head and ``-1`` for the reverse.
    """
    here = start
    total = IDENTITY
    for idx, alpha in steps:
        e = g.edges[idx]
        if alpha == 1:
            if here != e.tail:
                raise BrokenWalk(f"edge {idx} does not leave vertex {here} forwards")
            here = e.head
            total = total * e.gain
        elif alpha == -1:
            if here != e.head:
                raise BrokenWalk(f"edge {idx} does not leave vertex {here} backwards")
            here = e.tail
            total = total * e.gain.inverse()
        else:
            raise BrokenWalk(f"direction flag must be +1 or -1, got {alpha}")
    return total


def switch(g: GainGraph, v: int, gamma) -> GainGraph:
    gamma = GroupElement.coerce(gamma)
    if not g.group.contains(gamma):
        raise GainOutsideGroup(None, gamma, g.group)
    if gamma.is_identity:
        return g
    inv = gamma.inverse()
    edges = []
    for e in g.edges:
        if e.is_loop and e.tail == v:
            e = Edge(v, v, gamma * e.gain * inv)
        elif e.tail == v:
            e = Edge(e.tail, e.head, gamma * e.gain)
        elif e.head == v:
            e = Edge(e.tail, e.head, e.gain * inv)
        edges.append(e)
    return g.with_edges(edges)


def switch_many(g: GainGraph, switches) -> GainGraph:
    for v, gamma in switches:
        g = switch(g, v, gamma)
    return g


def spanning_forest(g: GainGraph, edge_ids=None):
    """BFS forest of the subgraph on ``edge_ids`` (all edges by default).

    Returns ``(potential, tree_edges)`` where ``potential[v]`` is the net gain
    of the tree path from the root of v's component to v.
    """
    allowed = set(range(g.m)) if edge_ids is None else set(edge_ids)
    vertices = range(g.n) if edge_ids is None else sorted(g.support(allowed))
    potential = {}
    tree = set()
    for root in vertices:
        if root in potential:
            continue
        potential[root] = IDENTITY
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for idx in g.incident(u):
                if idx not in allowed:
                    continue
                e = g.edges[idx]
                w = e.other(u)
                if w in potential:
                    continue
                potential[w] = potential[u] * e.gain_from(u)
                tree.add(idx)
                queue.append(w)
    return potential, tree


def fundamental_cycle_gains(g: GainGraph, edge_ids=None) -> list:
    potential, tree = spanning_forest(g, edge_ids)
    ids = range(g.m) if edge_ids is None else sorted(edge_ids)
    out = []
    for idx in ids:
        if idx in tree:
            continue
        e = g.edges[idx]
        out.append((idx, potential[e.tail] * e.gain * potential[e.head].inverse()))
    return out


def is_balanced(g: GainGraph, edge_ids=None) -> bool:
    return all(x.is_identity for _, x in fundamental_cycle_gains(g, edge_ids))


def is_purely_periodic(g: GainGraph, edge_ids=None) -> bool:
    # reflection parts form a homomorphism onto Z/2, so parities along a
    # spanning forest decide the question without full group products
    allowed = set(range(g.m)) if edge_ids is None else set(edge_ids)
    parity = {}
    for root in sorted(g.support(allowed)):
        if root in parity:
            continue
        parity[root] = False
        stack = [root]
        while stack:
            u = stack.pop()
            for idx in g.incident(u):
                if idx not in allowed:
                    continue
                e = g.edges[idx]
                w = e.other(u)
                want = parity[u] != e.gain.r
                if w not in parity:
                    parity[w] = want
                    stack.append(w)
                elif parity[w] != want:
                    return False
    return True


def spanning_tree_normalize(g: GainGraph):
    """Switch so that every edge of the BFS spanning forest has identity gain.

    Returns the new graph and the list of ``(vertex, gamma)`` switches that
    produced it.
    """
    potential, _ = spanning_forest(g)
    log = [(v, potential[v]) for v in sorted(potential) if not potential[v].is_identity]
    return switch_many(g, log), log


# derived graph -----------------------------------------------------------------


def derived_graph(g: GainGraph, window: int, include_reflection: bool = False):
    """Finite piece of the covering graph, as a networkx graph.

    Nodes are ``(vertex, GroupElement)`` pairs with translations bounded by
    ``window``.  Reflected copies are added only when asked for.
    """
    import networkx as nx

    if window < 0:
        raise ValueError("window must be non-negative")
    span = range(-window, window + 1) if g.group.has_translations else (0,)
    flips = (False, True) if include_reflection and g.group.has_reflection else (False,)
    elements = [GroupElement(c, d, r) for c in span for d in span for r in flips]
    members = set(elements)
    out = nx.Graph()
    for v in range(g.n):
        for h in elements:
            out.add_node((v, h))
    for e in g.edges:
        for h in elements:
            other = h * e.gain
            if other in members:
                out.add_edge((e.tail, h), (e.head, other))
    return out


# text format -----------------------------------------------------------------


def parse(text: str):
    """Parse the line format.  Returns ``(graph, points)``; points may be empty."""
    group = None
    n = None
    edges = []
    points = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        key = words[0]
        try:
            if group is None:
                if key != "group" or len(words) != 2:
                    raise ParseError(line_no, "expected 'group Z2|Cs|Z2xCs'")
                group = Group.parse(words[1])
            elif n is None:
                if key != "vertices" or len(words) != 2:
                    raise ParseError(line_no, "expected 'vertices <n>'")
                n = int(words[1])
            elif key == "edge":
                if len(words) != 6:
                    raise ParseError(line_no, "expected 'edge <tail> <head> <c> <d> <r>'")
                t, h, c, d, r = (int(w) for w in words[1:])
                if r not in (0, 1):
                    raise ParseError(line_no, "reflection flag must be 0 or 1")
                edges.append((line_no, Edge(t, h, GroupElement(c, d, r))))
            elif key == "point":
                if len(words) != 4:
                    raise ParseError(line_no, "expected 'point <vertex> <x> <y>'")
                points[int(words[1])] = (float(words[2]), float(words[3]))
            else:
                raise ParseError(line_no, f"unknown keyword {key!r}")
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(line_no, str(exc)) from None
    if group is None or n is None:
        raise ParseError(0, "missing header")
    try:
        graph = GainGraph(group, n, [e for _, e in edges])
    except GainGraphError as exc:
        idx = getattr(exc, "edge_index", None)
        if idx is None and hasattr(exc, "pair"):
            idx = exc.pair[1]
        line_no = edges[idx][0] if idx is not None else 0
        raise ParseError(line_no, str(exc)) from None
    for v in points:
        if not 0 <= v < n:
            raise ParseError(0, f"point for unknown vertex {v}")
    return graph, points


def serialize(g: GainGraph, points=None) -> str:
    lines = [f"group {g.group.value}", f"vertices {g.n}"]
    for e in g.edges:
        lines.append(f"edge {e.tail} {e.head} {e.gain.c} {e.gain.d} {int(e.gain.r)}")
    if points is not None:
        for v in range(len(points)):
            x, y = points[v]
            lines.append(f"point {v} {float(x)!r} {float(y)!r}")
    return "\n".join(lines) + "\n"


def to_json(g: GainGraph) -> dict:
    return {
        "group": g.group.value,
        "n": g.n,
        "edges": [[e.tail, e.head, *e.gain.as_tuple()] for e in g.edges],
    }


def from_json(data) -> GainGraph:
    return GainGraph(
        data["group"], data["n"], [(t, h, (c, d, r)) for t, h, c, d, r in data["edges"]]
    )
