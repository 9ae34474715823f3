"""(k,l)-sparsity certificates and the gain-restricted tightness conditions.

Three routes are provided and are kept independent of each other:

* :func:`pebble_check` -- the (k,l) pebble game, with a witness extracted
  from the failed pebble search;
* :func:`brute_force_check` -- enumeration of every edge subset;
* :func:`restricted_maximal_subgraphs` -- potential-function enumeration of
  the edge-maximal balanced or purely periodic subgraphs.

The gain checkers default to an induced-subset scan that relies on the
(2,1) pebble game having passed; ``method="potentials"`` switches to the
maximal-subgraph route instead.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .gain_graph import GainGraph, is_balanced, is_purely_periodic
from .symmetry_groups import IDENTITY, Group


class SparsityError(ValueError):
    pass


class UnsupportedCount(SparsityError):
    def __init__(self, k, l):
        super().__init__(f"pebble game needs 0 <= l <= 2k-1, got (k,l)=({k},{l})")


class TooLarge(SparsityError):
    pass


class WrongGroup(SparsityError):
    pass


class Status(str, enum.Enum):
    TIGHT = "Tight"
    SPARSE = "SparseNotTight"
    VIOLATION = "Violation"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SparsityVerdict:
    status: Status
    witness: frozenset | None
    condition: str

    @property
    def tight(self) -> bool:
        return self.status is Status.TIGHT

    def to_json(self) -> dict:
        return {
            "status": self.status.value,
            "witness_edges": sorted(self.witness) if self.witness is not None else [],
            "condition": self.condition,
        }


def _pairs(g, edge_ids=None):
    """Return ``(n, [(u, v), ...])`` for a gain graph or an ``(n, pairs)`` tuple."""
    if isinstance(g, GainGraph):
        pairs = g.pairs()
        n = g.n
    else:
        n, pairs = g
        pairs = [tuple(p) for p in pairs]
    if edge_ids is not None:
        pairs = [pairs[i] for i in edge_ids]
    return n, pairs


def _final(n_edges, n_vertices, k, l, condition):
    if n_edges == k * n_vertices - l:
        return SparsityVerdict(Status.TIGHT, None, condition)
    return SparsityVerdict(Status.SPARSE, None, condition)


# pebble game -------------------------------------------------------------------


class _PebbleGame:
    def __init__(self, n, k, l):
        self.k, self.l = k, l
        self.pebbles = [k] * n
        self.out = [dict() for _ in range(n)]  # v -> {edge id: head}

    def _find(self, start, blocked):
        """Move one pebble to ``start`` along a reversed path, if possible."""
        seen = set(blocked)
        seen.add(start)
        parent = {}
        stack = [start]
        while stack:
            u = stack.pop()
            for eid, w in self.out[u].items():
                if w in seen:
                    continue
                seen.add(w)
                parent[w] = (u, eid)
                if self.pebbles[w] > 0:
                    # reverse the path start -> ... -> w
                    self.pebbles[w] -= 1
                    self.pebbles[start] += 1
                    x = w
                    while x != start:
                        u2, e2 = parent[x]
                        del self.out[u2][e2]
                        self.out[x][e2] = u2
                        x = u2
                    return True
                stack.append(w)
        return False

    def _reach(self, sources):
        seen = set(sources)
        stack = list(sources)
        while stack:
            u = stack.pop()
            for w in self.out[u].values():
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return seen

    def insert(self, eid, u, v):
        """Try to accept edge ``eid``; return None or the blocking vertex set."""
        need = self.l + 1
        if u == v:
            while self.pebbles[u] < need:
                if not self._find(u, ()):
                    return self._reach([u])
        else:
            while self.pebbles[u] + self.pebbles[v] < need:
                if not (self._find(u, (v,)) or self._find(v, (u,))):
                    return self._reach([u, v])
        src = u if self.pebbles[u] > 0 else v
        self.pebbles[src] -= 1
        self.out[src][eid] = v if src == u else u
        return None


def pebble_check(g, k: int, l: int, edge_ids=None) -> SparsityVerdict:
    """(k,l) pebble game on the multigraph underlying ``g`` (gains ignored).

    Witness edge ids refer to the edge list of ``g``.
    """
    if not (k >= 1 and 0 <= l <= 2 * k - 1):
        raise UnsupportedCount(k, l)
    n, pairs = _pairs(g)
    ids = list(range(len(pairs))) if edge_ids is None else sorted(edge_ids)
    condition = f"({k},{l})-tight"
    game = _PebbleGame(n, k, l)
    accepted = []
    for eid in ids:
        u, v = pairs[eid]
        blocked = game.insert(eid, u, v)
        if blocked is not None:
            witness = [i for i in accepted if pairs[i][0] in blocked and pairs[i][1] in blocked]
            return SparsityVerdict(Status.VIOLATION, frozenset(witness + [eid]), condition)
        accepted.append(eid)
    if edge_ids is None:
        n_vertices = n
    else:
        n_vertices = len({x for i in ids for x in pairs[i]})
    return _final(len(ids), n_vertices, k, l, condition)


# brute force ---------------------------------------------------------------------

BRUTE_FORCE_LIMIT = 22


def brute_force_check(g, k: int, l: int) -> SparsityVerdict:
    """Enumerate every non-empty edge subset and test the count directly."""
    n, pairs = _pairs(g)
    m = len(pairs)
    if m > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"{m} edges exceeds the brute-force limit {BRUTE_FORCE_LIMIT}")
    condition = f"({k},{l})-tight"
    for mask in range(1, 1 << m):
        chosen = [i for i in range(m) if mask >> i & 1]
        verts = {x for i in chosen for x in pairs[i]}
        if len(chosen) > k * len(verts) - l:
            return SparsityVerdict(Status.VIOLATION, frozenset(chosen), condition)
    return _final(m, n, k, l, condition)


def count_violated(g, edge_ids, k, l) -> bool:
    """Independent re-check of a witness: does it exceed k|V'| - l?"""
    _, pairs = _pairs(g)
    ids = list(edge_ids)
    verts = {x for i in ids for x in pairs[i]}
    return len(ids) > k * len(verts) - l


# maximal balanced / purely periodic subgraphs -------------------------------------


def _components(g, vertices, edge_ids):
    """Connected components of the subgraph on ``vertices`` with ``edge_ids``."""
    parent = {v: v for v in vertices}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in edge_ids:
        e = g.edges[i]
        a, b = find(e.tail), find(e.head)
        if a != b:
            parent[max(a, b)] = min(a, b)
    comps = {}
    for v in sorted(vertices):
        comps.setdefault(find(v), []).append(v)
    return list(comps.values())


def _maximal_only(sets):
    uniq = sorted(set(sets), key=lambda s: (-len(s), sorted(s)))
    out = []
    for s in uniq:
        if not any(s <= t for t in out):
            out.append(s)
    return sorted(out, key=sorted)


def _parity_maximal(g, S, inner):
    """Maximal edge sets whose reflection parts admit a 0/1 potential."""
    comps = _components(g, S, inner)
    per_comp = []
    for comp in comps:
        members = set(comp)
        comp_edges = [i for i in inner if g.edges[i].tail in members]
        rest = comp[1:]
        options = []
        for bits in itertools.product((False, True), repeat=len(rest)):
            psi = dict(zip(rest, bits))
            psi[comp[0]] = False
            kept = frozenset(
                i for i in comp_edges
                if g.edges[i].gain.r == (psi[g.edges[i].tail] != psi[g.edges[i].head])
            )
            options.append(kept)
        per_comp.append(_maximal_only(options))
    # maximal sets of a disjoint union are unions of per-component maxima
    for combo in itertools.product(*per_comp):
        yield frozenset().union(*combo)


def _balanced_maximal(g, S, inner):
    """Maximal balanced edge sets via full-group potentials.

    A maximal balanced subgraph spans every component of the induced
    subgraph (a bridge between its pieces could always be added), so its
    potential is generated by a spanning tree.  Trees are grown one edge at a
    time: the lowest unexplored boundary edge is either used to set the
    potential of its far end, or discarded.
    """
    comps = _components(g, S, inner)
    per_comp = []
    for comp in comps:
        members = set(comp)
        comp_edges = sorted(i for i in inner if g.edges[i].tail in members)
        found = set()

        def grow(potential, banned):
            boundary = [
                i for i in comp_edges
                if i not in banned
                and (g.edges[i].tail in potential) != (g.edges[i].head in potential)
            ]
            if len(potential) == len(comp):
                kept = frozenset(
                    i for i in comp_edges
                    if potential[g.edges[i].tail] * g.edges[i].gain
                    == potential[g.edges[i].head]
                )
                found.add(kept)
                return
            if not boundary:
                return
            idx = boundary[0]
            e = g.edges[idx]
            inside = e.tail if e.tail in potential else e.head
            far = e.other(inside)
            grow({**potential, far: potential[inside] * e.gain_from(inside)}, banned)
            grow(potential, banned | {idx})

        grow({comp[0]: IDENTITY}, frozenset())
        per_comp.append(_maximal_only(found))
    for combo in itertools.product(*per_comp):
        yield frozenset().union(*combo)


def restricted_maximal_subgraphs(g: GainGraph, S, kind: str):
    """Yield the edge-maximal subgraphs of ``kind`` with vertex support in ``S``.

    ``kind`` is ``"balanced"`` or ``"purely_periodic"``.
    """
    S = sorted(set(S))
    members = set(S)
    inner = [i for i, e in enumerate(g.edges) if e.tail in members and e.head in members]
    if kind == "purely_periodic":
        if g.group is Group.Z2:
            yield frozenset(inner)
            return
        yield from _parity_maximal(g, S, inner)
    elif kind == "balanced":
        if g.group is Group.CS:
            # Cs gains are determined by their reflection bit
            yield from _parity_maximal(g, S, inner)
        else:
            yield from _balanced_maximal(g, S, inner)
    else:
        raise ValueError(f"unknown kind {kind!r}")


# gain-restricted checkers ---------------------------------------------------------

SUBSET_LIMIT = 22


def _popcount(x):
    return np.bitwise_count(x) if hasattr(np, "bitwise_count") else np.array(
        [bin(int(v)).count("1") for v in x]
    )


def tight_vertex_subsets(g: GainGraph, k: int, l: int):
    """Vertex sets X (as sorted lists) whose induced edge count is exactly k|X| - l."""
    if g.n > SUBSET_LIMIT:
        raise TooLarge(f"{g.n} vertices exceeds the subset-scan limit {SUBSET_LIMIT}")
    masks = np.arange(1, 1 << g.n, dtype=np.int64)
    counts = np.zeros(masks.shape, dtype=np.int64)
    for e in g.edges:
        bits = (1 << e.tail) | (1 << e.head)
        counts += (masks & bits) == bits
    hits = masks[counts == k * _popcount(masks).astype(np.int64) - l]
    for mask in hits:
        yield [v for v in range(g.n) if int(mask) >> v & 1]


def _induced(g, vertices):
    vs = set(vertices)
    return [i for i, e in enumerate(g.edges) if e.tail in vs and e.head in vs]


def _gain_restricted(g, predicate, kind, condition, method):
    base = pebble_check(g, 2, 1)
    if base.status is Status.VIOLATION:
        return SparsityVerdict(Status.VIOLATION, base.witness, condition)
    if method == "subsets":
        # with (2,1)-sparsity established, a (2,2)-violator of the restricted
        # kind has exactly 2|V'|-1 edges and is therefore vertex-induced
        for X in tight_vertex_subsets(g, 2, 1):
            ids = _induced(g, X)
            if predicate(g, ids):
                return SparsityVerdict(Status.VIOLATION, frozenset(ids), condition)
    elif method == "potentials":
        if g.n > 14:
            raise TooLarge("potential enumeration is limited to 14 vertices")
        for ids in restricted_maximal_subgraphs(g, range(g.n), kind):
            if not ids:
                continue
            v = pebble_check(g, 2, 2, edge_ids=ids)
            if v.status is Status.VIOLATION:
                return SparsityVerdict(Status.VIOLATION, v.witness, condition)
    else:
        raise ValueError(f"unknown method {method!r}")
    return SparsityVerdict(base.status, None, condition)


def check_22_tight(g: GainGraph) -> SparsityVerdict:
    if g.group is not Group.Z2:
        raise WrongGroup(f"(2,2)-tightness is the Z2 condition, graph is {g.group}")
    v = pebble_check(g, 2, 2)
    verdict = SparsityVerdict(v.status, v.witness, "(2,2)-tight")
    assert not (verdict.tight and any(e.is_loop for e in g.edges))
    return verdict


def check_221_gain_tight(g: GainGraph, method: str = "subsets") -> SparsityVerdict:
    if g.group is not Group.CS:
        raise WrongGroup(f"(2,2,1)-gain-tightness is the Cs condition, graph is {g.group}")
    return _gain_restricted(g, is_balanced, "balanced", "(2,2,1)-gain-tight", method)


def check_z2cs_tight(g: GainGraph, method: str = "subsets") -> SparsityVerdict:
    if g.group is not Group.Z2XCS:
        raise WrongGroup(f"(Z2xCs)_q-tightness needs a Z2xCs graph, graph is {g.group}")
    return _gain_restricted(
        g, is_purely_periodic, "purely_periodic", "(Z2xCs)_q-tight", method
    )


def check_tight(g: GainGraph) -> SparsityVerdict:
    """Dispatch to the tightness condition of the graph's group."""
    return {
        Group.Z2: check_22_tight,
        Group.CS: check_221_gain_tight,
        Group.Z2XCS: check_z2cs_tight,
    }[g.group](g)
