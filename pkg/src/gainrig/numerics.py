"""Rigidity and orbit matrices in the l_q and l_infinity planes.

The configuration stores one representative point per vertex orbit; the
symmetry enters only through the gains in the orbit matrix rows.
"""

from __future__ import annotations

import enum
import functools
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .gain_graph import Edge, GainGraph, is_purely_periodic
from .symmetry_groups import Group
from .moves import Setting, random_tight_graph
from .sparsity import Status, check_tight

DEFAULT_TOL = 1e-8
DEFAULT_TRIALS = 25
MAX_RESAMPLES = 10_000
WELL_POSITIONED_EPS = 1e-6


class NumericsError(ValueError):
    pass


class CoincidentEndpoints(NumericsError):
    pass


class CoincidentDerivedEndpoints(NumericsError):
    def __init__(self, edge_index):
        super().__init__(f"edge {edge_index} has coincident derived endpoints")
        self.edge_index = edge_index


class ResampleExhausted(NumericsError):
    pass


class NotWellPositioned(NumericsError):
    pass


@dataclass
class Configuration:
    points: np.ndarray
    q: float

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)

    @property
    def is_inf(self):
        return math.isinf(self.q)


def sign_power(a, k):
    a = np.asarray(a, dtype=float)
    return np.sign(a) * np.abs(a) ** k


def kappa(v):
    """Framework-colour indicator: which coordinate attains the max norm."""
    x, y = (abs(float(t)) for t in v)
    if x > y:
        return np.array([1.0, 0.0])
    if y > x:
        return np.array([0.0, 1.0])
    return np.zeros(2)


def _signed_kappa(v):
    # the signed version is what the derivative of max(|x|,|y|) produces
    x, y = float(v[0]), float(v[1])
    if abs(x) > abs(y):
        return np.array([math.copysign(1.0, x), 0.0])
    if abs(y) > abs(x):
        return np.array([0.0, math.copysign(1.0, y)])
    return np.zeros(2)


@functools.lru_cache(maxsize=256)
def _gain_arrays(g: GainGraph):
    tails = np.array([e.tail for e in g.edges], dtype=int)
    heads = np.array([e.head for e in g.edges], dtype=int)
    shift = np.array([[e.gain.c, e.gain.d] for e in g.edges], dtype=float).reshape(-1, 2)
    flip = np.array([e.gain.r for e in g.edges], dtype=bool)
    return tails, heads, shift, flip, tails == heads


def _diffs(g: GainGraph, p):
    """Per edge: ``p_i - m p_j`` and ``p_j - m^-1 p_i`` as two (|E|, 2) arrays."""
    p = np.asarray(p, dtype=float).reshape(-1, 2)
    tails, heads, shift, flip, _ = _gain_arrays(g)
    sigma = np.where(flip, -1.0, 1.0)
    pi, pj = p[tails], p[heads]
    mpj = np.column_stack([pj[:, 0], sigma * pj[:, 1]]) + shift
    # m^-1 x = sigma x - sigma(c, d) with sigma acting on the second coordinate
    minv_pi = np.column_stack([pi[:, 0] - shift[:, 0], sigma * (pi[:, 1] - shift[:, 1])])
    return pi - mpj, pj - minv_pi


def rigidity_matrix_q(n, pairs, p, q):
    p = np.asarray(p, dtype=float)
    R = np.zeros((len(pairs), 2 * n))
    for row, (i, j) in enumerate(pairs):
        d = p[i] - p[j]
        if i == j or not np.any(d):
            raise CoincidentEndpoints(f"edge {row} joins coincident points")
        R[row, 2 * i:2 * i + 2] = sign_power(d, q - 1)
        R[row, 2 * j:2 * j + 2] = sign_power(-d, q - 1)
    return R


def rigidity_matrix_inf(n, pairs, p):
    p = np.asarray(p, dtype=float)
    R = np.zeros((len(pairs), 2 * n))
    for row, (i, j) in enumerate(pairs):
        d = p[i] - p[j]
        if i == j or not np.any(d):
            raise CoincidentEndpoints(f"edge {row} joins coincident points")
        R[row, 2 * i:2 * i + 2] = _signed_kappa(d)
        R[row, 2 * j:2 * j + 2] = _signed_kappa(-d)
    return R


def _place(g, at_tail, at_head):
    tails, heads, *_ = _gain_arrays(g)
    O = np.zeros((g.m, 2 * g.n))
    rows = np.arange(g.m)
    O[rows, 2 * tails] = at_tail[:, 0]
    O[rows, 2 * tails + 1] = at_tail[:, 1]
    # loops land in the same columns, so add rather than overwrite
    O[rows, 2 * heads] += at_head[:, 0]
    O[rows, 2 * heads + 1] += at_head[:, 1]
    return O


def orbit_matrix_q(g: GainGraph, p, q):
    if g.m == 0:
        return np.zeros((0, 2 * g.n))
    di, dj = _diffs(g, p)
    bad = np.flatnonzero(~di.any(axis=1))
    if bad.size:
        raise CoincidentDerivedEndpoints(int(bad[0]))
    return _place(g, sign_power(di, q - 1), sign_power(dj, q - 1))


def _signed_kappa_rows(d):
    ax, ay = np.abs(d[:, 0]), np.abs(d[:, 1])
    out = np.zeros_like(d)
    out[:, 0] = np.where(ax > ay, np.sign(d[:, 0]), 0.0)
    out[:, 1] = np.where(ay > ax, np.sign(d[:, 1]), 0.0)
    return out


def orbit_matrix_inf(g: GainGraph, p):
    if g.m == 0:
        return np.zeros((0, 2 * g.n))
    _, _, _, flip, loop = _gain_arrays(g)
    di, dj = _diffs(g, p)
    at_tail = _signed_kappa_rows(di)
    at_head = _signed_kappa_rows(dj)
    # translation loops and axis-parallel reflection loops give zero rows;
    # a perpendicular reflection loop keeps kappa(p - m p) once
    perpendicular = np.abs(di[:, 1]) > np.abs(di[:, 0])
    at_tail[loop & ~(flip & perpendicular)] = 0.0
    at_head[loop] = 0.0
    return _place(g, at_tail, at_head)


def orbit_matrix(g: GainGraph, config: Configuration):
    if config.is_inf:
        return orbit_matrix_inf(g, config.points)
    return orbit_matrix_q(g, config.points, config.q)


@dataclass
class MatrixReport:
    rows: int
    cols: int
    rank: int
    tolerance: float
    smallest_kept: float | None
    largest_dropped: float | None
    scale: float = 1.0
    configuration: Configuration | None = field(default=None, repr=False)
    kernel_residual: float = 0.0

    @property
    def gap(self) -> float:
        """Smallest kept singular value relative to the rank threshold scale."""
        if self.smallest_kept is None:
            return math.inf
        return self.smallest_kept / self.scale

    def to_json(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "rank": self.rank,
            "tolerance": self.tolerance,
            "smallest_kept": self.smallest_kept,
            "largest_dropped": self.largest_dropped,
            "kernel_residual": self.kernel_residual,
        }


def scale_rows(M):
    M = np.array(M, dtype=float)
    peak = np.abs(M).max(axis=1, initial=0.0) if M.size else np.zeros(len(M))
    nz = peak > 0
    M[nz] /= peak[nz, None]
    return M


def numeric_rank(M, tol: float = DEFAULT_TOL) -> MatrixReport:
    M = np.asarray(M, dtype=float)
    rows, cols = M.shape if M.ndim == 2 else (0, 0)
    if rows == 0 or cols == 0:
        return MatrixReport(rows, cols, 0, tol, None, None)
    sv = np.linalg.svd(M, compute_uv=False)
    scale = max(float(sv[0]), 1.0)
    keep = sv > tol * scale
    rank = int(keep.sum())
    kept = sv[keep]
    dropped = sv[~keep]
    return MatrixReport(
        rows, cols, rank, tol,
        float(kept.min()) if kept.size else None,
        float(dropped.max()) if dropped.size else None,
        scale,
    )


def trivial_motion_dim(setting: Setting) -> int:
    return 2 if setting.group is Group.Z2 else 1


def trivial_basis(n: int, group: Group) -> np.ndarray:
    x = np.tile([1.0, 0.0], n)
    if group is Group.Z2:
        return np.stack([x, np.tile([0.0, 1.0], n)])
    return x[None, :]


def kernel_residual(M, group: Group) -> float:
    """Largest |M b| over the trivial basis, relative to the matrix scale."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    n = M.shape[1] // 2
    scale = max(float(np.abs(M).max()), 1.0)
    return float(np.abs(M @ trivial_basis(n, group).T).max()) / scale


# configurations ------------------------------------------------------------------


def _is_well_placed(g: GainGraph, p, inf: bool) -> bool:
    if g.m == 0:
        return True
    di, _ = _diffs(g, p)
    if np.any(np.hypot(di[:, 0], di[:, 1]) < 1e-9):
        return False
    if inf and np.any(np.abs(np.abs(di[:, 0]) - np.abs(di[:, 1])) <= WELL_POSITIONED_EPS):
        return False
    return True


def random_configuration(g: GainGraph, seed=None, box: float = 10.0, q: float = 3.0,
                         rng=None) -> Configuration:
    if box <= 0:
        raise ValueError("box must be positive")
    rng = np.random.default_rng(seed) if rng is None else rng
    inf = math.isinf(q)
    for _ in range(MAX_RESAMPLES):
        p = rng.uniform(-box, box, size=(g.n, 2))
        if _is_well_placed(g, p, inf):
            return Configuration(p, q)
    raise ResampleExhausted(f"no admissible configuration after {MAX_RESAMPLES} draws")


# colourings ---------------------------------------------------------------------


class Colour(enum.Enum):
    ONE = 1
    TWO = 2
    DEGENERATE = "degenerate"


@dataclass
class Colouring:
    """Framework colours per edge.

    ``colours`` holds the kappa colour (1, 2 or degenerate) of every edge,
    loops included, since the monochrome criteria count loops in their
    colour class.  ``zero_row`` marks edges whose orbit row vanishes anyway.
    """

    colours: tuple
    zero_row: tuple
    well_positioned: bool

    def edges_of(self, colour) -> list:
        return [i for i, c in enumerate(self.colours) if c is colour]


def framework_colouring(g: GainGraph, p) -> Colouring:
    colours = []
    zero = []
    diffs = _diffs(g, p)[0] if g.m else np.zeros((0, 2))
    for e, di in zip(g.edges, diffs):
        k = kappa(di)
        c = Colour.ONE if k[0] else Colour.TWO if k[1] else Colour.DEGENERATE
        if abs(abs(di[0]) - abs(di[1])) <= WELL_POSITIONED_EPS:
            c = Colour.DEGENERATE
        colours.append(c)
        zero.append(e.is_loop and (not e.gain.r or c is not Colour.TWO))
    return Colouring(tuple(colours), tuple(zero),
                     all(c is not Colour.DEGENERATE for c in colours))


def _component_labels(n, edges):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in edges:
        a, b = find(e.tail), find(e.head)
        if a != b:
            parent[a] = b
    return [find(v) for v in range(n)]


def monochrome_verdict(g: GainGraph, colouring: Colouring, setting: Setting) -> bool:
    if not colouring.well_positioned:
        raise NotWellPositioned("colouring has degenerate edges")
    e1 = [g.edges[i] for i in colouring.edges_of(Colour.ONE)]
    e2_ids = colouring.edges_of(Colour.TWO)
    e2 = [g.edges[i] for i in e2_ids]
    labels1 = _component_labels(g.n, e1)
    connected1 = len(set(labels1)) <= 1
    if setting.group is Group.Z2:
        return connected1 and len(set(_component_labels(g.n, e2))) <= 1
    if setting.group is not Group.Z2XCS:
        raise ValueError("monochrome criteria exist for Z2 and Z2xCs only")
    if not (connected1 and len(e1) == g.n - 1):
        return False
    labels2 = _component_labels(g.n, e2)
    for root in set(labels2):
        verts = {v for v in range(g.n) if labels2[v] == root}
        ids = [i for i in e2_ids if g.edges[i].tail in verts]
        if len(ids) != len(verts):
            return False
        if is_purely_periodic(g, ids):
            return False
    return True


# rank estimation ------------------------------------------------------------------


def _drop_hopeless_loops(g: GainGraph, setting: Setting) -> GainGraph:
    if not setting.is_inf:
        return g
    keep = []
    for e in g.edges:
        if e.is_loop and not e.gain.r and abs(e.gain.c) == abs(e.gain.d):
            warnings.warn(f"dropping loop {e}: it can never be well-positioned",
                          stacklevel=3)
            continue
        keep.append(e)
    return g if len(keep) == g.m else g.with_edges(keep)


def _evaluate(g, config, setting, tol, sabotage=False):
    M = scale_rows(orbit_matrix(g, config))
    if sabotage and M.size:
        r, c = np.argwhere(M != 0)[0]
        M[r, c] = -M[r, c]
    report = numeric_rank(M, tol)
    report.configuration = config
    report.kernel_residual = kernel_residual(M, setting.group)
    return report


def regular_rank_estimate(g: GainGraph, setting: Setting, trials: int = DEFAULT_TRIALS,
                          seed=0, tol: float = DEFAULT_TOL, box: float = 10.0,
                          search_steps: int | None = None, sabotage: bool = False,
                          observer=None) -> MatrixReport:
    """Maximum orbit-matrix rank over random configurations.

    In the l_q plane each trial is an independent uniform draw.  In the
    l_infinity plane rank is only locally constant, so each trial is a short
    hill climb that re-places single vertices and keeps moves that do not
    lower the rank.  ``observer(config, report)`` sees every evaluated
    configuration.  The search stops early once the rank bound
    ``min(|E|, 2n - t)`` is met.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    bound = min(g.m, 2 * g.n - trivial_motion_dim(setting))
    steps = (20 * g.n if search_steps is None else search_steps) if setting.is_inf else 0
    best = None
    worst_residual = 0.0
    for _ in range(trials):
        config = random_configuration(g, box=box, q=setting.q, rng=rng)
        report = _evaluate(g, config, setting, tol, sabotage)
        if observer:
            observer(config, report)
        worst_residual = max(worst_residual, report.kernel_residual)
        for _ in range(steps):
            if report.rank >= bound:
                break
            trial_points = config.points.copy()
            trial_points[rng.integers(g.n)] = rng.uniform(-box, box, size=2)
            if not _is_well_placed(g, trial_points, True):
                continue
            candidate = _evaluate(g, Configuration(trial_points, setting.q), setting, tol,
                                  sabotage)
            if observer:
                observer(candidate.configuration, candidate)
            worst_residual = max(worst_residual, candidate.kernel_residual)
            if candidate.rank >= report.rank:
                config, report = candidate.configuration, candidate
        if best is None or report.rank > best.rank:
            best = report
        if best.rank >= bound:
            break
    best.kernel_residual = worst_residual
    return best


@dataclass
class RigidityVerdict:
    rigid: bool
    minimal: bool
    required_rank: int
    report: MatrixReport

    def to_json(self) -> dict:
        return {
            "rigid": self.rigid,
            "minimal": self.minimal,
            "required_rank": self.required_rank,
            "report": self.report.to_json(),
        }


def rigidity_verdict(g: GainGraph, setting: Setting, trials: int = DEFAULT_TRIALS, seed=0,
                     tol: float = DEFAULT_TOL, **kwargs) -> RigidityVerdict:
    g = _drop_hopeless_loops(g, setting)
    need = 2 * g.n - trivial_motion_dim(setting)
    report = regular_rank_estimate(g, setting, trials, seed, tol, **kwargs)
    rigid = report.rank == need
    return RigidityVerdict(rigid, rigid and g.m == need, need, report)


# cross validation -----------------------------------------------------------------

KERNEL_TOL = 1e-10


def _random_valid_edge(g: GainGraph, rng):
    from .gain_graph import GainGraphError
    from .symmetry_groups import GroupElement

    for _ in range(MAX_RESAMPLES):
        t, h = int(rng.integers(g.n)), int(rng.integers(g.n))
        c = d = 0
        if g.group.has_translations:
            c, d = (int(x) for x in rng.integers(-2, 3, size=2))
        r = bool(rng.integers(2)) if g.group.has_reflection else False
        try:
            return g.with_edges(list(g.edges) + [Edge(t, h, GroupElement(c, d, r))])
        except GainGraphError:
            continue
    raise ResampleExhausted("could not add a valid edge")


def _validate_instance(setting: Setting, index: int, max_moves: int, trials: int, seed,
                       tol: float, max_vertices: int, sabotage: bool) -> dict:
    """One cross-validation instance; pure function of its arguments."""
    rng = np.random.default_rng([int(seed), index])
    inst_seed = int(rng.integers(2**32))
    n_moves = int(rng.integers(1, max_moves + 1)) if max_moves > 0 else 0
    g, _ = random_tight_graph(setting, n_moves, inst_seed, max_vertices)
    t = trivial_motion_dim(setting)
    mismatches = []
    counts = dict.fromkeys(COUNT_KEYS, 0)
    counts["instances"] = 1
    gaps = []
    residual = 0.0

    def note(kind, **info):
        mismatches.append({"instance": index, "check": kind, **info})

    verdict = check_tight(g)
    if verdict.tight:
        counts["tight"] += 1
    else:
        note("checker", status=verdict.status.value)

    pairs = []

    def watch(config, report, graph=g):
        counts["matrices"] += 1
        if setting.is_inf:
            pairs.append((graph, config, report.rank))

    res = rigidity_verdict(g, setting, trials, inst_seed, tol, sabotage=sabotage,
                           observer=watch)
    residual = max(residual, res.report.kernel_residual)
    gaps.append(res.report.gap)
    if res.minimal:
        counts["minimal_rigid"] += 1
    else:
        note("rigidity", rank=res.report.rank, required=res.required_rank)
    if res.report.kernel_residual > KERNEL_TOL:
        note("kernel", residual=res.report.kernel_residual)

    if g.m:
        drop = int(rng.integers(g.m))
        smaller = g.with_edges([e for i, e in enumerate(g.edges) if i != drop])
        counts["edge_deleted"] += 1
        res2 = rigidity_verdict(smaller, setting, trials, inst_seed + 1, tol,
                                sabotage=sabotage,
                                observer=lambda c, r: watch(c, r, smaller))
        residual = max(residual, res2.report.kernel_residual)
        if res2.report.rank > 2 * g.n - t - 1:
            note("deletion", rank=res2.report.rank)
        if res2.report.kernel_residual > KERNEL_TOL:
            note("kernel", residual=res2.report.kernel_residual)

    bigger = _random_valid_edge(g, rng)
    counts["edge_added"] += 1
    if check_tight(bigger).status is not Status.VIOLATION:
        note("addition")

    if setting.is_inf:
        for graph, config, rank in pairs:
            # the Z2xCs criterion describes minimal rigidity only
            if setting.group is Group.Z2XCS and graph.m != 2 * graph.n - t:
                continue
            colouring = framework_colouring(graph, config.points)
            if not colouring.well_positioned:
                continue
            counts["colour_pairs"] += 1
            by_rank = rank == 2 * graph.n - t
            if monochrome_verdict(graph, colouring, setting) != by_rank:
                note("monochrome", rank=rank)

    return {"counts": counts, "mismatches": mismatches, "gaps": gaps,
            "residual": residual, "graph": g}


COUNT_KEYS = ("instances", "tight", "minimal_rigid", "edge_deleted", "edge_added",
              "colour_pairs", "matrices")


def cross_validate(setting: Setting, n_instances: int, max_moves: int = 10,
                   trials: int = DEFAULT_TRIALS, seed=0, tol: float = DEFAULT_TOL,
                   max_vertices: int = 14, sabotage: bool = False,
                   workers: int = 1, keep_graphs: bool = False) -> dict:
    """Compare the combinatorial verdicts with numerical rank on random instances.

    Instance ``i`` draws everything from ``(seed, i)``, so the merged report
    does not depend on ``workers``.
    """
    start = time.perf_counter()
    args = [(setting, i, max_moves, trials, seed, tol, max_vertices, sabotage)
            for i in range(n_instances)]
    if workers > 1 and n_instances > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_validate_instance, *zip(*args)))
    else:
        parts = [_validate_instance(*a) for a in args]

    counts = dict.fromkeys(COUNT_KEYS, 0)
    mismatches = []
    gaps = []
    residual = 0.0
    for part in parts:
        for key, value in part["counts"].items():
            counts[key] += value
        mismatches.extend(part["mismatches"])
        gaps.extend(part["gaps"])
        residual = max(residual, part["residual"])
    finite = [x for x in gaps if math.isfinite(x)]
    out = {
        "setting": {"group": setting.group.value, "norm": setting.norm_label},
        "instances": n_instances,
        "counts": counts,
        "mismatches": mismatches,
        "worst_gap": min(finite) if finite else None,
        "worst_kernel_residual": residual,
        "timing": {"seconds": time.perf_counter() - start},
    }
    if keep_graphs:
        out["graphs"] = [part["graph"] for part in parts]
    return out
