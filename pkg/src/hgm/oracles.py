"""Ground-truth combinatorics: violation graphs, exact distance to
monotonicity, degree profiles, the Talagrand objective, influence,
persistence, and the mostly-zero-below / red / blue edge classifiers.

Everything here is an *oracle*: slow, exact (or explicitly labeled
otherwise), and independent of the sampling code it validates.

The walk machinery requires power-of-two side lengths, but the purely
order-theoretic quantities (distance, matchings, Talagrand) are defined for
any box [n]^d; they operate on a relaxed :class:`Box` domain so that odd
side lengths (used heavily in cross-validation) are supported.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, maximum_flow

from . import walks
from .errors import BudgetError, DomainError
from .grid import FunctionOracle, GridShape, Point, tabulate
from .stats import wilson_interval


class Trivalent(enum.Enum):
    """Outcome of a threshold classifier that may refuse to decide."""

    YES = "yes"
    NO = "no"
    UNDECIDED = "undecided"

    @property
    def decided(self) -> bool:
        return self is not Trivalent.UNDECIDED


@dataclass(frozen=True)
class Box:
    """A box domain [n]^d without the dyadic side-length restriction.

    Indexing matches GridShape: mixed radix, coordinate 1 least significant.
    """

    n: int
    d: int

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise DomainError(f"invalid box {self.n}^{self.d}")

    @property
    def num_points(self) -> int:
        return self.n**self.d

    def point_of(self, idx: int) -> Point:
        coords = []
        for _ in range(self.d):
            coords.append(idx % self.n + 1)
            idx //= self.n
        return tuple(coords)

    def index_of(self, x: Sequence[int]) -> int:
        idx = 0
        for c in reversed(tuple(x)):
            idx = idx * self.n + (c - 1)
        return idx

    def all_points_array(self) -> np.ndarray:
        idx = np.arange(self.num_points)
        out = np.empty((self.num_points, self.d), dtype=np.int64)
        rem = idx
        for i in range(self.d):
            out[:, i] = rem % self.n + 1
            rem = rem // self.n
        return out

    @property
    def strides(self) -> np.ndarray:
        return self.n ** np.arange(self.d, dtype=np.int64)


def box_and_bits(f) -> Tuple[Box, np.ndarray]:
    """Accept a FunctionOracle or a (Box, bits) pair; return (Box, bits)."""
    if isinstance(f, FunctionOracle):
        table = tabulate(f)
        return Box(f.shape.n, f.shape.d), np.asarray(table.bits, dtype=np.uint8)
    box, bits = f
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape != (box.num_points,):
        raise DomainError(f"expected {box.num_points} bits, got {bits.shape}")
    return box, bits


def bits_monotone(box: Box, bits: np.ndarray) -> bool:
    arr = np.asarray(bits, dtype=np.uint8)
    shaped = arr.reshape((box.n,) * box.d)
    for axis in range(box.d):
        a = np.moveaxis(shaped, axis, 0)
        if (a[:-1] > a[1:]).any():
            return False
    return True


# ---------------------------------------------------------------------------
# Violation graphs
# ---------------------------------------------------------------------------

DEFAULT_GRAPH_BUDGET = 5 * 10**7


@dataclass
class ViolationGraph:
    """Bipartite graph of violated pairs (x, y): x <= y, f(x)=1, f(y)=0.

    edges is an (m, 3) int array of (x_index, y_index, dimension); dimension
    is -1 in full_comparable mode, otherwise the 1-based axis of the edge.
    """

    box: Box
    bits: np.ndarray
    mode: str
    edges: np.ndarray

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def left(self) -> np.ndarray:
        return np.unique(self.edges[:, 0]) if self.m else np.empty(0, np.int64)

    @property
    def right(self) -> np.ndarray:
        return np.unique(self.edges[:, 1]) if self.m else np.empty(0, np.int64)

    def subgraph(self, which: np.ndarray) -> "ViolationGraph":
        return ViolationGraph(self.box, self.bits, self.mode, self.edges[which])

    def check_edges(self) -> bool:
        """Every edge re-verifies as a violation against the truth table."""
        for xi, yi, dim in self.edges:
            x, y = self.box.point_of(int(xi)), self.box.point_of(int(yi))
            if not all(a <= b for a, b in zip(x, y)):
                return False
            if not (self.bits[xi] == 1 and self.bits[yi] == 0):
                return False
            if dim >= 0:
                diffs = [i for i in range(self.box.d) if x[i] != y[i]]
                if diffs != [int(dim) - 1]:
                    return False
        return True


def build_violation_graph(
    f, mode: str = "full_comparable", budget: int = DEFAULT_GRAPH_BUDGET
) -> ViolationGraph:
    box, bits = box_and_bits(f)
    if mode == "augmented_axis":
        edges = _axis_violations(box, bits)
    elif mode == "full_comparable":
        edges = _comparable_violations(box, bits, budget)
    else:
        raise DomainError(f"unknown violation graph mode {mode!r}")
    return ViolationGraph(box, bits, mode, edges)


def _axis_violations(box: Box, bits: np.ndarray) -> np.ndarray:
    idx = np.arange(box.num_points)
    pts = box.all_points_array()
    strides = box.strides
    rows = []
    for i in range(box.d):
        for delta in range(1, box.n):
            ok = pts[:, i] + delta <= box.n
            xs = idx[ok & (bits == 1)]
            ys = xs + delta * strides[i]
            bad = bits[ys] == 0
            if bad.any():
                xs = xs[bad]
                rows.append(
                    np.column_stack([xs, xs + delta * strides[i], np.full(len(xs), i + 1)])
                )
    if not rows:
        return np.empty((0, 3), dtype=np.int64)
    return np.concatenate(rows).astype(np.int64)


def _comparable_violations(box: Box, bits: np.ndarray, budget: int) -> np.ndarray:
    idx = np.arange(box.num_points)
    ones = idx[bits == 1]
    zeros = idx[bits == 0]
    if len(ones) * len(zeros) > budget:
        raise BudgetError(
            f"{len(ones)}x{len(zeros)} candidate pairs exceed budget {budget}"
        )
    pts = box.all_points_array()
    P1, P0 = pts[ones], pts[zeros]
    rows = []
    for k, xi in enumerate(ones):
        below = (P1[k] <= P0).all(axis=1)
        ys = zeros[below]
        if len(ys):
            rows.append(np.column_stack([np.full(len(ys), xi), ys, np.full(len(ys), -1)]))
    if not rows:
        return np.empty((0, 3), dtype=np.int64)
    return np.concatenate(rows).astype(np.int64)


# ---------------------------------------------------------------------------
# Maximum matching (Hopcroft-Karp) and the flow formulation
# ---------------------------------------------------------------------------

_INF = float("inf")


def hopcroft_karp(adj: Dict[int, list], left: Sequence[int]) -> Dict[int, int]:
    """Maximum matching of a bipartite graph given as left -> sorted right lists.

    Returns the left-to-right matching map. Deterministic: vertices are
    processed in sorted order and adjacency lists must be pre-sorted.
    """
    match_l: Dict[int, int] = {}
    match_r: Dict[int, int] = {}
    left = sorted(left)
    dist: Dict[int, float] = {}

    def bfs() -> bool:
        queue = []
        for u in left:
            if u not in match_l:
                dist[u] = 0
                queue.append(u)
            else:
                dist[u] = _INF
        found = False
        head = 0
        while head < len(queue):
            u = queue[head]
            head += 1
            for v in adj.get(u, ()):
                w = match_r.get(v)
                if w is None:
                    found = True
                elif dist[w] == _INF:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return found

    def dfs(u: int) -> bool:
        for v in adj.get(u, ()):
            w = match_r.get(v)
            if w is None or (dist[w] == dist[u] + 1 and dfs(w)):
                match_l[u] = v
                match_r[v] = u
                return True
        dist[u] = _INF
        return False

    while bfs():
        for u in left:
            if u not in match_l:
                dfs(u)
    return match_l


def koenig_cover(
    adj: Dict[int, list], left: Sequence[int], match_l: Dict[int, int]
) -> Tuple[set, set]:
    """Minimum vertex cover from a maximum matching via alternating reachability."""
    match_r = {v: u for u, v in match_l.items()}
    visited_l, visited_r = set(), set()
    stack = [u for u in left if u not in match_l]
    visited_l.update(stack)
    while stack:
        u = stack.pop()
        for v in adj.get(u, ()):
            if v in visited_r:
                continue
            visited_r.add(v)
            w = match_r.get(v)
            if w is not None and w not in visited_l:
                visited_l.add(w)
                stack.append(w)
    cover_l = {u for u in left if u not in visited_l}
    return cover_l, visited_r


@dataclass
class DistanceResult:
    distance: Fraction
    matching_size: int
    repair_indices: np.ndarray  # indices where the optimal repair differs
    num_points: int
    method: str


def _upset_repair(box: Box, bits: np.ndarray, cover: set) -> np.ndarray:
    """Monotone repair from a vertex cover of the comparability violation
    graph: g = indicator of the up-closure of uncovered 1-points. g differs
    from f only on the cover."""
    seeds = bits.astype(bool).copy()
    if cover:
        seeds[np.fromiter(cover, dtype=np.int64)] = np.where(
            bits[np.fromiter(cover, dtype=np.int64)] == 1, False, seeds[np.fromiter(cover, dtype=np.int64)]
        )
    shaped = seeds.reshape((box.n,) * box.d)
    for axis in range(box.d):
        shaped = np.maximum.accumulate(shaped, axis=axis)
    g = shaped.reshape(-1)
    return np.nonzero(g != bits.astype(bool))[0]


def _distance_small(box: Box, bits: np.ndarray, budget: int) -> DistanceResult:
    edges = _comparable_violations(box, bits, budget)
    adj: Dict[int, list] = {}
    for xi, yi, _ in edges:
        adj.setdefault(int(xi), []).append(int(yi))
    for v in adj.values():
        v.sort()
    left = sorted(adj)
    match_l = hopcroft_karp(adj, left)
    cover_l, cover_r = koenig_cover(adj, left, match_l)
    cover = cover_l | cover_r
    repair = _upset_repair(box, bits, cover)
    assert len(repair) == len(match_l), "repair size must equal matching size"
    return DistanceResult(
        Fraction(len(match_l), box.num_points),
        len(match_l),
        repair,
        box.num_points,
        "hopcroft_karp",
    )


def _distance_flow(box: Box, bits: np.ndarray) -> DistanceResult:
    """Matching via max flow on the covering DAG; avoids materializing the
    quadratically many comparable pairs."""
    N = box.num_points
    source, sink = N, N + 1
    idx = np.arange(N)
    pts = box.all_points_array()
    strides = box.strides
    big = N + 1
    rows, cols, caps = [], [], []
    for i in range(box.d):
        ok = pts[:, i] < box.n
        rows.append(idx[ok])
        cols.append(idx[ok] + strides[i])
        caps.append(np.full(ok.sum(), big))
    ones = idx[bits == 1]
    zeros = idx[bits == 0]
    rows.append(np.full(len(ones), source))
    cols.append(ones)
    caps.append(np.ones(len(ones), dtype=np.int64))
    rows.append(zeros)
    cols.append(np.full(len(zeros), sink))
    caps.append(np.ones(len(zeros), dtype=np.int64))
    cap = sp.csr_matrix(
        (np.concatenate(caps), (np.concatenate(rows), np.concatenate(cols))),
        shape=(N + 2, N + 2),
        dtype=np.int32,
    )
    res = maximum_flow(cap, source, sink)
    residual = cap - res.flow
    residual.data = (residual.data > 0).astype(np.int32)
    residual.eliminate_zeros()
    order = breadth_first_order(residual, source, directed=True, return_predecessors=False)
    reach = np.zeros(N + 2, dtype=bool)
    reach[order] = True
    cover = set(int(x) for x in ones[~reach[ones]]) | set(
        int(y) for y in zeros[reach[zeros]]
    )
    assert len(cover) == res.flow_value
    repair = _upset_repair(box, bits, cover)
    assert len(repair) == res.flow_value
    return DistanceResult(
        Fraction(int(res.flow_value), N), int(res.flow_value), repair, N, "dag_flow"
    )


def distance_to_monotonicity(
    f, budget: int = DEFAULT_GRAPH_BUDGET, force_method: Optional[str] = None
) -> DistanceResult:
    """Exact distance = (max matching of the comparability violation graph)/n^d,
    with one optimal repair set."""
    box, bits = box_and_bits(f)
    method = force_method or ("hopcroft_karp" if box.num_points <= 512 else "dag_flow")
    if method == "hopcroft_karp":
        return _distance_small(box, bits, budget)
    if method == "dag_flow":
        return _distance_flow(box, bits)
    raise DomainError(f"unknown distance method {method!r}")


def distance_bruteforce(f) -> Fraction:
    """Minimum Hamming distance to a monotone function by enumerating every
    monotone function as the indicator of an up-set. Domains up to 12 points."""
    box, bits = box_and_bits(f)
    N = box.num_points
    if N > 12:
        raise BudgetError(f"{N} points is beyond the 2^N up-set enumeration range")
    cover_edges = []
    for xi in range(N):
        x = box.point_of(xi)
        for i in range(box.d):
            if x[i] < box.n:
                cover_edges.append((xi, xi + int(box.strides[i])))
    fmask = 0
    for xi in range(N):
        if bits[xi]:
            fmask |= 1 << xi
    best = N
    for mask in range(1 << N):
        if any((mask >> a) & 1 and not (mask >> b) & 1 for a, b in cover_edges):
            continue
        best = min(best, bin(mask ^ fmask).count("1"))
    return Fraction(best, N)


# ---------------------------------------------------------------------------
# Degree profiles and the Talagrand objective
# ---------------------------------------------------------------------------


@dataclass
class DegreeProfile:
    D: Dict[int, int]
    Gamma: Dict[Tuple[int, int], int]  # (vertex index, 1-based dim) -> count
    Phi: Dict[int, int]
    D_X: int
    Gamma_X: int
    Phi_X: int
    D_Y: int
    Gamma_Y: int
    Phi_Y: int
    m: int
    frac_left: float
    frac_right: float


def degree_profile(G: ViolationGraph) -> DegreeProfile:
    if G.m and (G.edges[:, 2] < 0).any():
        raise DomainError("degree profile needs per-dimension edges (augmented mode)")
    D: Dict[int, int] = {}
    Gamma: Dict[Tuple[int, int], int] = {}
    for xi, yi, dim in G.edges:
        for z in (int(xi), int(yi)):
            D[z] = D.get(z, 0) + 1
            Gamma[(z, int(dim))] = Gamma.get((z, int(dim)), 0) + 1
    Phi: Dict[int, int] = {}
    for (z, _), cnt in Gamma.items():
        if cnt > 0:
            Phi[z] = Phi.get(z, 0) + 1
    left, right = set(int(v) for v in G.left), set(int(v) for v in G.right)

    def agg(side):
        if not side:
            return 0, 0, 0
        return (
            max(D.get(z, 0) for z in side),
            max(
                (cnt for (z, _), cnt in Gamma.items() if z in side),
                default=0,
            ),
            max(Phi.get(z, 0) for z in side),
        )

    D_X, Gamma_X, Phi_X = agg(left)
    D_Y, Gamma_Y, Phi_Y = agg(right)
    N = G.box.num_points
    return DegreeProfile(
        D, Gamma, Phi, D_X, Gamma_X, Phi_X, D_Y, Gamma_Y, Phi_Y, G.m,
        len(left) / N, len(right) / N,
    )


def thresholded_influence(f, coloring: Optional[np.ndarray] = None):
    """Per-point thresholded influence (number of dimensions with an incident
    violating axis edge), optionally restricted by an edge bicoloring: with a
    coloring chi, dimension i counts at z only if some incident violating
    i-edge e has chi(e) = f(z).

    Returns (map point-index -> value, total).
    """
    G = build_violation_graph(f, "augmented_axis")
    return colored_thresholded_degree(G, coloring)


def colored_thresholded_degree(G: ViolationGraph, coloring: Optional[np.ndarray]):
    dims_at: Dict[int, set] = {}
    for k, (xi, yi, dim) in enumerate(G.edges):
        for z in (int(xi), int(yi)):
            if coloring is not None and int(coloring[k]) != int(G.bits[z]):
                continue
            dims_at.setdefault(z, set()).add(int(dim))
    phi = {z: len(ds) for z, ds in dims_at.items()}
    return phi, sum(phi.values())


@dataclass
class TalResult:
    value: float
    coloring: Optional[np.ndarray]
    exact: bool
    method: str


TAL_EXACT_CAP = 22


def talagrand_objective(
    G: ViolationGraph, exact_cap: int = TAL_EXACT_CAP, chunk_bits: int = 16
) -> TalResult:
    """min over edge bicolorings of sum_z sqrt(colored thresholded degree).

    Exact brute force over all 2^m colorings for m <= exact_cap; larger
    graphs get the best of the two trivial colorings improved by greedy
    single-edge flips, clearly labeled non-exact.
    """
    m = G.m
    if m == 0:
        return TalResult(0.0, np.empty(0, dtype=np.int8), True, "empty")
    if m > exact_cap:
        return _tal_local_search(G)
    # Per (vertex, dim): bitmask of incident edges and which color counts there.
    masks = []  # (edge mask, required color bit)
    by_vertex: Dict[int, list] = {}
    vd: Dict[Tuple[int, int], int] = {}
    for k, (xi, yi, dim) in enumerate(G.edges):
        for z in (int(xi), int(yi)):
            key = (z, int(dim))
            if key not in vd:
                vd[key] = len(masks)
                masks.append([0, int(G.bits[z])])
                by_vertex.setdefault(z, []).append(vd[key])
            masks[vd[key]][0] |= 1 << k
    total = 1 << m
    best_val = math.inf
    best_chi = 0
    chunk = 1 << min(chunk_bits, m)
    sqrt_table = np.sqrt(np.arange(G.box.d + 1))
    for start in range(0, total, chunk):
        chis = np.arange(start, min(start + chunk, total), dtype=np.uint64)
        obj = np.zeros(len(chis))
        for z, mask_ids in by_vertex.items():
            phi = np.zeros(len(chis), dtype=np.int64)
            for mid in mask_ids:
                emask, want = masks[mid]
                hit = (chis & np.uint64(emask)) != 0 if want == 1 else (
                    (chis & np.uint64(emask)) != np.uint64(emask)
                )
                phi += hit
            obj += sqrt_table[phi]
        k = int(np.argmin(obj))
        if obj[k] < best_val - 1e-15:
            best_val = float(obj[k])
            best_chi = int(chis[k])
    chi_arr = np.array([(best_chi >> k) & 1 for k in range(m)], dtype=np.int8)
    return TalResult(best_val, chi_arr, True, "brute_force")


def _tal_value(G: ViolationGraph, chi: np.ndarray) -> float:
    _, tot = 0, 0.0
    phi, _t = colored_thresholded_degree(G, chi)
    return math.fsum(math.sqrt(v) for v in phi.values())


def _tal_local_search(G: ViolationGraph, max_passes: int = 50) -> TalResult:
    m = G.m
    candidates = [np.ones(m, dtype=np.int8), np.zeros(m, dtype=np.int8)]
    vals = [_tal_value(G, c) for c in candidates]
    k = int(np.argmin(vals))
    chi, val = candidates[k].copy(), vals[k]
    for _ in range(max_passes):
        improved = False
        for e in range(m):
            chi[e] ^= 1
            v = _tal_value(G, chi)
            if v < val - 1e-12:
                val = v
                improved = True
            else:
                chi[e] ^= 1
        if not improved:
            break
    return TalResult(val, chi, False, "local_search")


# ---------------------------------------------------------------------------
# Influence
# ---------------------------------------------------------------------------


@dataclass
class InfluenceResult:
    total: float
    negative: float
    exact: bool
    ci_total: Optional[Tuple[float, float]] = None
    ci_negative: Optional[Tuple[float, float]] = None


def influence_tilde(f: FunctionOracle) -> InfluenceResult:
    """Exact walk influences: total = E_x[d Pr_{y~1-step up}[f(x) != f(y)]],
    negative = same with f(x) > f(y). Needs an explicit truth table."""
    shape = f.shape
    table = tabulate(f)
    bits = table.bits
    K = walks.line_kernel(shape.n)
    pts = shape.all_points_array()
    idx = shape.indices_of_points(pts)
    total_terms, neg_terms = [], []
    strides = shape.n ** np.arange(shape.d, dtype=np.int64)
    for i in range(shape.d):
        for u in range(1, shape.n):
            at_u = pts[:, i] == u
            for v in range(u + 1, shape.n + 1):
                w = float(K[u, v])
                if w == 0:
                    continue
                src = idx[at_u]
                dst = src + (v - u) * strides[i]
                fx = bits[src].astype(np.int64)
                fy = bits[dst].astype(np.int64)
                total_terms.append(w * int((fx != fy).sum()))
                neg_terms.append(w * int((fx > fy).sum()))
    N = shape.num_points
    return InfluenceResult(math.fsum(total_terms) / N, math.fsum(neg_terms) / N, True)


def influence_via_hypercubes(
    f: FunctionOracle, budget: int = 10**7
) -> InfluenceResult:
    """Independent route to the same influences: average, over the product
    distribution of per-coordinate endpoint pairs, of the restricted cube
    influence (up-sensitive coordinates counted at the lower endpoint)."""
    shape = f.shape
    table = tabulate(f)
    bits = table.bits
    per_coord = walks.pair_distribution(shape.n)
    pairs = sorted(per_coord)
    if len(pairs) ** shape.d * (2**shape.d) * shape.d > budget:
        raise BudgetError("hypercube enumeration exceeds budget")
    total_acc, neg_acc = [], []
    for combo in itertools.product(pairs, repeat=shape.d):
        w = 1.0
        for p in combo:
            w *= per_coord[p]
        cube_T, cube_N = 0.0, 0.0
        for vertex in itertools.product(*[(a, b) for a, b in combo]):
            vi = shape.index_of(vertex)
            fv = int(bits[vi])
            for i, (a, b) in enumerate(combo):
                if vertex[i] != a:
                    continue
                up = vertex[:i] + (b,) + vertex[i + 1 :]
                fu = int(bits[shape.index_of(up)])
                if fu != fv:
                    cube_T += 1
                if fv > fu:
                    cube_N += 1
        scale = w / 2**shape.d
        total_acc.append(scale * cube_T)
        neg_acc.append(scale * cube_N)
    return InfluenceResult(math.fsum(total_acc), math.fsum(neg_acc), True)


def influence_mc(f: FunctionOracle, samples: int, rng) -> InfluenceResult:
    """Monte Carlo influence estimate with Wilson 95% intervals (scaled by d)."""
    shape = f.shape
    X = walks.sample_points_batch(shape, samples, rng)
    Y = walks.sample_walk_batch(shape, X, np.ones(samples, dtype=np.int64), "up", rng)
    fx = f.eval_many(X)
    fy = f.eval_many(Y)
    diff = int((fx != fy).sum())
    neg = int((fx > fy).sum())
    d = shape.d
    lo_t, hi_t = wilson_interval(diff, samples)
    lo_n, hi_n = wilson_interval(neg, samples)
    return InfluenceResult(
        d * diff / samples,
        d * neg / samples,
        False,
        (d * lo_t, d * hi_t),
        (d * lo_n, d * hi_n),
    )


# ---------------------------------------------------------------------------
# Persistence and the section-4 classifiers
# ---------------------------------------------------------------------------


def _exact_walk_event_prob(f: FunctionOracle, x: Point, tau: int, direction: str, event) -> float:
    spec = walks.WalkSpec(direction, tau, f.shape)
    pmf = walks.exact_pmf(f.shape, x, spec)
    return math.fsum(p * event(y) for y, p in pmf.table.items())


def persistence_classify(
    f: FunctionOracle,
    tau: int,
    beta: float,
    x: Sequence[int],
    direction: str,
    mode: str = "exact",
    samples: int = 10000,
    rng=None,
) -> Trivalent:
    """Is Pr[f(walk endpoint) != f(x)] <= beta for the tau-step walk from x?"""
    x = f.shape.check_point(x)
    fx = f.peek(x)
    if mode == "exact":
        p = _exact_walk_event_prob(f, x, tau, direction, lambda y: f.peek(y) != fx)
        return Trivalent.YES if p <= beta else Trivalent.NO
    sampler = walks.sample_upwalk if direction == "up" else walks.sample_downwalk
    hits = sum(f.peek(sampler(f.shape, x, tau, rng)) != fx for _ in range(samples))
    lo, hi = wilson_interval(hits, samples)
    if hi <= beta:
        return Trivalent.YES
    if lo > beta:
        return Trivalent.NO
    return Trivalent.UNDECIDED


MZB_THRESHOLD = 0.9
REDBLUE_THRESHOLD = 0.01


def mzb_prob(f: FunctionOracle, ell: int, z: Sequence[int]) -> float:
    """Exact probability that the ell-step down-walk from z lands on a 0."""
    return _exact_walk_event_prob(f, tuple(z), ell, "down", lambda y: f.peek(y) == 0)


def mzb_classify(
    f: FunctionOracle,
    ell: int,
    z: Sequence[int],
    mode: str = "exact",
    samples: int = 10000,
    rng=None,
) -> Trivalent:
    """Mostly-zero-below: down-walk hits a 0 with probability >= 0.9."""
    z = f.shape.check_point(z)
    if mode == "exact":
        p = mzb_prob(f, ell, z)
        return Trivalent.YES if p >= MZB_THRESHOLD else Trivalent.NO
    hits = sum(
        f.peek(walks.sample_downwalk(f.shape, z, ell, rng)) == 0 for _ in range(samples)
    )
    lo, hi = wilson_interval(hits, samples)
    if lo >= MZB_THRESHOLD:
        return Trivalent.YES
    if hi < MZB_THRESHOLD:
        return Trivalent.NO
    return Trivalent.UNDECIDED


def _interval_points(shape: GridShape, edge) -> list:
    x, y = shape.check_point(edge[0]), shape.check_point(edge[1])
    diffs = [i for i in range(shape.d) if x[i] != y[i]]
    if len(diffs) != 1 or x[diffs[0]] > y[diffs[0]]:
        raise DomainError("edge must be an upward axis-aligned pair")
    i = diffs[0]
    return [x[:i] + (v,) + x[i + 1 :] for v in range(x[i], y[i] + 1)]


def red_classify(
    f: FunctionOracle,
    ell: int,
    edge,
    mode: str = "exact",
    samples: int = 2000,
    rng=None,
) -> Trivalent:
    """Red edge: a uniform interior point's ell-step up-walk lands on an
    ell-mostly-zero-below point with probability >= 0.01."""
    interior = _interval_points(f.shape, edge)
    if mode == "exact":
        cache: Dict[Point, bool] = {}

        def is_mzb(zp: Point) -> bool:
            if zp not in cache:
                cache[zp] = mzb_prob(f, ell, zp) >= MZB_THRESHOLD
            return cache[zp]

        avg = math.fsum(
            _exact_walk_event_prob(f, z, ell, "up", lambda y: is_mzb(y))
            for z in interior
        ) / len(interior)
        return Trivalent.YES if avg >= REDBLUE_THRESHOLD else Trivalent.NO
    # MC mode: per-sample mostly-zero-below classification is itself
    # three-valued; undecided inner samples propagate to the decision bounds.
    yes = und = 0
    for _ in range(samples):
        z = interior[int(rng.integers(0, len(interior)))]
        zp = walks.sample_upwalk(f.shape, z, ell, rng)
        verdict = mzb_classify(f, ell, zp, mode="mc", samples=500, rng=rng)
        if verdict is Trivalent.YES:
            yes += 1
        elif verdict is Trivalent.UNDECIDED:
            und += 1
    lo, _ = wilson_interval(yes, samples)
    _, hi = wilson_interval(yes + und, samples)
    if lo >= REDBLUE_THRESHOLD:
        return Trivalent.YES
    if hi < REDBLUE_THRESHOLD:
        return Trivalent.NO
    return Trivalent.UNDECIDED


def blue_classify(
    f: FunctionOracle,
    ell: int,
    edge,
    mode: str = "exact",
    samples: int = 2000,
    rng=None,
) -> Trivalent:
    """Blue edge: a uniform interior point's ell-step down-walk lands on a
    1-valued point with probability >= 0.01."""
    interior = _interval_points(f.shape, edge)
    if mode == "exact":
        avg = math.fsum(
            _exact_walk_event_prob(f, z, ell, "down", lambda y: f.peek(y) == 1)
            for z in interior
        ) / len(interior)
        return Trivalent.YES if avg >= REDBLUE_THRESHOLD else Trivalent.NO
    hits = 0
    for _ in range(samples):
        z = interior[int(rng.integers(0, len(interior)))]
        zp = walks.sample_downwalk(f.shape, z, ell, rng)
        hits += f.peek(zp) == 1
    lo, hi = wilson_interval(hits, samples)
    if lo >= REDBLUE_THRESHOLD:
        return Trivalent.YES
    if hi < REDBLUE_THRESHOLD:
        return Trivalent.NO
    return Trivalent.UNDECIDED


# ---------------------------------------------------------------------------
# Typicality
# ---------------------------------------------------------------------------


def typicality_estimate(
    shape: GridShape, x: Sequence[int], c: float, eps: float, samples: int, rng
):
    """MC estimate (with Wilson 95% CI) of the probability that a random
    sub-hypercube through x places it in the c-middle layers. The exact value
    is available as walks.typical_probability_exact."""
    x = shape.check_point(x)
    hits = 0
    for _ in range(samples):
        H = walks.sample_hypercube_at(shape, x, rng)
        hits += walks.middle_layer_member(H, x, c, eps)
    lo, hi = wilson_interval(hits, samples)
    return hits / samples, (lo, hi)


def is_typical_exact(shape: GridShape, x: Sequence[int], c: float, eps: float) -> bool:
    """Typicality per the exact conditioned-cube weight distribution:
    Pr[x in middle layers] >= 1 - (eps/d)^5."""
    p = walks.typical_probability_exact(shape, x, c, eps)
    return p >= 1.0 - (eps / shape.d) ** 5
