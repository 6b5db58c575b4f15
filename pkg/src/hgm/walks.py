"""Directed lazy random walks on [n]^d, shift distributions, and exact pmfs.

The walk picks a uniform subset of min(tau, d) coordinates; each chosen
coordinate draws a dyadic interval of Z_n (wrap-around) containing the
current value, then a uniform element of that interval distinct from the
current value, and moves only if the draw lies strictly in the walk
direction (plain integer comparison after unwrapping).

Three equivalent formulations of the same endpoint distribution are
implemented via genuinely different enumerations, so their pointwise
agreement is a meaningful cross-check:

  * ``direct``     -- per-coordinate kernel from arithmetic interval counts
  * ``cube_first`` -- sub-hypercube drawn unconditionally, anchor uniform in it
  * ``cube_at_x``  -- sub-hypercube drawn conditioned to contain the anchor

Known wrinkle: counting intervals as (start, size) windows, an interval of
size n contains every value, so the count of windows covering two values at
circular gap g is max(0, L-g) + max(0, L-(n-g)) -- NOT L - g in general.
Getting this wrong halves the n=2 move probability, which unit tests pin.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Optional, Sequence

import numpy as np

from .errors import BudgetError, DomainError
from .grid import GridShape, Point

DEFAULT_PMF_BUDGET = 10**8


@dataclass(frozen=True)
class WalkSpec:
    """Direction and length of a lazy directed walk on a grid."""

    direction: str  # "up" or "down"
    length: int
    shape: GridShape

    def __post_init__(self):
        if self.direction not in ("up", "down"):
            raise DomainError(f"direction must be 'up' or 'down', got {self.direction!r}")
        if self.length < 0:
            raise DomainError("walk length must be non-negative")

    @property
    def effective_coords(self) -> int:
        # The walk picks a size-tau coordinate subset; tau may exceed d when
        # drawn from the tester's power-of-two schedule, so cap at d.
        return min(self.length, self.shape.d)


@dataclass(frozen=True)
class Hypercube:
    """A sub-hypercube prod_i {a_i, b_i} with a_i < b_i."""

    pairs: tuple

    def __post_init__(self):
        for a, b in self.pairs:
            if not a < b:
                raise DomainError(f"hypercube pair ({a}, {b}) must have a < b")

    @property
    def d(self) -> int:
        return len(self.pairs)

    def contains_vertex(self, x: Sequence[int]) -> bool:
        return len(x) == self.d and all(c in p for c, p in zip(x, self.pairs))

    def weight(self, x: Sequence[int]) -> int:
        """Number of coordinates sitting at the upper endpoint b_i."""
        if not self.contains_vertex(x):
            raise DomainError(f"{tuple(x)} is not a vertex of this hypercube")
        return sum(1 for c, (a, b) in zip(x, self.pairs) if c == b)

    def bottom(self) -> Point:
        return tuple(a for a, _ in self.pairs)

    def top(self) -> Point:
        return tuple(b for _, b in self.pairs)

    def vertices(self):
        for choice in itertools.product(*[(a, b) for a, b in self.pairs]):
            yield choice


@dataclass
class WalkPmf:
    """Exact endpoint distribution of a walk from a fixed anchor."""

    anchor: Point
    spec: WalkSpec
    table: Dict[Point, float] = field(default_factory=dict)

    def total_mass(self) -> float:
        return math.fsum(self.table.values())

    def prob(self, y: Sequence[int]) -> float:
        return self.table.get(tuple(y), 0.0)

    def max_abs_diff(self, other: "WalkPmf") -> float:
        keys = set(self.table) | set(other.table)
        return max((abs(self.prob(k) - other.prob(k)) for k in keys), default=0.0)

    def tv_distance_to_counts(self, counts: Dict[Point, int], total: int) -> float:
        keys = set(self.table) | set(counts)
        return 0.5 * math.fsum(
            abs(self.prob(k) - counts.get(k, 0) / total) for k in keys
        )

    def to_csv(self, path) -> None:
        """Write (point_index, probability) rows in index order."""
        shape = self.spec.shape
        with open(path, "w") as fh:
            fh.write("point_index,probability\n")
            for y in sorted(self.table, key=shape.index_of):
                fh.write(f"{shape.index_of(y)},{self.table[y]!r}\n")


# ---------------------------------------------------------------------------
# Per-coordinate kernels
# ---------------------------------------------------------------------------


def _windows(n: int, size: int):
    """All (start, size) wrap-around windows of Z_n as 0-based value sets."""
    for s in range(n):
        yield [(s + k) % n for k in range(size)]


def _count_windows_covering(n: int, size: int, gap: int) -> int:
    """Number of (start, size) windows of Z_n containing two values at circular
    offset gap (0 < gap < n). Both wrap directions can contribute."""
    return max(0, size - gap) + max(0, size - (n - gap))


@lru_cache(maxsize=None)
def line_kernel(n: int) -> np.ndarray:
    """K[u, v] = Pr[c = v] for a selected coordinate at value u (1-based).

    Computed arithmetically from window counts; K[u, u] = 0 and each row
    sums to 1.
    """
    q_max = n.bit_length() - 1
    K = np.zeros((n + 1, n + 1))
    for u in range(1, n + 1):
        for v in range(1, n + 1):
            if v == u:
                continue
            gap = (v - u) % n
            acc = 0.0
            for q in range(1, q_max + 1):
                size = 2**q
                cnt = _count_windows_covering(n, size, gap)
                # size windows contain u; given one, c is uniform on size-1 values
                acc += cnt / size / (size - 1)
            K[u, v] = acc / q_max
    return K


@lru_cache(maxsize=None)
def line_kernel_enumerated(n: int) -> np.ndarray:
    """Same kernel as :func:`line_kernel` but by brute window enumeration."""
    q_max = n.bit_length() - 1
    K = np.zeros((n + 1, n + 1))
    for u in range(1, n + 1):
        for q in range(1, q_max + 1):
            size = 2**q
            covering = [w for w in _windows(n, size) if (u - 1) in w]
            for w in covering:
                for c0 in w:
                    if c0 == u - 1:
                        continue
                    K[u, c0 + 1] += 1.0 / q_max / len(covering) / (size - 1)
    return K


def lazy_up_prob(n: int, u: int) -> float:
    """Probability a selected coordinate at value u does not move upward."""
    K = line_kernel(n)
    return float(K[u, 1:u].sum())


def lazy_down_prob(n: int, u: int) -> float:
    K = line_kernel(n)
    return float(K[u, u + 1 :].sum())


@lru_cache(maxsize=None)
def pair_distribution(n: int) -> Dict[tuple, float]:
    """Per-coordinate law of (a_i, b_i) for the unconditional hypercube draw."""
    q_max = n.bit_length() - 1
    dist: Dict[tuple, float] = {}
    for q in range(1, q_max + 1):
        size = 2**q
        pair_count = size * (size - 1) // 2
        for w in _windows(n, size):
            for a0, b0 in itertools.combinations(sorted(w), 2):
                key = (a0 + 1, b0 + 1)
                dist[key] = dist.get(key, 0.0) + 1.0 / q_max / n / pair_count
    return dist


@lru_cache(maxsize=None)
def pair_distribution_at(n: int, u: int) -> Dict[tuple, float]:
    """Per-coordinate law of (a_i, b_i) for the draw conditioned on containing u."""
    q_max = n.bit_length() - 1
    dist: Dict[tuple, float] = {}
    for q in range(1, q_max + 1):
        size = 2**q
        covering = [w for w in _windows(n, size) if (u - 1) in w]
        for w in covering:
            for c0 in w:
                if c0 == u - 1:
                    continue
                c = c0 + 1
                key = (min(u, c), max(u, c))
                dist[key] = dist.get(key, 0.0) + 1.0 / q_max / len(covering) / (size - 1)
    return dist


# ---------------------------------------------------------------------------
# Samplers (scalar)
# ---------------------------------------------------------------------------


def _sample_coordinate(n: int, u: int, rng) -> int:
    """One Def-2.1 coordinate draw: returns c (may land on either side of u)."""
    q = int(rng.integers(1, n.bit_length()))
    size = 2**q
    offset = int(rng.integers(0, size))  # position of u within the window
    start = (u - 1 - offset) % n
    j = int(rng.integers(0, size - 1))
    if j >= offset:
        j += 1
    return (start + j) % n + 1


def _sample_walk(shape: GridShape, x: Point, tau: int, rng, up: bool) -> Point:
    x = shape.check_point(x)
    if tau == 0:
        return x
    m = min(tau, shape.d)
    coords = rng.choice(shape.d, size=m, replace=False)
    y = list(x)
    for r in sorted(int(c) for c in coords):
        c = _sample_coordinate(shape.n, x[r], rng)
        if (c > x[r]) if up else (c < x[r]):
            y[r] = c
    return tuple(y)


def sample_upwalk(shape: GridShape, x: Sequence[int], tau: int, rng) -> Point:
    return _sample_walk(shape, tuple(x), tau, rng, up=True)


def sample_downwalk(shape: GridShape, y: Sequence[int], tau: int, rng) -> Point:
    return _sample_walk(shape, tuple(y), tau, rng, up=False)


def sample_upshift(shape: GridShape, x: Sequence[int], tau: int, rng) -> Point:
    y = sample_upwalk(shape, x, tau, rng)
    return tuple(b - a for a, b in zip(x, y))


def sample_downshift(shape: GridShape, x: Sequence[int], tau: int, rng) -> Point:
    y = sample_downwalk(shape, x, tau, rng)
    return tuple(a - b for a, b in zip(x, y))


def apply_shift(
    shape: GridShape, anchor: Sequence[int], shift: Sequence[int], sign: int
) -> Optional[Point]:
    """anchor + sign*shift, or None when the result leaves [n]^d.

    The tester applies shifts to anchors from the same coupled walk, where
    the result is always in-domain; None is defensive only.
    """
    moved = tuple(a + sign * s for a, s in zip(anchor, shift))
    if not shape.contains(moved):
        return None
    return moved


def sample_hypercube(shape: GridShape, rng) -> Hypercube:
    """Unconditional sub-hypercube draw (uniform dyadic window per coordinate)."""
    n = shape.n
    pairs = []
    for _ in range(shape.d):
        q = int(rng.integers(1, n.bit_length()))
        size = 2**q
        start = int(rng.integers(0, n))
        window = sorted((start + k) % n + 1 for k in range(size))
        i, j = rng.choice(size, size=2, replace=False)
        a, b = window[int(i)], window[int(j)]
        pairs.append((min(a, b), max(a, b)))
    return Hypercube(tuple(pairs))


def sample_hypercube_at(shape: GridShape, x: Sequence[int], rng) -> Hypercube:
    """Sub-hypercube draw conditioned to have x as a vertex."""
    x = shape.check_point(x)
    pairs = []
    for u in x:
        c = _sample_coordinate(shape.n, u, rng)
        pairs.append((min(u, c), max(u, c)))
    return Hypercube(tuple(pairs))


def sample_hypercube_walk(
    H: Hypercube, x: Sequence[int], tau: int, direction: str, rng
) -> Point:
    """Lazy walk inside a sub-hypercube: selected coordinates at the movable
    endpoint flip to the other endpoint."""
    if direction not in ("up", "down"):
        raise DomainError(f"direction must be 'up' or 'down', got {direction!r}")
    if not H.contains_vertex(x):
        raise DomainError(f"{tuple(x)} is not a vertex of the hypercube")
    m = min(tau, H.d)
    y = list(x)
    if m > 0:
        coords = rng.choice(H.d, size=m, replace=False)
        for r in (int(c) for c in coords):
            a, b = H.pairs[r]
            if direction == "up" and y[r] == a:
                y[r] = b
            elif direction == "down" and y[r] == b:
                y[r] = a
    return tuple(y)


# ---------------------------------------------------------------------------
# Samplers (vectorized batches, for the tester hot path)
# ---------------------------------------------------------------------------


def sample_points_batch(shape: GridShape, count: int, rng) -> np.ndarray:
    return rng.integers(1, shape.n + 1, size=(count, shape.d))


def sample_walk_batch(
    shape: GridShape, X: np.ndarray, lengths: np.ndarray, direction: str, rng
) -> np.ndarray:
    """Vectorized walk endpoints for a batch of anchors with per-row lengths.

    Draws the same per-coordinate randomness as the scalar sampler: subset
    membership via a uniform ranking, then (q, window offset, element) per
    coordinate. Coordinates outside the subset discard their draws, keeping
    the consumed randomness layout independent of lengths.
    """
    n, d = shape.n, shape.d
    X = np.asarray(X, dtype=np.int64)
    N = X.shape[0]
    m = np.minimum(np.asarray(lengths, dtype=np.int64), d)
    ranks = rng.random((N, d)).argsort(axis=1).argsort(axis=1)
    selected = ranks < m[:, None]
    q = rng.integers(1, shape.log_n + 1, size=(N, d))
    size = np.int64(1) << q
    offset = rng.integers(0, size)
    j = rng.integers(0, size - 1)
    j = j + (j >= offset)
    c = (X - 1 - offset + j) % n + 1
    if direction == "up":
        move = selected & (c > X)
    else:
        move = selected & (c < X)
    return np.where(move, c, X)


def sample_hypercube_batch(shape: GridShape, count: int, rng):
    """Vectorized unconditional sub-hypercube draws: (A, B) arrays, A < B."""
    n, d = shape.n, shape.d
    q = rng.integers(1, shape.log_n + 1, size=(count, d))
    size = np.int64(1) << q
    start = rng.integers(0, n, size=(count, d))
    r1 = rng.integers(0, size)
    r2 = rng.integers(0, size - 1)
    r2 = r2 + (r2 >= r1)
    a = (start + r1) % n + 1
    b = (start + r2) % n + 1
    return np.minimum(a, b), np.maximum(a, b)


def sample_hypercube_at_batch(shape: GridShape, X: np.ndarray, rng):
    """Vectorized conditioned draws: (A, B) with X a vertex of every cube."""
    n = shape.n
    X = np.asarray(X, dtype=np.int64)
    q = rng.integers(1, shape.log_n + 1, size=X.shape)
    size = np.int64(1) << q
    offset = rng.integers(0, size)
    j = rng.integers(0, size - 1)
    j = j + (j >= offset)
    c = (X - 1 - offset + j) % n + 1
    return np.minimum(X, c), np.maximum(X, c)


def uniform_vertex_batch(A: np.ndarray, B: np.ndarray, rng) -> np.ndarray:
    top = rng.integers(0, 2, size=A.shape).astype(bool)
    return np.where(top, B, A)


def sample_hypercube_walk_batch(
    A: np.ndarray, B: np.ndarray, X: np.ndarray, lengths, direction: str, rng
) -> np.ndarray:
    """Vectorized in-cube lazy walks from vertices X of the cubes (A, B)."""
    N, d = X.shape
    m = np.minimum(np.asarray(lengths, dtype=np.int64), d)
    ranks = rng.random((N, d)).argsort(axis=1).argsort(axis=1)
    selected = ranks < (np.atleast_1d(m).reshape(-1, 1))
    if direction == "up":
        move = selected & (X == A)
        return np.where(move, B, X)
    move = selected & (X == B)
    return np.where(move, A, X)


# ---------------------------------------------------------------------------
# Exact pmfs for small domains
# ---------------------------------------------------------------------------


def _esp(values: Sequence[float], k: int) -> float:
    """Elementary symmetric polynomial e_k of the given values."""
    coeffs = [1.0] + [0.0] * k
    for v in values:
        for j in range(min(k, len(coeffs) - 1), 0, -1):
            coeffs[j] += v * coeffs[j - 1]
    return coeffs[k]


def _kernels_direct(shape: GridShape, x: Point, up: bool):
    K = line_kernel(shape.n)
    moves, lazies = [], []
    for u in x:
        if up:
            mv = {v: float(K[u, v]) for v in range(u + 1, shape.n + 1) if K[u, v] > 0}
            lz = float(K[u, 1:u].sum())
        else:
            mv = {v: float(K[u, v]) for v in range(1, u) if K[u, v] > 0}
            lz = float(K[u, u + 1 :].sum())
        moves.append(mv)
        lazies.append(lz)
    return moves, lazies


def _kernels_from_pairs(shape: GridShape, x: Point, up: bool, conditioned: bool):
    moves, lazies = [], []
    for u in x:
        if conditioned:
            dist = pair_distribution_at(shape.n, u)
        else:
            raw = pair_distribution(shape.n)
            # Bayes: condition the unconditional cube on the uniform anchor
            # landing at u (anchor marginal is uniform on [n]).
            dist = {
                p: w * 0.5 * shape.n
                for p, w in raw.items()
                if u in p
            }
        mv: Dict[int, float] = {}
        lz = 0.0
        for (a, b), w in dist.items():
            other = b if u == a else a
            if up:
                if other > u:
                    mv[other] = mv.get(other, 0.0) + w
                else:
                    lz += w
            else:
                if other < u:
                    mv[other] = mv.get(other, 0.0) + w
                else:
                    lz += w
        moves.append(mv)
        lazies.append(lz)
    return moves, lazies


def _pmf_from_kernels(
    shape: GridShape,
    x: Point,
    spec: WalkSpec,
    moves,
    lazies,
    budget: int,
) -> WalkPmf:
    d = shape.d
    m = spec.effective_coords
    denom = math.comb(d, m)
    table: Dict[Point, float] = {}
    cost = 0
    for t in range(0, m + 1):
        for S in itertools.combinations(range(d), t):
            others = [lazies[i] for i in range(d) if i not in S]
            weight = _esp(others, m - t) / denom
            if weight == 0.0:
                continue
            options = [list(moves[i].items()) for i in S]
            for combo in itertools.product(*options):
                cost += d
                if cost > budget:
                    raise BudgetError(
                        f"exact pmf enumeration exceeds budget ({budget} terms)"
                    )
                p = weight
                y = list(x)
                for (i, (v, pv)) in zip(S, combo):
                    p *= pv
                    y[i] = v
                key = tuple(y)
                table[key] = table.get(key, 0.0) + p
    return WalkPmf(anchor=x, spec=spec, table=table)


def exact_pmf(
    shape: GridShape,
    x: Sequence[int],
    spec: WalkSpec,
    formulation: str = "direct",
    budget: int = DEFAULT_PMF_BUDGET,
) -> WalkPmf:
    """Exact endpoint pmf of the walk from x, via one of three formulations."""
    x = shape.check_point(x)
    if spec.shape != shape:
        raise DomainError("walk spec shape mismatch")
    up = spec.direction == "up"
    if formulation == "direct":
        moves, lazies = _kernels_direct(shape, x, up)
    elif formulation == "cube_first":
        moves, lazies = _kernels_from_pairs(shape, x, up, conditioned=False)
    elif formulation == "cube_at_x":
        moves, lazies = _kernels_from_pairs(shape, x, up, conditioned=True)
    else:
        raise DomainError(f"unknown formulation {formulation!r}")
    return _pmf_from_kernels(shape, x, spec, moves, lazies, budget)


def exact_shift_pmf(
    shape: GridShape,
    x: Sequence[int],
    tau: int,
    direction: str,
    budget: int = DEFAULT_PMF_BUDGET,
) -> Dict[Point, float]:
    """Exact pmf of the shift magnitude vector drawn at anchor x."""
    spec = WalkSpec(direction, tau, shape)
    pmf = exact_pmf(shape, x, spec, budget=budget)
    out: Dict[Point, float] = {}
    for y, p in pmf.table.items():
        s = tuple(abs(b - a) for a, b in zip(x, y))
        out[s] = out.get(s, 0.0) + p
    return out


# ---------------------------------------------------------------------------
# Middle layers, restricted walk pdf, reversibility closed forms
# ---------------------------------------------------------------------------


def middle_band_halfwidth(d: int, c: float, eps: float) -> float:
    """Half-width of the c-middle Hamming-weight band: sqrt(4 c d log(d/eps))."""
    if not 0 < eps:
        raise DomainError("eps must be positive")
    return math.sqrt(4.0 * c * d * math.log(d / eps))


def weight_in_band(weight: int, d: int, c: float, eps: float) -> bool:
    return abs(weight - d / 2.0) <= middle_band_halfwidth(d, c, eps)


def middle_layer_member(H: Hypercube, x: Sequence[int], c: float, eps: float) -> bool:
    """True iff x's weight in H lies in the c-middle layers."""
    return weight_in_band(H.weight(x), H.d, c, eps)


def middle_layer_fraction_exact(d: int, c: float, eps: float) -> Fraction:
    """Exact fraction of hypercube vertices in the c-middle layers (binomial sum)."""
    hw = middle_band_halfwidth(d, c, eps)
    total = sum(
        math.comb(d, w) for w in range(d + 1) if abs(w - d / 2.0) <= hw
    )
    return Fraction(total, 2**d)


def weight_distribution_at(shape: GridShape, x: Sequence[int]) -> np.ndarray:
    """Exact law of x's weight in a conditioned sub-hypercube draw.

    Coordinate i sits at the upper endpoint iff its draw lands below x_i,
    so the weight is a sum of independent Bernoullis.
    """
    x = shape.check_point(x)
    probs = [lazy_up_prob(shape.n, u) for u in x]
    dist = np.array([1.0])
    for p in probs:
        dist = np.convolve(dist, [1.0 - p, p])
    return dist


def typical_probability_exact(
    shape: GridShape, x: Sequence[int], c: float, eps: float
) -> float:
    """Pr over conditioned cubes that x lies in the c-middle layers."""
    dist = weight_distribution_at(shape, x)
    d = shape.d
    return math.fsum(
        float(dist[w]) for w in range(d + 1) if weight_in_band(w, d, c, eps)
    )


def cube_walk_closed_form(
    d: int, weight_x: int, t: int, ell: int, direction: str
) -> Fraction:
    """Probability that an ell-step lazy cube walk from a weight-w vertex lands
    on a fixed target at Hamming distance t, as an exact binomial ratio."""
    if direction not in ("up", "down"):
        raise DomainError(f"direction must be 'up' or 'down', got {direction!r}")
    if not (0 <= t <= ell <= d):
        raise DomainError(f"need 0 <= t <= ell <= d, got t={t}, ell={ell}, d={d}")
    if not 0 <= weight_x <= d:
        raise DomainError(f"weight {weight_x} out of range for d={d}")
    free = d - weight_x if direction == "up" else weight_x
    if t > free:
        raise DomainError(
            f"cannot move {t} coordinates {direction}ward from weight {weight_x}"
        )
    stay_pool = weight_x if direction == "up" else d - weight_x
    return Fraction(math.comb(stay_pool, ell - t), math.comb(d, ell))


def cube_walk_prob_enumerated(
    d: int, weight_x: int, t: int, ell: int, direction: str
) -> Fraction:
    """Independent oracle for :func:`cube_walk_closed_form`: enumerate all
    size-ell coordinate subsets and count the ones landing on the target."""
    if not (0 <= t <= ell <= d) or not 0 <= weight_x <= d:
        raise DomainError("inconsistent parameters")
    # Fix the vertex with its first weight_x coordinates at the top endpoint;
    # the target differs in the first t movable coordinates.
    movable = set(range(weight_x, d)) if direction == "up" else set(range(weight_x))
    if t > len(movable):
        raise DomainError("target not reachable")
    target_flips = set(sorted(movable)[:t])
    hits = sum(
        1
        for R in itertools.combinations(range(d), ell)
        if set(R) & movable == target_flips
    )
    return Fraction(hits, math.comb(d, ell))


def reversibility_ratio_product(d: int, weight_x: int, t: int, ell: int) -> float:
    """Product form of the up/down pmf ratio for a middle-layer pair:
    prod_i (1 + (2 e_x + t) / (d/2 - e_x - t - i)), e_x = weight_x - d/2."""
    e_x = weight_x - d / 2.0
    acc = 1.0
    for i in range(ell - t):
        acc *= 1.0 + (2.0 * e_x + t) / (d / 2.0 - e_x - t - i)
    return acc


def restricted_walk_pdf(
    shape: GridShape,
    x: Sequence[int],
    xp: Sequence[int],
    ell: int,
    eps: float,
    c: float = 100.0,
) -> float:
    """Walk pdf between comparable points, counting only sub-hypercubes where
    both endpoints lie in the c-middle layers.

    Averages over conditioned cubes at x: the fixed differing coordinates pin
    their pairs, the rest contribute an independent Bernoulli weight, and the
    in-cube landing probability is the binomial ratio closed form.
    """
    x = shape.check_point(x)
    xp = shape.check_point(xp)
    if ell > shape.d:
        raise DomainError("walk length exceeds dimension for in-cube walk")
    diff_up = [i for i in range(shape.d) if xp[i] > x[i]]
    diff_down = [i for i in range(shape.d) if xp[i] < x[i]]
    if diff_up and diff_down:
        raise DomainError("endpoints must be comparable")
    up = not diff_down
    S = diff_up if up else diff_down
    t = len(S)
    if t > ell:
        return 0.0
    K = line_kernel(shape.n)
    pinned = 1.0
    for i in S:
        pinned *= float(K[x[i], xp[i]])
    if pinned == 0.0:
        return 0.0
    free_probs = [lazy_up_prob(shape.n, x[i]) for i in range(shape.d) if i not in S]
    dist = np.array([1.0])
    for p in free_probs:
        dist = np.convolve(dist, [1.0 - p, p])
    d = shape.d
    base = 0 if up else t  # pinned coordinates' contribution to x's weight
    total = 0.0
    comp = 1.0 / math.comb(d, ell)
    for w_free in range(len(dist)):
        w_x = w_free + base
        w_xp = w_x + t if up else w_x - t
        if not (weight_in_band(w_x, d, c, eps) and weight_in_band(w_xp, d, c, eps)):
            continue
        stay_pool = w_x if up else d - w_x
        total += float(dist[w_free]) * math.comb(stay_pool, ell - t) * comp
    return total
