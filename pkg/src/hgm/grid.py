"""Hypergrid domain [n]^d: shapes, points, oracles, families, truth tables.

Points are 1-based tuples of length d. The linear index uses mixed radix
with coordinate 1 least significant: index(x) = sum_i (x_i - 1) * n^(i-1).
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError, FormatError

Point = tuple[int, ...]

_MAGIC = b"HGF1"


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridShape:
    """The domain [n]^d. n must be a power of two."""

    n: int
    d: int

    def __post_init__(self):
        if self.n < 2 or not _is_power_of_two(self.n):
            raise DomainError(f"side length must be a power of two >= 2, got {self.n}")
        if self.d < 1:
            raise DomainError(f"dimension must be positive, got {self.d}")

    @property
    def log_n(self) -> int:
        return self.n.bit_length() - 1

    @property
    def num_points(self) -> int:
        return self.n**self.d

    def contains(self, x: Sequence[int]) -> bool:
        return len(x) == self.d and all(1 <= c <= self.n for c in x)

    def check_point(self, x: Sequence[int]) -> Point:
        if not self.contains(x):
            raise DomainError(f"point {tuple(x)} not in [{self.n}]^{self.d}")
        return tuple(x)

    def index_of(self, x: Sequence[int]) -> int:
        self.check_point(x)
        idx = 0
        for c in reversed(x):
            idx = idx * self.n + (c - 1)
        return idx

    def point_of(self, idx: int) -> Point:
        if not 0 <= idx < self.num_points:
            raise DomainError(f"index {idx} out of range for {self}")
        coords = []
        for _ in range(self.d):
            coords.append(idx % self.n + 1)
            idx //= self.n
        return tuple(coords)

    def points(self) -> Iterator[Point]:
        for idx in range(self.num_points):
            yield self.point_of(idx)

    def all_points_array(self) -> np.ndarray:
        """All points as an (n^d, d) int array, in index order."""
        idx = np.arange(self.num_points)
        return self.points_of_indices(idx)

    def points_of_indices(self, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        out = np.empty(idx.shape + (self.d,), dtype=np.int64)
        rem = idx
        for i in range(self.d):
            out[..., i] = rem % self.n + 1
            rem = rem // self.n
        return out

    def indices_of_points(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.int64)
        idx = np.zeros(pts.shape[:-1], dtype=np.int64)
        for i in reversed(range(self.d)):
            idx = idx * self.n + (pts[..., i] - 1)
        return idx


class Comparability(enum.Enum):
    INCOMPARABLE = "incomparable"
    X_BELOW_Y = "x_below_y"
    Y_BELOW_X = "y_below_x"
    EQUAL = "equal"


def comparable(x: Sequence[int], y: Sequence[int]) -> Comparability:
    """Classify a pair under the coordinatewise partial order."""
    if len(x) != len(y):
        raise DomainError(f"shape mismatch: {len(x)} vs {len(y)} coordinates")
    le = all(a <= b for a, b in zip(x, y))
    ge = all(a >= b for a, b in zip(x, y))
    if le and ge:
        return Comparability.EQUAL
    if le:
        return Comparability.X_BELOW_Y
    if ge:
        return Comparability.Y_BELOW_X
    return Comparability.INCOMPARABLE


class FunctionOracle:
    """Queryable Boolean function on a grid, with query accounting.

    ``query_count`` increases by exactly one per point evaluated (batch
    evaluation of N points adds N). ``spawn_worker`` returns an oracle
    sharing the same function but with a fresh counter, so parallel workers
    can count queries independently and sum them on join.
    """

    def __init__(
        self,
        shape: GridShape,
        fn: Callable[[Point], int],
        fn_many: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        name: str = "oracle",
    ):
        self.shape = shape
        self._fn = fn
        self._fn_many = fn_many
        self.name = name
        self.query_count = 0

    def __call__(self, x: Sequence[int]) -> int:
        x = self.shape.check_point(x)
        self.query_count += 1
        v = int(self._fn(x))
        assert v in (0, 1)
        return v

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate an (N, d) array of points; counts N queries."""
        pts = np.asarray(pts, dtype=np.int64)
        if pts.ndim != 2 or pts.shape[1] != self.shape.d:
            raise DomainError(f"expected (N, {self.shape.d}) points, got {pts.shape}")
        self.query_count += pts.shape[0]
        if self._fn_many is not None:
            return np.asarray(self._fn_many(pts), dtype=np.int8)
        return np.fromiter(
            (self._fn(tuple(int(c) for c in p)) for p in pts),
            dtype=np.int8,
            count=pts.shape[0],
        )

    def peek(self, x: Sequence[int]) -> int:
        """Evaluate without counting a query (for oracles validating oracles)."""
        return int(self._fn(tuple(x)))

    def spawn_worker(self) -> "FunctionOracle":
        return FunctionOracle(self.shape, self._fn, self._fn_many, self.name)

    def __repr__(self):
        return f"FunctionOracle({self.name}, n={self.shape.n}, d={self.shape.d})"


class ExplicitFunction(FunctionOracle):
    """Oracle backed by a bit-packed truth table over all n^d points."""

    def __init__(self, shape: GridShape, bits: np.ndarray, name: str = "explicit"):
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.shape != (shape.num_points,):
            raise DomainError(
                f"expected {shape.num_points} bits, got {bits.shape}"
            )
        self.bits = bits
        super().__init__(
            shape,
            fn=lambda x: int(bits[shape.index_of(x)]),
            fn_many=lambda pts: bits[shape.indices_of_points(pts)],
            name=name,
        )

    def spawn_worker(self) -> "ExplicitFunction":
        return ExplicitFunction(self.shape, self.bits, self.name)


def tabulate(f: FunctionOracle) -> ExplicitFunction:
    """Materialize an oracle into an explicit truth table (does not count queries)."""
    pts = f.shape.all_points_array()
    if f._fn_many is not None:
        bits = np.asarray(f._fn_many(pts), dtype=np.uint8)
    else:
        bits = np.fromiter(
            (f.peek(tuple(int(c) for c in p)) for p in pts),
            dtype=np.uint8,
            count=f.shape.num_points,
        )
    return ExplicitFunction(f.shape, bits, name=f.name)


# ---------------------------------------------------------------------------
# Built-in function families
# ---------------------------------------------------------------------------

FAMILY_NAMES = (
    "constant0",
    "constant1",
    "dictator",
    "anti_dictator",
    "majority_threshold",
    "surface",
    "random_balanced",
    "explicit",
)


@dataclass(frozen=True)
class FamilySpec:
    """Parameters selecting a built-in function family."""

    name: str
    dim: int = 1  # 1-based coordinate for (anti-)dictator
    threshold: Optional[int] = None  # defaults to n/2 + 1
    seed: int = 0
    path: Optional[str] = None  # for the explicit family

    def __post_init__(self):
        if self.name not in FAMILY_NAMES:
            raise ConfigError(f"unknown family {self.name!r}; choose from {FAMILY_NAMES}")


def _splitmix64(x: np.ndarray) -> np.ndarray:
    # Deterministic 64-bit mixer; keys the pseudo-random interior bits.
    x = (x + np.uint64(0x9E3779B97F4A7C15)).astype(np.uint64)
    x = ((x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)).astype(np.uint64)
    x = ((x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)).astype(np.uint64)
    return x ^ (x >> np.uint64(31))


def _hash_bit(seed: int, idx: np.ndarray) -> np.ndarray:
    mixed = _splitmix64(np.asarray(idx, dtype=np.uint64) ^ _splitmix64(np.full_like(np.asarray(idx, dtype=np.uint64), seed, dtype=np.uint64)))
    return (mixed & np.uint64(1)).astype(np.int8)


def surface_warning(shape: GridShape) -> bool:
    """True when the shape leaves the construction's intended regime n <= d/ln d."""
    return shape.n > shape.d / max(np.log(shape.d), 1e-9)


def make_family(spec: FamilySpec, shape: GridShape) -> FunctionOracle:
    """Build a pure oracle for one of the built-in families."""
    n, d = shape.n, shape.d
    t = spec.threshold if spec.threshold is not None else n // 2 + 1
    name = spec.name

    if name == "constant0":
        return FunctionOracle(shape, lambda x: 0, lambda p: np.zeros(len(p), np.int8), name)
    if name == "constant1":
        return FunctionOracle(shape, lambda x: 1, lambda p: np.ones(len(p), np.int8), name)
    if name in ("dictator", "anti_dictator"):
        i = spec.dim
        if not 1 <= i <= d:
            raise ConfigError(f"dictator coordinate {i} out of range for d={d}")
        if not 1 <= t <= n + 1:
            raise ConfigError(f"threshold {t} out of range for n={n}")
        if name == "dictator":
            return FunctionOracle(
                shape,
                lambda x: int(x[i - 1] >= t),
                lambda p: (p[:, i - 1] >= t).astype(np.int8),
                f"dictator(i={i},t={t})",
            )
        return FunctionOracle(
            shape,
            lambda x: int(x[i - 1] < t),
            lambda p: (p[:, i - 1] < t).astype(np.int8),
            f"anti_dictator(i={i},t={t})",
        )
    if name == "majority_threshold":
        # Monotone: 1 iff the coordinate sum reaches the midpoint of its range.
        cut = d * (n + 1) / 2

        return FunctionOracle(
            shape,
            lambda x: int(sum(x) >= cut),
            lambda p: (p.sum(axis=1) >= cut).astype(np.int8),
            name,
        )
    if name == "surface":
        seed = spec.seed

        def surface_scalar(x: Point) -> int:
            for c in x:
                if c == 1:
                    return 1
                if c == n:
                    return 0
            return int(_hash_bit(seed, np.asarray([shape.index_of(x)]))[0])

        def surface_many(pts: np.ndarray) -> np.ndarray:
            out = np.full(len(pts), -1, dtype=np.int8)
            for i in range(d):
                col = pts[:, i]
                undecided = out == -1
                out[undecided & (col == 1)] = 1
                out[undecided & (col == n)] = 0
            interior = out == -1
            if interior.any():
                idx = shape.indices_of_points(pts[interior])
                out[interior] = _hash_bit(seed, idx)
            return out

        return FunctionOracle(shape, surface_scalar, surface_many, f"surface(seed={seed})")
    if name == "random_balanced":
        seed = spec.seed
        return FunctionOracle(
            shape,
            lambda x: int(_hash_bit(seed, np.asarray([shape.index_of(x)]))[0]),
            lambda p: _hash_bit(seed, shape.indices_of_points(p)),
            f"random_balanced(seed={seed})",
        )
    if name == "explicit":
        if spec.path is None:
            raise ConfigError("explicit family requires a truth-table path")
        f = load_truth_table(spec.path)
        if f.shape != shape:
            raise ConfigError(f"truth table shape {f.shape} does not match requested {shape}")
        return f
    raise ConfigError(f"unknown family {name!r}")


# ---------------------------------------------------------------------------
# Transformations
# ---------------------------------------------------------------------------


def reflect_point(shape: GridShape, x: Sequence[int]) -> Point:
    return tuple(shape.n + 1 - c for c in x)


def doubly_flip(f: FunctionOracle) -> FunctionOracle:
    """g(x) = 1 - f(x reflected through the grid center).

    Reflection maps coordinate c to n + 1 - c, keeping points in [1, n].
    (x, y) violates f iff (reflect(y), reflect(x)) violates g, and the
    distance to monotonicity is preserved.
    """
    shape = f.shape

    def g(x: Point) -> int:
        return 1 - f.peek(reflect_point(shape, x))

    def g_many(pts: np.ndarray) -> np.ndarray:
        refl = shape.n + 1 - np.asarray(pts, dtype=np.int64)
        if f._fn_many is not None:
            vals = np.asarray(f._fn_many(refl), dtype=np.int8)
        else:
            vals = np.fromiter(
                (f.peek(tuple(int(c) for c in p)) for p in refl), np.int8, len(refl)
            )
        return (1 - vals).astype(np.int8)

    return FunctionOracle(shape, g, g_many, f"flip({f.name})")


def restrict_to_subgrid(
    f: FunctionOracle, subsets: Sequence[Sequence[int]]
) -> FunctionOracle:
    """Restrict f to the product of d sorted coordinate multisets of size k."""
    d = f.shape.d
    if len(subsets) != d:
        raise DomainError(f"expected {d} coordinate multisets, got {len(subsets)}")
    k = len(subsets[0])
    tables = []
    for i, sub in enumerate(subsets):
        if len(sub) != k:
            raise DomainError("all coordinate multisets must have equal size")
        if any(not 1 <= v <= f.shape.n for v in sub):
            raise DomainError(f"subset {i + 1} has values outside [1, {f.shape.n}]")
        if any(sub[j] > sub[j + 1] for j in range(k - 1)):
            raise DomainError(f"subset {i + 1} is not sorted non-decreasing")
        tables.append(np.asarray(sub, dtype=np.int64))
    sub_shape = GridShape(k, d)

    def g(z: Point) -> int:
        return f.peek(tuple(int(tables[i][z[i] - 1]) for i in range(d)))

    def g_many(pts: np.ndarray) -> np.ndarray:
        mapped = np.column_stack([tables[i][pts[:, i] - 1] for i in range(d)])
        if f._fn_many is not None:
            return np.asarray(f._fn_many(mapped), dtype=np.int8)
        return np.fromiter(
            (f.peek(tuple(int(c) for c in p)) for p in mapped), np.int8, len(mapped)
        )

    return FunctionOracle(sub_shape, g, g_many, f"restrict({f.name},k={k})")


def sample_subgrid(shape: GridShape, k: int, rng) -> list[list[int]]:
    """Draw d sorted multisets of k independent uniform samples from [n]."""
    return [sorted(int(v) for v in rng.integers(1, shape.n + 1, size=k)) for _ in range(shape.d)]


# ---------------------------------------------------------------------------
# Truth-table persistence (magic "HGF1", little-endian n and d, LSB-first bits)
# ---------------------------------------------------------------------------


def save_truth_table(f: FunctionOracle, path) -> None:
    table = f if isinstance(f, ExplicitFunction) else tabulate(f)
    packed = np.packbits(table.bits, bitorder="little")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", f.shape.n, f.shape.d))
        fh.write(packed.tobytes())


def load_truth_table(path) -> ExplicitFunction:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise FormatError(f"bad magic bytes {blob[:4]!r}, expected {_MAGIC!r}")
    if len(blob) < 12:
        raise FormatError("truncated header")
    n, d = struct.unpack("<II", blob[4:12])
    try:
        shape = GridShape(n, d)
    except DomainError as e:
        raise FormatError(str(e)) from e
    num_bytes = (shape.num_points + 7) // 8
    payload = blob[12:]
    if len(payload) != num_bytes:
        raise FormatError(
            f"expected {num_bytes} payload bytes for n={n}, d={d}, got {len(payload)}"
        )
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), bitorder="little")
    return ExplicitFunction(shape, bits[: shape.num_points], name="explicit")


def is_monotone(f: FunctionOracle) -> bool:
    """Exhaustive monotonicity check along covering axis edges (small domains)."""
    table = f if isinstance(f, ExplicitFunction) else tabulate(f)
    bits = table.bits
    shape = f.shape
    pts = shape.all_points_array()
    for i in range(shape.d):
        movable = pts[:, i] < shape.n
        nxt = pts[movable].copy()
        nxt[:, i] += 1
        lo = bits[shape.indices_of_points(pts[movable])]
        hi = bits[shape.indices_of_points(nxt)]
        if (lo > hi).any():
            return False
    return True
