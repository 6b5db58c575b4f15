"""Walk kernels, samplers, exact pmfs, middle layers, cube closed forms."""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hgm import walks
from hgm.errors import BudgetError, DomainError
from hgm.grid import GridShape
from hgm.rng import substream
from hgm import validate


# ---------------------------------------------------------------------------
# Per-coordinate kernel
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_kernel_arithmetic_matches_enumeration(n):
    K = walks.line_kernel(n)
    E = walks.line_kernel_enumerated(n)
    assert np.abs(K - E).max() < 1e-12


@pytest.mark.parametrize("n", [2, 4, 8, 16, 32])
def test_kernel_rows_are_distributions(n):
    K = walks.line_kernel(n)
    for u in range(1, n + 1):
        assert K[u, u] == 0.0
        assert abs(K[u, 1:].sum() - 1.0) < 1e-12
        assert (K[u, 1:] >= 0).all()


def test_full_size_window_wraps_both_ways():
    # A window of size n covers any two values through either wrap direction,
    # so the covering count at gap g is (n - g) + g = n, not n - g.
    for n in (2, 4, 8):
        for gap in range(1, n):
            assert walks._count_windows_covering(n, n, gap) == n
    assert walks._count_windows_covering(8, 2, 1) == 1 + 0
    assert walks._count_windows_covering(8, 4, 6) == 0 + 2


def test_n2_selected_coordinate_always_moves():
    # With n=2 the only window is {1,2}; the non-self draw is the other value.
    assert walks.line_kernel(2)[1, 2] == 1.0
    assert walks.line_kernel(2)[2, 1] == 1.0
    assert walks.lazy_up_prob(2, 1) == 0.0
    assert walks.lazy_up_prob(2, 2) == 1.0


def test_lazy_probs_complement_move_mass():
    for n in (4, 8, 16):
        K = walks.line_kernel(n)
        for u in range(1, n + 1):
            up_mass = K[u, u + 1 :].sum()
            assert abs(walks.lazy_up_prob(n, u) + up_mass - 1.0) < 1e-12
            down_mass = K[u, 1:u].sum()
            assert abs(walks.lazy_down_prob(n, u) + down_mass - 1.0) < 1e-12


def test_pair_distribution_marginal_is_uniform():
    # A uniform vertex of an unconditionally drawn sub-hypercube is uniform
    # on [n]: sum over pairs containing u of (mass / 2) equals 1/n.
    for n in (2, 4, 8):
        dist = walks.pair_distribution(n)
        assert abs(sum(dist.values()) - 1.0) < 1e-12
        for u in range(1, n + 1):
            marg = sum(w for (a, b), w in dist.items() if u in (a, b)) / 2.0
            assert abs(marg - 1.0 / n) < 1e-12


def test_pair_distribution_at_is_kernel_reshaped():
    for n in (4, 8):
        K = walks.line_kernel(n)
        for u in (1, n // 2, n):
            dist = walks.pair_distribution_at(n, u)
            assert abs(sum(dist.values()) - 1.0) < 1e-12
            for (a, b), w in dist.items():
                other = b if a == u else a
                assert abs(w - K[u, other]) < 1e-12


# ---------------------------------------------------------------------------
# Samplers: support, laziness, absorption
# ---------------------------------------------------------------------------


@given(
    st.sampled_from([2, 4, 8]),
    st.integers(1, 4),
    st.integers(0, 6),
    st.integers(0, 10**6),
)
def test_walk_support_and_laziness(n, d, tau, seed):
    shape = GridShape(n, d)
    rng = substream(seed, "prop")
    x = tuple(int(v) for v in rng.integers(1, n + 1, d))
    y = walks.sample_upwalk(shape, x, tau, rng)
    assert all(a <= b for a, b in zip(x, y))
    assert sum(a != b for a, b in zip(x, y)) <= min(tau, d)
    z = walks.sample_downwalk(shape, x, tau, rng)
    assert all(b <= a for a, b in zip(x, z))
    assert sum(a != b for a, b in zip(x, z)) <= min(tau, d)


def test_extreme_points_absorb_and_tau_zero_is_identity(rng):
    shape = GridShape(4, 3)
    top, bottom = (4, 4, 4), (1, 1, 1)
    for _ in range(50):
        assert walks.sample_upwalk(shape, top, 2, rng) == top
        assert walks.sample_downwalk(shape, bottom, 2, rng) == bottom
    x = (2, 3, 1)
    assert walks.sample_upwalk(shape, x, 0, rng) == x
    assert walks.sample_downwalk(shape, x, 0, rng) == x
    assert walks.sample_upshift(shape, x, 0, rng) == (0, 0, 0)


def test_shift_vectors_restore_walk_endpoints(rng):
    shape = GridShape(8, 3)
    x = (3, 6, 1)
    for _ in range(200):
        s = walks.sample_upshift(shape, x, 2, rng)
        assert all(v >= 0 for v in s)
        assert sum(v > 0 for v in s) <= 2
        assert walks.apply_shift(shape, x, s, +1) is not None
        s = walks.sample_downshift(shape, x, 2, rng)
        assert walks.apply_shift(shape, x, s, -1) is not None
    # A shift applied to a foreign anchor may leave the domain.
    assert walks.apply_shift(shape, (1, 1, 1), (1, 0, 0), -1) is None


# ---------------------------------------------------------------------------
# Exact pmfs
# ---------------------------------------------------------------------------


def test_single_step_pmf_on_2x2_grid():
    shape = GridShape(2, 2)
    pmf = walks.exact_pmf(shape, (1, 1), walks.WalkSpec("up", 1, shape))
    assert pmf.prob((2, 1)) == pytest.approx(0.5, abs=1e-15)
    assert pmf.prob((1, 2)) == pytest.approx(0.5, abs=1e-15)
    assert pmf.prob((1, 1)) == pytest.approx(0.0, abs=1e-15)
    down = walks.exact_pmf(shape, (2, 2), walks.WalkSpec("down", 1, shape))
    assert down.prob((1, 2)) == pytest.approx(0.5, abs=1e-15)


def test_pmf_normalization_and_directional_support():
    for n, d, tau, direction in [(4, 2, 1, "up"), (4, 2, 3, "down"), (8, 1, 2, "up"), (2, 4, 5, "up")]:
        shape = GridShape(n, d)
        for x in [(1,) * d, (n,) * d, tuple(1 + (i % n) for i in range(d))]:
            pmf = walks.exact_pmf(shape, x, walks.WalkSpec(direction, tau, shape))
            assert abs(pmf.total_mass() - 1.0) < 1e-12
            for y in pmf.table:
                if direction == "up":
                    assert all(a <= b for a, b in zip(x, y))
                else:
                    assert all(b <= a for a, b in zip(x, y))


@pytest.mark.parametrize(
    "n,d",
    [(2, 1), (2, 2), (2, 3), (2, 4), (4, 1), (4, 2), (8, 1), (8, 2), (16, 1)],
)
def test_three_formulations_agree_pointwise(n, d):
    shape = GridShape(n, d)
    for tau in (1, 2, 3):
        for direction in ("up", "down"):
            res = validate.equivalence_exact(shape, tau, direction)
            assert res.passed, (n, d, tau, direction, res.max_diffs)


def test_shift_pmf_is_translated_walk_pmf():
    shape = GridShape(4, 2)
    for x in [(1, 1), (2, 3), (4, 2)]:
        pmf = walks.exact_pmf(shape, x, walks.WalkSpec("up", 2, shape))
        spmf = walks.exact_shift_pmf(shape, x, 2, "up")
        assert abs(sum(spmf.values()) - 1.0) < 1e-12
        for s, p in spmf.items():
            y = tuple(a + b for a, b in zip(x, s))
            assert abs(p - pmf.prob(y)) < 1e-12


def test_sampled_walks_match_exact_pmf():
    shape = GridShape(4, 2)
    x = (2, 1)
    pmf = walks.exact_pmf(shape, x, walks.WalkSpec("up", 2, shape))
    # Vectorized sampler at 200k draws.
    rng = substream(77, "batch-tv")
    N = 200_000
    X = np.tile(np.array(x), (N, 1))
    Y = walks.sample_walk_batch(shape, X, np.full(N, 2), "up", rng)
    keys, counts = np.unique(shape.indices_of_points(Y), return_counts=True)
    emp = {shape.point_of(int(k)): int(c) for k, c in zip(keys, counts)}
    assert pmf.tv_distance_to_counts(emp, N) < 0.01
    # Scalar sampler at 20k draws.
    rng = substream(78, "scalar-tv")
    counts2 = {}
    for _ in range(20_000):
        y = walks.sample_upwalk(shape, x, 2, rng)
        counts2[y] = counts2.get(y, 0) + 1
    assert pmf.tv_distance_to_counts(counts2, 20_000) < 0.03


def test_pmf_budget_is_enforced():
    shape = GridShape(16, 4)
    with pytest.raises(BudgetError):
        walks.exact_pmf(shape, (8, 8, 8, 8), walks.WalkSpec("up", 4, shape), budget=100)


def test_pmf_csv_export(tmp_path):
    shape = GridShape(2, 2)
    pmf = walks.exact_pmf(shape, (1, 1), walks.WalkSpec("up", 1, shape))
    path = tmp_path / "pmf.csv"
    pmf.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "point_index,probability"
    parsed = dict(line.split(",") for line in lines[1:])
    assert float(parsed["1"]) == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# Hypercubes
# ---------------------------------------------------------------------------


def test_hypercube_draws_are_valid(rng):
    shape = GridShape(8, 3)
    for _ in range(200):
        H = walks.sample_hypercube(shape, rng)
        assert all(1 <= a < b <= 8 for a, b in H.pairs)
        x = (3, 8, 1)
        Hx = walks.sample_hypercube_at(shape, x, rng)
        assert Hx.contains_vertex(x)


def test_n2_hypercube_is_always_full_cube(rng):
    shape = GridShape(2, 2)
    for _ in range(20):
        assert walks.sample_hypercube(shape, rng).pairs == ((1, 2), (1, 2))
        assert walks.sample_hypercube_at(shape, (1, 2), rng).pairs == ((1, 2), (1, 2))


def test_hypercube_walk_moves_between_endpoints(rng):
    H = walks.Hypercube(((2, 5), (1, 8), (3, 4)))
    top, bottom = H.top(), H.bottom()
    for _ in range(50):
        assert walks.sample_hypercube_walk(H, top, 2, "up", rng) == top
        y = walks.sample_hypercube_walk(H, bottom, 1, "up", rng)
        assert H.contains_vertex(y)
        assert H.weight(y) <= 1
    with pytest.raises(DomainError):
        walks.sample_hypercube_walk(H, (2, 2, 3), 1, "up", rng)


def test_weight_definition():
    H = walks.Hypercube(((1, 2), (3, 7)))
    assert H.weight((1, 3)) == 0
    assert H.weight((2, 3)) == 1
    assert H.weight((2, 7)) == 2


# ---------------------------------------------------------------------------
# Middle layers and typicality
# ---------------------------------------------------------------------------


def test_middle_layer_membership_cases():
    H2 = walks.Hypercube(((1, 2), (1, 2)))
    assert walks.middle_layer_member(H2, (2, 1), 1.0, 0.5)  # weight 1 = d/2
    big = walks.Hypercube(((1, 2),) * 256)
    assert not walks.middle_layer_member(big, big.bottom(), 1.0, 0.5)
    assert walks.middle_layer_member(big, (2,) * 128 + (1,) * 128, 1.0, 0.5)


def test_middle_layer_fraction_bound_d20():
    # Binomial tail bound: the c=1 band misses at most an (eps/d)^c fraction.
    frac = walks.middle_layer_fraction_exact(20, 1.0, 0.1)
    assert frac >= 1 - Fraction(1, 200)
    assert walks.middle_layer_fraction_exact(8, 100.0, 0.5) == 1


def test_weight_distribution_and_typicality_exact():
    shape = GridShape(4, 3)
    for x in [(1, 1, 1), (2, 3, 4), (4, 4, 4)]:
        dist = walks.weight_distribution_at(shape, x)
        assert len(dist) == 4
        assert abs(dist.sum() - 1.0) < 1e-12
        assert abs(walks.typical_probability_exact(shape, x, 100.0, 0.5) - 1.0) < 1e-12


def test_typicality_mc_brackets_exact(rng):
    from hgm.oracles import typicality_estimate

    shape = GridShape(4, 3)
    x = (2, 3, 1)
    c, eps = 0.02, 0.5
    exact = walks.typical_probability_exact(shape, x, c, eps)
    est, (lo, hi) = typicality_estimate(shape, x, c, eps, 4000, rng)
    assert lo - 1e-9 <= exact <= hi + 1e-9


# ---------------------------------------------------------------------------
# Cube walk closed forms and reversibility
# ---------------------------------------------------------------------------


def test_cube_closed_form_examples():
    assert walks.cube_walk_closed_form(4, 2, 0, 0, "up") == 1
    assert walks.cube_walk_closed_form(4, 2, 1, 1, "up") == Fraction(1, 4)
    with pytest.raises(DomainError):
        walks.cube_walk_closed_form(4, 2, 3, 2, "up")
    with pytest.raises(DomainError):
        walks.cube_walk_closed_form(4, 4, 1, 1, "up")  # nothing above the top


@pytest.mark.parametrize("d", [4, 6])
def test_cube_closed_form_matches_subset_enumeration(d):
    for direction in ("up", "down"):
        for w in range(d + 1):
            free = d - w if direction == "up" else w
            for ell in range(0, min(d, 4) + 1):
                for t in range(0, min(ell, free) + 1):
                    assert walks.cube_walk_closed_form(
                        d, w, t, ell, direction
                    ) == walks.cube_walk_prob_enumerated(d, w, t, ell, direction)


def test_cube_walk_mc_matches_closed_form(rng):
    d, w, t, ell = 6, 3, 1, 2
    H = walks.Hypercube(((1, 2),) * d)
    x = (2,) * w + (1,) * (d - w)
    target = (2,) * (w + t) + (1,) * (d - w - t)
    p = float(walks.cube_walk_closed_form(d, w, t, ell, "up"))
    N = 200_000
    hits = sum(
        walks.sample_hypercube_walk(H, x, ell, "up", rng) == target for _ in range(N)
    )
    sigma = math.sqrt(p * (1 - p) / N)
    assert abs(hits / N - p) < 3 * sigma + 1e-9


def test_restricted_pdf_basics():
    shape = GridShape(2, 4)
    x, far = (1, 1, 1, 1), (2, 2, 2, 1)
    assert walks.restricted_walk_pdf(shape, x, far, 2, 0.5) == 0.0  # t > ell
    p_self = walks.restricted_walk_pdf(shape, (2, 1, 2, 1), (2, 1, 2, 1), 0, 0.5)
    assert 0.0 <= p_self <= 1.0
    with pytest.raises(DomainError):
        walks.restricted_walk_pdf(shape, (1, 2, 1, 1), (2, 1, 1, 1), 2, 0.5)


def test_restricted_pdf_ratio_matches_product_formula():
    d = 16
    shape = GridShape(2, d)
    for w, t, ell in [(8, 2, 3), (7, 1, 2), (8, 1, 4), (6, 3, 3)]:
        x = (2,) * w + (1,) * (d - w)
        xp = x[:w] + (2,) * t + (1,) * (d - w - t)
        fwd = walks.restricted_walk_pdf(shape, x, xp, ell, 0.5)
        bwd = walks.restricted_walk_pdf(shape, xp, x, ell, 0.5)
        assert bwd > 0
        prod = walks.reversibility_ratio_product(d, w, t, ell)
        assert fwd / bwd == pytest.approx(prod, abs=1e-12)


def test_reversibility_scan_rows_are_consistent():
    rows = validate.reversibility_scan(16, 2, 0.5)
    assert rows
    for r in rows:
        if r.t == 0:
            assert r.ratio == 1.0 and r.product_formula == 1.0
        else:
            assert r.ratio == pytest.approx(r.product_formula, abs=1e-12)


def test_band_halfwidth_formula():
    assert walks.middle_band_halfwidth(16, 1.0, 0.5) == pytest.approx(
        math.sqrt(4 * 16 * math.log(32)), abs=1e-12
    )
    with pytest.raises(DomainError):
        walks.middle_band_halfwidth(16, 1.0, 0.0)


# ---------------------------------------------------------------------------
# Statistical-equivalence harness sensitivity
# ---------------------------------------------------------------------------


def test_statistical_equivalence_detects_a_corrupted_sampler():
    shape = GridShape(4, 2)

    def corrupt(shape_, tau, formulation, count, rng):
        X, Y = validate._sample_pairs(shape_, tau, formulation, count, rng)
        if formulation == "cube_first":
            # Bias: re-anchor a tenth of the pairs at the origin.
            k = count // 10
            X[:k] = 1
        return X, Y

    res = validate.equivalence_statistical(shape, 1, 40_000, 5, sampler=corrupt)
    assert not res.passed
    assert res.per_formulation["cube_first"][1] <= 0.001
    clean = validate.equivalence_statistical(shape, 1, 40_000, 5)
    assert clean.passed
