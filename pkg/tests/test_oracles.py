"""Exact combinatorial oracles: violation graphs, distance, Talagrand,
influence, persistence, and the threshold classifiers."""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hgm import oracles, walks
from hgm.errors import BudgetError, DomainError
from hgm.grid import ExplicitFunction, FamilySpec, GridShape, make_family
from hgm.oracles import Box, Trivalent
from hgm.rng import substream

from conftest import random_bits


def explicit(n, d, bits):
    return ExplicitFunction(GridShape(n, d), np.asarray(bits, dtype=np.uint8))


def box_fn(n, d, bits):
    return (Box(n, d), np.asarray(bits, dtype=np.uint8))


# ---------------------------------------------------------------------------
# Violation graphs
# ---------------------------------------------------------------------------


def test_constant_functions_have_empty_graphs():
    for bits in ([0] * 9, [1] * 9):
        G = oracles.build_violation_graph(box_fn(3, 2, bits))
        assert G.m == 0
        assert oracles.degree_profile(
            oracles.build_violation_graph(box_fn(3, 2, bits), "augmented_axis")
        ).m == 0


def test_axis_edges_on_a_three_point_line():
    G = oracles.build_violation_graph(box_fn(3, 1, [1, 0, 0]), "augmented_axis")
    assert sorted(map(tuple, G.edges)) == [(0, 1, 1), (0, 2, 1)]
    assert G.check_edges()


def test_comparable_edges_anti_dictator_2x2():
    f = make_family(FamilySpec("anti_dictator"), GridShape(2, 2))
    G = oracles.build_violation_graph(f)
    # In (x1, x2) notation: (11,21), (11,22), (12,22).
    box = G.box
    expected = {
        (box.index_of((1, 1)), box.index_of((2, 1))),
        (box.index_of((1, 1)), box.index_of((2, 2))),
        (box.index_of((1, 2)), box.index_of((2, 2))),
    }
    assert {(int(x), int(y)) for x, y, _ in G.edges} == expected
    assert G.check_edges()


@given(st.integers(0, 2**9 - 1))
def test_graph_edges_reverify(mask):
    bits = [(mask >> i) & 1 for i in range(9)]
    for mode in ("augmented_axis", "full_comparable"):
        G = oracles.build_violation_graph(box_fn(3, 2, bits), mode)
        assert G.check_edges()


def test_graph_budget_enforced():
    shape = GridShape(4, 2)
    f = ExplicitFunction(shape, random_bits(16, 0))
    with pytest.raises(BudgetError):
        oracles.build_violation_graph(f, "full_comparable", budget=3)


# ---------------------------------------------------------------------------
# Distance
# ---------------------------------------------------------------------------


def test_distance_examples():
    assert oracles.distance_to_monotonicity(box_fn(3, 1, [1, 0, 0])).distance == Fraction(1, 3)
    assert oracles.distance_bruteforce(box_fn(3, 1, [1, 0, 0])) == Fraction(1, 3)
    for d in (2, 3):
        f = make_family(FamilySpec("anti_dictator"), GridShape(2, d))
        assert oracles.distance_to_monotonicity(f).distance == Fraction(1, 2)
    mono = make_family(FamilySpec("majority_threshold"), GridShape(4, 2))
    assert oracles.distance_to_monotonicity(mono).distance == 0


def test_distance_methods_agree_and_repairs_are_valid():
    shape = GridShape(4, 2)
    for seed in range(12):
        bits = random_bits(16, seed)
        f = ExplicitFunction(shape, bits)
        small = oracles.distance_to_monotonicity(f, force_method="hopcroft_karp")
        flow = oracles.distance_to_monotonicity(f, force_method="dag_flow")
        assert small.distance == flow.distance
        for res in (small, flow):
            repaired = bits.copy()
            repaired[res.repair_indices] ^= 1
            assert oracles.bits_monotone(Box(4, 2), repaired)
            assert len(res.repair_indices) == res.matching_size


@given(st.integers(0, 2**9 - 1))
@settings(max_examples=40)
def test_distance_matches_upset_enumeration(mask):
    bits = [(mask >> i) & 1 for i in range(9)]
    f = box_fn(3, 2, bits)
    assert oracles.distance_to_monotonicity(f).distance == oracles.distance_bruteforce(f)


def test_bruteforce_domain_cap():
    with pytest.raises(BudgetError):
        oracles.distance_bruteforce(box_fn(4, 2, [0] * 16))


def test_monotone_iff_zero_distance_iff_no_negative_influence():
    shape = GridShape(2, 3)
    for mask in range(0, 256, 7):
        bits = np.array([(mask >> i) & 1 for i in range(8)], np.uint8)
        f = ExplicitFunction(shape, bits)
        dist = oracles.distance_to_monotonicity(f).distance
        G = oracles.build_violation_graph(f)
        neg = oracles.influence_tilde(f).negative
        mono = oracles.bits_monotone(Box(2, 3), bits)
        assert (dist == 0) == mono == (G.m == 0) == (neg < 1e-15)


# ---------------------------------------------------------------------------
# Degree profiles, Talagrand
# ---------------------------------------------------------------------------


def star_function():
    # 1 only at the bottom point of [2]^3: three violating axis edges in
    # three distinct dimensions all meet at the bottom.
    bits = np.zeros(8, np.uint8)
    bits[0] = 1
    return explicit(2, 3, bits)


def test_degree_profile_star():
    G = oracles.build_violation_graph(star_function(), "augmented_axis")
    prof = oracles.degree_profile(G)
    assert prof.m == 3
    assert prof.D_X == 3 and prof.Phi_X == 3 and prof.Gamma_X == 1
    assert prof.D_Y == 1 and prof.Phi_Y == 1
    assert prof.frac_left == 1 / 8 and prof.frac_right == 3 / 8


def test_degree_profile_single_edge():
    G = oracles.build_violation_graph(box_fn(2, 1, [1, 0]), "augmented_axis")
    prof = oracles.degree_profile(G)
    assert prof.m == 1
    assert prof.D_X == prof.Gamma_X == prof.Phi_X == 1
    assert prof.D_Y == prof.Gamma_Y == prof.Phi_Y == 1


def test_degree_profile_requires_axis_mode():
    f = make_family(FamilySpec("anti_dictator"), GridShape(2, 2))
    with pytest.raises(DomainError):
        oracles.degree_profile(oracles.build_violation_graph(f, "full_comparable"))


def test_degree_identities_on_random_functions():
    shape = GridShape(2, 4)
    for seed in range(10):
        f = ExplicitFunction(shape, random_bits(16, seed + 100))
        G = oracles.build_violation_graph(f, "augmented_axis")
        prof = oracles.degree_profile(G)
        for z, deg in prof.D.items():
            assert deg == sum(c for (v, _), c in prof.Gamma.items() if v == z)
            assert prof.Phi[z] == sum(
                1 for (v, _), c in prof.Gamma.items() if v == z and c > 0
            )
            assert prof.Phi[z] <= shape.d
        assert prof.D_X <= prof.Gamma_X * prof.Phi_X
        assert prof.D_Y <= prof.Gamma_Y * prof.Phi_Y


def test_thresholded_influence_and_colorings():
    mono = make_family(FamilySpec("dictator"), GridShape(2, 3))
    _, total = oracles.thresholded_influence(mono)
    assert total == 0
    phi, _ = oracles.thresholded_influence(box_fn(3, 1, [1, 0, 0]))
    assert phi[0] == 1
    # All-ones coloring zeroes the thresholded degree of every 0-point.
    f = ExplicitFunction(GridShape(2, 3), random_bits(8, 3))
    G = oracles.build_violation_graph(f, "augmented_axis")
    phi, _ = oracles.colored_thresholded_degree(G, np.ones(G.m, np.int8))
    for z in G.right:
        assert phi.get(int(z), 0) == 0


def test_talagrand_examples():
    empty = oracles.build_violation_graph(box_fn(2, 1, [0, 1]), "augmented_axis")
    assert oracles.talagrand_objective(empty).value == 0.0
    single = oracles.build_violation_graph(box_fn(2, 1, [1, 0]), "augmented_axis")
    res = oracles.talagrand_objective(single)
    assert res.exact and res.value == pytest.approx(1.0)
    star = oracles.build_violation_graph(star_function(), "augmented_axis")
    res = oracles.talagrand_objective(star)
    assert res.exact and res.value == pytest.approx(math.sqrt(3.0), abs=1e-12)


def test_talagrand_bounds_and_local_search_labeling():
    shape = GridShape(2, 4)
    f = ExplicitFunction(shape, random_bits(16, 9))
    G = oracles.build_violation_graph(f, "augmented_axis")
    assert 0 < G.m <= 22
    exact = oracles.talagrand_objective(G)
    assert exact.exact
    assert exact.value <= G.m + 1e-12  # objective never exceeds edge count
    approx = oracles.talagrand_objective(G, exact_cap=G.m - 1)
    assert not approx.exact and approx.method == "local_search"
    assert approx.value >= exact.value - 1e-12


def test_talagrand_subadditive_under_edge_partition():
    G = oracles.build_violation_graph(star_function(), "augmented_axis")
    total = oracles.talagrand_objective(G).value
    part = np.array([True, False, True])
    a = oracles.talagrand_objective(G.subgraph(part)).value
    b = oracles.talagrand_objective(G.subgraph(~part)).value
    assert a + b >= total - 1e-12


# ---------------------------------------------------------------------------
# Influence
# ---------------------------------------------------------------------------


def test_influence_single_line():
    res = oracles.influence_tilde(explicit(2, 1, [1, 0]))
    assert res.total == pytest.approx(0.5, abs=1e-15)
    assert res.negative == pytest.approx(0.5, abs=1e-15)
    const = oracles.influence_tilde(explicit(2, 1, [0, 0]))
    assert const.total == 0.0 and const.negative == 0.0


def test_influence_routes_agree():
    for n, d, seeds in ((4, 2, range(8)), (2, 3, range(8))):
        shape = GridShape(n, d)
        for seed in seeds:
            f = ExplicitFunction(shape, random_bits(shape.num_points, seed + 40))
            a = oracles.influence_tilde(f)
            b = oracles.influence_via_hypercubes(f)
            assert a.total == pytest.approx(b.total, abs=1e-12)
            assert a.negative == pytest.approx(b.negative, abs=1e-12)


def test_influence_mc_brackets_exact():
    shape = GridShape(4, 2)
    f = ExplicitFunction(shape, random_bits(16, 77))
    exact = oracles.influence_tilde(f)
    mc = oracles.influence_mc(f, 60_000, substream(4, "inf"))
    assert mc.ci_total[0] <= exact.total <= mc.ci_total[1]
    assert mc.ci_negative[0] <= exact.negative <= mc.ci_negative[1]


def test_hypercube_influence_budget():
    with pytest.raises(BudgetError):
        oracles.influence_via_hypercubes(
            make_family(FamilySpec("random_balanced"), GridShape(8, 3)), budget=10
        )


# ---------------------------------------------------------------------------
# Persistence and edge classifiers
# ---------------------------------------------------------------------------


def test_persistence_trivial_cases(rng):
    const = make_family(FamilySpec("constant1"), GridShape(4, 2))
    assert oracles.persistence_classify(const, 2, 0.0, (2, 2), "up") is Trivalent.YES
    f = ExplicitFunction(GridShape(4, 2), random_bits(16, 1))
    # The top point absorbs upward walks, so it is up-persistent at beta = 0.
    assert oracles.persistence_classify(f, 3, 0.0, (4, 4), "up") is Trivalent.YES
    verdict = oracles.persistence_classify(
        f, 1, 0.5, (1, 1), "up", mode="mc", samples=3000, rng=rng
    )
    assert verdict in (Trivalent.YES, Trivalent.NO, Trivalent.UNDECIDED)


def test_mzb_constants():
    shape = GridShape(2, 2)
    c0 = make_family(FamilySpec("constant0"), shape)
    c1 = make_family(FamilySpec("constant1"), shape)
    for z in shape.points():
        assert oracles.mzb_classify(c0, 1, z) is Trivalent.YES
        assert oracles.mzb_classify(c1, 1, z) is Trivalent.NO


def test_mzb_red_blue_on_the_two_point_line():
    f = explicit(2, 1, [1, 0])
    # Walk length 0: the down-walk stays put, so a point is mostly-zero-below
    # exactly when its own value is 0.
    assert oracles.mzb_classify(f, 0, (2,)) is Trivalent.YES
    assert oracles.mzb_classify(f, 0, (1,)) is Trivalent.NO
    edge = ((1,), (2,))
    assert oracles.red_classify(f, 0, edge) is Trivalent.YES
    assert oracles.blue_classify(f, 0, edge) is Trivalent.YES


def test_red_blue_mc_agrees_or_abstains(rng):
    f = explicit(2, 1, [1, 0])
    edge = ((1,), (2,))
    red = oracles.red_classify(f, 0, edge, mode="mc", samples=600, rng=rng)
    blue = oracles.blue_classify(f, 0, edge, mode="mc", samples=600, rng=rng)
    assert red in (Trivalent.YES, Trivalent.UNDECIDED)
    assert blue in (Trivalent.YES, Trivalent.UNDECIDED)


def test_interval_points_validation():
    shape = GridShape(4, 2)
    f = make_family(FamilySpec("constant0"), shape)
    with pytest.raises(DomainError):
        oracles.red_classify(f, 1, ((1, 1), (2, 2)))  # not axis-aligned
    with pytest.raises(DomainError):
        oracles.red_classify(f, 1, ((3, 1), (1, 1)))  # downward


def test_typical_points_bound_n4_d8():
    # Exhaustive scan: the fraction of points whose conditioned-cube weight
    # lands in the c = 7 band with probability >= 1 - (eps/d)^5 should beat
    # the 1 - (eps/d)^(c-5) tail bound.
    shape = GridShape(4, 8)
    c, eps = 7.0, 0.5
    lam = {u: walks.lazy_up_prob(4, u) for u in range(1, 5)}
    band = [
        w for w in range(shape.d + 1) if walks.weight_in_band(w, shape.d, c, eps)
    ]
    threshold = 1.0 - (eps / shape.d) ** 5
    cache = {}
    typical = 0
    pts = shape.all_points_array()
    counts = np.stack([(pts == u).sum(axis=1) for u in range(1, 5)], axis=1)
    for row in counts:
        key = tuple(int(v) for v in row)
        if key not in cache:
            dist = np.array([1.0])
            for u, cnt in zip(range(1, 5), key):
                for _ in range(cnt):
                    dist = np.convolve(dist, [1.0 - lam[u], lam[u]])
            cache[key] = math.fsum(float(dist[w]) for w in band) >= threshold
        typical += cache[key]
    frac = typical / shape.num_points
    assert frac >= 1.0 - (eps / shape.d) ** (c - 5)


def test_is_typical_exact_matches_direct_computation():
    shape = GridShape(4, 8)
    for x in [(2,) * 8, (1,) * 8, (1, 4, 2, 3, 1, 4, 2, 3)]:
        p = walks.typical_probability_exact(shape, x, 7.0, 0.5)
        assert oracles.is_typical_exact(shape, x, 7.0, 0.5) == (
            p >= 1.0 - (0.5 / 8) ** 5
        )
