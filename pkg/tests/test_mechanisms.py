from fractions import Fraction

import pytest

from treefacility.generators import GeneratorConfig, generate
from treefacility.mechanisms import (
    DGM,
    LRM,
    PB,
    AverageOnly,
    ConsecutiveMidpoints,
    Dictator,
    HalfAvgHalfRD,
    IndexOutOfRangeError,
    KthLocation,
    MechanismError,
    Mixture,
    NeedTwoAgentsError,
    NotALineError,
    NotBoomerangError,
    QOutOfRangeError,
    RandomDictator,
    RandomizedDGM,
    TreeMedian,
    parse_mechanism,
)
from treefacility.network import Point
from treefacility.objectives import expected_social_cost, optimal_location

from conftest import assert_dist_close, line_net, profile, star_net

Q23 = Fraction(2, 3)


def coords_dist(net, dist):
    return sorted((net.coordinate_of(p), prob) for p, prob in dist)


class TestDictator:
    def test_point_mass_at_own_report(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(2))
        assert Dictator(1).run(unit_line3, prof).the_point() == Point.at_node(0)
        assert Dictator(2).run(unit_line3, prof).the_point() == Point.at_node(2)

    def test_output_follows_report(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(2))
        p = unit_line3.point_on_edge(1, 0.5)
        assert Dictator(1).run(unit_line3, prof.replace(unit_line3, 0, p)).the_point() == p

    def test_index_out_of_range(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0))
        with pytest.raises(IndexOutOfRangeError):
            Dictator(4).run(unit_line3, prof)


class TestKthLocation:
    def test_order_statistic(self):
        net = line_net(1.0, 1.0, 1.0)
        prof = profile(net, Point.at_node(3), Point.at_node(1), Point.at_node(2))
        assert net.coordinate_of(KthLocation(2).run(net, prof).the_point()) == 2.0

    def test_leftmost_and_rightmost(self):
        net = line_net(2.0, 2.0)
        prof = profile(net, Point.at_node(0), Point.at_node(2))
        assert net.coordinate_of(KthLocation(1).run(net, prof).the_point()) == 0.0
        assert net.coordinate_of(KthLocation("n").run(net, prof).the_point()) == 4.0

    def test_rejects_tree(self):
        star = star_net(3)
        prof = profile(star, Point.at_node(1), Point.at_node(2))
        with pytest.raises(NotALineError):
            KthLocation(1).run(star, prof)


class TestTreeMedian:
    def test_stays_at_root_when_balanced(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(0), Point.at_node(2))
        assert TreeMedian().run(unit_line3, prof).the_point() == Point.at_node(0)

    def test_odd_median(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(1), Point.at_node(2))
        assert TreeMedian().run(unit_line3, prof).the_point() == Point.at_node(1)

    def test_star_balanced(self):
        star = star_net(3)
        prof = profile(star, *[Point.at_node(i) for i in (1, 2, 3)])
        assert TreeMedian().run(star, prof).the_point() == Point.at_node(0)

    def test_interior_agent_median(self):
        net = line_net(2.0)
        p = net.point_on_edge(0, 0.5)
        prof = profile(net, p, p, Point.at_node(1))
        assert TreeMedian().run(net, prof).the_point() == p


class TestDGM:
    def test_hand_walk_from_left(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(1), Point.at_node(2))
        assert DGM(1, Q23).run(unit_line3, prof).the_point() == Point.at_node(1)

    def test_hand_walk_from_middle(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(1), Point.at_node(2))
        assert DGM(2, Q23).run(unit_line3, prof).the_point() == Point.at_node(1)

    def test_q_one_sticks_to_root(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(1), Point.at_node(2))
        assert DGM(2, Fraction(1)).run(unit_line3, prof).the_point() == Point.at_node(1)
        all_right = profile(unit_line3, Point.at_node(2), Point.at_node(2), Point.at_node(2))
        assert DGM(1, Fraction(1)).run(unit_line3, all_right).the_point() == Point.at_node(2)

    def test_exact_threshold_count(self):
        # n=3, q=2/3: a branch with exactly 2 agents qualifies; exact rational
        # comparison must not be thrown off by floating q.
        net = line_net(1.0, 1.0)
        prof = profile(net, Point.at_node(0), Point.at_node(2), Point.at_node(2))
        assert DGM(1, Q23).run(net, prof).the_point() == Point.at_node(2)

    def test_rejects_half_or_less(self):
        with pytest.raises(QOutOfRangeError):
            DGM(1, Fraction(1, 2))
        with pytest.raises(QOutOfRangeError):
            DGM(1, Fraction(1, 3))


class TestPB:
    def test_single_member_degenerates(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(2))
        d = PB([Dictator(1)], [1.0]).run(unit_line3, prof)
        assert d.is_point_mass()
        assert d.the_point() == Point.at_node(0)

    def test_lrm_composition(self):
        net = line_net(2.0, 2.0)
        prof = profile(net, Point.at_node(0), Point.at_node(2))
        d = PB([KthLocation(1), KthLocation("n")], [0.5, 0.5]).run(net, prof)
        assert coords_dist(net, d) == [(0.0, 0.25), (2.0, 0.5), (4.0, 0.25)]

    def test_all_dictators_equals_half_avg_half_rd(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(2))
        d = PB([Dictator(1), Dictator(2)], [0.5, 0.5]).run(unit_line3, prof)
        assert coords_dist(unit_line3, d) == [(0.0, 0.25), (1.0, 0.5), (2.0, 0.25)]

    def test_rejects_non_boomerang_member(self):
        with pytest.raises(NotBoomerangError):
            PB([RandomDictator()], [1.0])
        with pytest.raises(NotBoomerangError):
            PB([AverageOnly()], [1.0])


class TestLineMechanisms:
    def test_lrm_support(self):
        net = line_net(2.0, 2.0)
        prof = profile(net, Point.at_node(0), Point.at_node(2))
        d = LRM().run(net, prof)
        assert coords_dist(net, d) == [(0.0, 0.25), (2.0, 0.5), (4.0, 0.25)]

    def test_lrm_collapses_on_consensus(self, unit_line3):
        p = unit_line3.point_on_edge(0, 0.5)
        d = LRM().run(unit_line3, profile(unit_line3, p, p, p))
        assert d.the_point() == p

    def test_rd_merges_duplicates(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(0), Point.at_node(2))
        d = RandomDictator().run(unit_line3, prof)
        assert coords_dist(unit_line3, d) == [(0.0, pytest.approx(2 / 3)), (2.0, pytest.approx(1 / 3))]

    def test_half_avg_half_rd(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(2))
        d = HalfAvgHalfRD().run(unit_line3, prof)
        assert coords_dist(unit_line3, d) == [(0.0, 0.25), (1.0, 0.5), (2.0, 0.25)]

    def test_half_avg_half_rd_unbalanced(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(0), Point.at_node(2))
        d = HalfAvgHalfRD().run(unit_line3, prof)
        cost = expected_social_cost(unit_line3, d, prof)
        _, opt = optimal_location(unit_line3, prof)
        assert cost == pytest.approx(4.0, abs=1e-12)
        assert cost == pytest.approx(1.5 * opt, abs=1e-9)

    def test_midpoints_two_agents(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(2))
        d = ConsecutiveMidpoints().run(unit_line3, prof)
        assert coords_dist(unit_line3, d) == [(0.0, 0.25), (1.0, 0.5), (2.0, 0.25)]

    def test_midpoints_three_agents(self):
        net = line_net(2.0, 2.0)  # coordinates 0, 2, 4
        prof = profile(net, Point.at_node(0), Point.at_node(1), Point.at_node(2))
        d = ConsecutiveMidpoints().run(net, prof)
        assert coords_dist(net, d) == [
            (0.0, pytest.approx(1 / 6)),
            (1.0, pytest.approx(1 / 3)),
            (3.0, pytest.approx(1 / 3)),
            (4.0, pytest.approx(1 / 6)),
        ]

    def test_midpoints_needs_two(self, unit_line3):
        with pytest.raises(NeedTwoAgentsError):
            ConsecutiveMidpoints().run(unit_line3, profile(unit_line3, Point.at_node(0)))


class TestRandomizedDGM:
    def test_line_consensus(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(1), Point.at_node(2))
        d = RandomizedDGM(Q23).run(unit_line3, prof)
        assert d.the_point() == Point.at_node(1)

    def test_star_consensus(self):
        star = star_net(3)
        prof = profile(star, *[Point.at_node(i) for i in (1, 2, 3)])
        d = RandomizedDGM(Q23).run(star, prof)
        assert d.the_point() == Point.at_node(0)

    def test_all_agents_at_one_point(self, unit_line3):
        p = unit_line3.point_on_edge(1, 0.25)
        d = RandomizedDGM(Q23).run(unit_line3, profile(unit_line3, p, p))
        assert d.the_point() == p

    def test_q_range(self):
        with pytest.raises(QOutOfRangeError):
            RandomizedDGM(Fraction(3, 4))
        with pytest.raises(QOutOfRangeError):
            RandomizedDGM(Fraction(1, 2))


class TestMixture:
    def test_single_component_identity(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(2))
        a = Mixture([(RandomDictator(), 1.0)]).run(unit_line3, prof)
        b = RandomDictator().run(unit_line3, prof)
        assert a == b

    def test_rd_as_dictator_mixture(self, rng):
        cfg = GeneratorConfig(topology="line", max_nodes=5, min_agents=2,
                              max_agents=5, seed=51)
        for net, prof in generate(cfg, 10):
            n = len(prof)
            mix = Mixture([(Dictator(i + 1), 1.0 / n) for i in range(n)])
            assert_dist_close(net, mix.run(net, prof), RandomDictator().run(net, prof))

    def test_support_merge(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(2))
        d = Mixture([(TreeMedian(), 0.5), (Dictator(1), 0.5)]).run(unit_line3, prof)
        # Both components return node 0 here; support merges to a point mass.
        assert d.the_point() == Point.at_node(0)


class TestEquivalences:
    """The named line mechanisms coincide with their compositions."""

    def test_lrm_is_pb_of_extremes(self, rng):
        cfg = GeneratorConfig(topology="line", max_nodes=5, min_agents=2,
                              max_agents=6, seed=61)
        pb = PB([KthLocation(1), KthLocation("n")], [0.5, 0.5])
        for net, prof in generate(cfg, 15):
            assert_dist_close(net, LRM().run(net, prof), pb.run(net, prof))

    def test_half_avg_half_rd_is_pb_of_dictators(self, rng):
        cfg = GeneratorConfig(topology="line", max_nodes=5, min_agents=2,
                              max_agents=6, seed=67)
        for net, prof in generate(cfg, 15):
            n = len(prof)
            pb = PB([Dictator(i + 1) for i in range(n)], [1.0 / n] * n)
            assert_dist_close(net, HalfAvgHalfRD().run(net, prof), pb.run(net, prof))


class TestDistributionInvariants:
    def test_valid_and_deterministic(self, rng):
        cfg = GeneratorConfig(max_nodes=8, min_agents=2, max_agents=5, seed=71)
        mechs = [TreeMedian(), RandomDictator(), RandomizedDGM(Q23),
                 Dictator(1), DGM(1, Q23)]
        for net, prof in generate(cfg, 10):
            for mech in mechs:
                d1 = mech.run(net, prof)
                d2 = mech.run(net, prof)
                assert d1 == d2
                total = sum(prob for _, prob in d1)
                assert total == pytest.approx(1.0, abs=1e-9)
                assert all(prob >= 0 for _, prob in d1)
                assert len(set(d1.points)) == len(d1.points)


class TestParse:
    @pytest.mark.parametrize("text", [
        "dictator:3", "kth:1", "kth:n", "median", "dgm:3:2/3", "rd", "lrm",
        "half-avg-rd", "rdgm:2/3", "midpoints", "avg-only",
        "pb:[kth:1,kth:n]:[1/2,1/2]", "mix:[(median,1/2),(rd,1/2)]",
    ])
    def test_round_trips(self, text):
        mech = parse_mechanism(text)
        assert mech.name

    def test_parse_matches_constructors(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(2))
        a = parse_mechanism("pb:[kth:1,kth:n]:[1/2,1/2]").run(unit_line3, prof)
        b = LRM().run(unit_line3, prof)
        assert_dist_close(unit_line3, a, b)

    @pytest.mark.parametrize("text", [
        "bogus", "dgm:1:1/2", "dictator:x", "pb:[rd]:[1]", "mix:[median]",
        "rdgm:3/4",
    ])
    def test_rejects_bad_specs(self, text):
        with pytest.raises((MechanismError, QOutOfRangeError)):
            parse_mechanism(text)
