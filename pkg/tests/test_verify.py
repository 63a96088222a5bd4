import random
from fractions import Fraction

import pytest

from treefacility.generators import GeneratorConfig, generate, line_with_coordinates
from treefacility.mechanisms import (
    DGM,
    LRM,
    AverageOnly,
    Dictator,
    HalfAvgHalfRD,
    KthLocation,
    RandomDictator,
    RandomizedDGM,
    TreeMedian,
)
from treefacility.network import LocationProfile, Point
from treefacility.objectives import Objective
from treefacility.verify import (
    BadOrderingError,
    BadParamsError,
    CSV_HEADER,
    NotDeterministicError,
    approx_ratio,
    boomerang_check,
    csv_row,
    deviation_points,
    grid_optimum,
    immigrants_check,
    lemma_identity_check,
    lower_bound_witness,
    points_on_single_path,
    ratio_search,
    sp_check,
)

from conftest import line_net, profile, star_net

Q23 = Fraction(2, 3)


class TestDeviationPoints:
    def test_contains_nodes_agents_and_grid(self, unit_line3):
        p = unit_line3.point_on_edge(0, 0.37)
        prof = profile(unit_line3, p, Point.at_node(2))
        pts = deviation_points(unit_line3, prof)
        assert Point.at_node(0) in pts
        assert p in pts
        # 3 nodes + 1 interior agent + 15 grid points per edge
        assert len(pts) == 3 + 1 + 15 * 2

    def test_no_duplicates(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), unit_line3.point_on_edge(0, 0.5))
        pts = deviation_points(unit_line3, prof)
        assert len(pts) == len(set(pts))


class TestSPCheck:
    def test_median_holds(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(0), Point.at_node(2))
        rep = sp_check(TreeMedian(), unit_line3, prof)
        assert rep.holds
        assert rep.max_regret <= 1e-12

    def test_randomized_holds(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(2))
        for mech in (RandomDictator(), HalfAvgHalfRD(), RandomizedDGM(Q23)):
            assert sp_check(mech, unit_line3, prof).holds

    def test_negative_control_is_manipulable(self):
        # The agents sit strictly inside the line so a deviator can drag the
        # average outward.
        net, resolve = line_with_coordinates([-2.0, 2.0], extra_nodes=[0.0])
        prof = LocationProfile(net, [resolve(0.0), resolve(2.0)])
        rep = sp_check(AverageOnly(), net, prof)
        assert not rep.holds
        assert rep.max_regret >= 0.5

    def test_reports_worst_case(self):
        net, resolve = line_with_coordinates([-2.0, 2.0], extra_nodes=[0.0])
        prof = LocationProfile(net, [resolve(0.0), resolve(2.0)])
        rep = sp_check(AverageOnly(), net, prof)
        agent, misreport, true_cost, dev_cost = rep.worst_case
        assert true_cost - dev_cost == pytest.approx(rep.max_regret)


class TestBoomerangCheck:
    @pytest.mark.parametrize("mech", [
        Dictator(1), KthLocation(1), TreeMedian(), DGM(1, Q23),
    ])
    def test_deterministic_mechanisms_hold(self, mech):
        net = line_net(1.0, 1.0, 1.0)
        prof = profile(net, Point.at_node(0), Point.at_node(1), Point.at_node(3))
        rep = boomerang_check(mech, net, prof)
        assert rep.holds

    def test_negative_control_violates(self):
        net = line_net(2.0, 2.0)
        prof = profile(net, Point.at_node(0), Point.at_node(1))
        rep = boomerang_check(AverageOnly(), net, prof)
        assert not rep.holds
        assert rep.max_violation >= 0.1

    def test_rejects_randomized(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(2))
        with pytest.raises(NotDeterministicError):
            boomerang_check(RandomDictator(), unit_line3, prof)


class TestApproxRatio:
    def test_rd_on_pair(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(2))
        rep = approx_ratio(RandomDictator(), unit_line3, prof)
        assert rep.ratio == pytest.approx(2.0, abs=1e-12)

    def test_half_avg_half_rd_is_exactly_15(self, rng):
        cfg = GeneratorConfig(topology="line", max_nodes=6, min_agents=2,
                              max_agents=6, seed=83)
        for net, prof in generate(cfg, 20):
            rep = approx_ratio(HalfAvgHalfRD(), net, prof)
            if rep.ratio is None:
                assert rep.exact_zero
                continue
            assert rep.ratio == pytest.approx(1.5, abs=1e-9)

    def test_zero_optimum_flagged(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(1), Point.at_node(1))
        rep = approx_ratio(TreeMedian(), unit_line3, prof)
        assert rep.ratio is None
        assert rep.exact_zero

    def test_minimax_objective(self):
        net, resolve = line_with_coordinates([0.0, 4.0], extra_nodes=[1.0, 2.0, 3.0])
        prof = LocationProfile(net, [resolve(0.0), resolve(4.0)])
        rep = approx_ratio(LRM(), net, prof, Objective.MINIMAX)
        assert rep.ratio == pytest.approx(1.5, abs=1e-12)


class TestRatioSearch:
    def test_deterministic_given_seed(self):
        cfg = GeneratorConfig(max_nodes=8, min_agents=2, max_agents=4)
        a = ratio_search(RandomDictator(), Objective.MINISOS, cfg, budget=30, seed=7)
        b = ratio_search(RandomDictator(), Objective.MINISOS, cfg, budget=30, seed=7)
        assert a[0].ratio == b[0].ratio
        assert a[0].digest == b[0].digest

    def test_rd_on_lines_pins_at_two(self):
        cfg = GeneratorConfig(topology="line", max_nodes=10, min_agents=2,
                              max_agents=6)
        rep, _, _ = ratio_search(RandomDictator(), Objective.MINISOS, cfg,
                                 budget=80, seed=11)
        assert rep.ratio == pytest.approx(2.0, abs=1e-9)

    def test_median_never_exceeds_two(self):
        cfg = GeneratorConfig(max_nodes=10, min_agents=2, max_agents=6)
        rep, _, _ = ratio_search(TreeMedian(), Objective.MINISOS, cfg,
                                 budget=80, seed=11)
        assert rep.ratio <= 2.0 + 1e-6

    def test_bad_budget(self):
        cfg = GeneratorConfig()
        with pytest.raises(BadParamsError):
            ratio_search(RandomDictator(), Objective.MINISOS, cfg, budget=0, seed=1)


class TestImmigrants:
    def test_half_avg_half_rd_holds(self):
        holds, rows = immigrants_check(HalfAvgHalfRD(), 0.0, 2.0, 4.0, 4)
        assert holds
        assert len(rows) == 4

    def test_median_holds(self):
        holds, _ = immigrants_check(TreeMedian(), 0.0, 1.0, 3.0, 5)
        assert holds

    def test_avg_only_violated(self):
        holds, rows = immigrants_check(AverageOnly(), 0.0, 2.0, 4.0, 2)
        assert not holds

    def test_bad_ordering(self):
        with pytest.raises(BadOrderingError):
            immigrants_check(TreeMedian(), 3.0, 1.0, 2.0, 2)
        with pytest.raises(BadOrderingError):
            immigrants_check(TreeMedian(), 1.0, 1.0, 1.0, 2)


class TestIdentities:
    @pytest.mark.parametrize("kind", ["wavg_movement", "cost_difference", "flattening"])
    def test_random_instances(self, kind):
        rng = random.Random(131)
        for _ in range(25):
            rep = lemma_identity_check(kind, rng)
            assert rep.holds, rep

    def test_unknown_kind(self):
        with pytest.raises(BadParamsError):
            lemma_identity_check("nope", random.Random(0))


class TestSinglePath:
    def test_line_points(self, unit_line3):
        pts = [Point.at_node(0), unit_line3.point_on_edge(1, 0.5), Point.at_node(2)]
        assert points_on_single_path(unit_line3, pts)

    def test_star_tips_are_not(self):
        star = star_net(3)
        pts = [Point.at_node(i) for i in (1, 2, 3)]
        assert not points_on_single_path(star, pts)

    def test_two_points_trivially(self):
        star = star_net(3)
        assert points_on_single_path(star, [Point.at_node(1), Point.at_node(2)])

    def test_rdgm_outputs_collinear(self):
        cfg = GeneratorConfig(max_nodes=10, min_agents=2, max_agents=5, seed=139)
        mech = RandomizedDGM(Q23)
        for net, prof in generate(cfg, 20):
            pts = mech.member_points(net, prof)
            assert points_on_single_path(net, pts)


class TestWitnesses:
    def test_deterministic_witness_ratio_two(self):
        [(net, prof, meta)] = lower_bound_witness("deterministic_2", n=4)
        rep = approx_ratio(TreeMedian(), net, prof)
        assert rep.ratio == pytest.approx(2.0, abs=1e-9)
        assert meta["coords"] == [0.0, 2.0]

    def test_randomized_family_shape(self):
        fam = lower_bound_witness("randomized_15_family", n=4, js=[0, 1, 2])
        assert len(fam) == 3
        for net, prof, meta in fam:
            left, right = meta["coords"]
            assert right - left == pytest.approx(4.0)
            assert len(prof) == 4

    def test_bad_params(self):
        with pytest.raises(BadParamsError):
            lower_bound_witness("deterministic_2", n=3)
        with pytest.raises(BadParamsError):
            lower_bound_witness("unknown")


class TestGridOracle:
    def test_simple_line(self, unit_line3):
        pt, v = grid_optimum(unit_line3, [Point.at_node(0), Point.at_node(2)],
                             [1.0, 1.0])
        assert unit_line3.coordinate_of(pt) == pytest.approx(1.0, abs=1e-4)
        assert v == pytest.approx(2.0, abs=1e-6)

    def test_single_node_network(self):
        net = line_net()
        pt, v = grid_optimum(net, [Point.at_node(0)], [1.0])
        assert pt == Point.at_node(0)
        assert v == 0.0


class TestCSV:
    def test_row_matches_header(self, unit_line3):
        prof = profile(unit_line3, Point.at_node(0), Point.at_node(2))
        rep = approx_ratio(TreeMedian(), unit_line3, prof)
        row = csv_row(rep, "median", Objective.MINISOS, 42, max_regret=0.0)
        assert len(row) == len(CSV_HEADER)
        assert row[1] == "median"
        assert row[2] == "minisos"
        assert row[-1] == "42"
