"""Social cost functions, exact expectations, and optimal-location solvers.

The key solver is the weighted sum-of-squares minimizer on a tree.  Restricted
to one edge, the objective is piecewise quadratic in the offset: every
location off the edge contributes min(d(u,y)+t, d(v,y)+L-t), a tent with one
breakpoint, and every location on the edge contributes |t-s|.  We sweep the
breakpoints left to right, maintaining the quadratic coefficients
incrementally, and take the global minimum over all edges.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .network import (
    LocationProfile,
    NetworkError,
    Point,
    PointInvalidError,
    TreeNetwork,
    point_sort_key,
)

PROB_TOL = 1e-9
COST_TOL = 1e-9


class DistributionInvalidError(ValueError):
    pass


class WeightInvalidError(ValueError):
    pass


class EmptyInputError(ValueError):
    pass


class Objective(enum.Enum):
    MINISOS = "minisos"
    MINISUM = "minisum"
    MINIMAX = "minimax"

    @staticmethod
    def parse(text: str) -> "Objective":
        try:
            return Objective(text.lower())
        except ValueError:
            raise NetworkError(f"unknown objective {text!r}") from None


@dataclass(frozen=True)
class LocationDistribution:
    """Finite-support probability distribution over points of one network."""

    support: tuple  # ((Point, prob), ...) with duplicates merged

    def __iter__(self):
        return iter(self.support)

    @property
    def points(self):
        return [p for p, _ in self.support]

    def is_point_mass(self) -> bool:
        return len(self.support) == 1

    def the_point(self) -> Point:
        if not self.is_point_mass():
            raise DistributionInvalidError("distribution is not a point mass")
        return self.support[0][0]

    def to_json(self):
        return [[p.to_json(), prob] for p, prob in self.support]


def make_distribution(pairs) -> LocationDistribution:
    """Merge duplicate points, validate probabilities, fix support order."""
    merged: dict[Point, float] = {}
    for p, prob in pairs:
        if prob < -PROB_TOL:
            raise DistributionInvalidError(f"negative probability {prob} at {p}")
        merged[p] = merged.get(p, 0.0) + prob
    merged = {p: q for p, q in merged.items() if q > 0.0}
    if not merged:
        raise DistributionInvalidError("empty support")
    total = sum(merged.values())
    if abs(total - 1.0) > PROB_TOL:
        raise DistributionInvalidError(f"probabilities sum to {total}, expected 1")
    support = tuple(sorted(merged.items(), key=lambda kv: point_sort_key(kv[0])))
    return LocationDistribution(support=support)


def point_mass(p: Point) -> LocationDistribution:
    return LocationDistribution(support=((p, 1.0),))


def social_cost(network: TreeNetwork, y: Point, profile: LocationProfile,
                objective: Objective = Objective.MINISOS) -> float:
    network.check_point(y)
    dists = (network.distance(y, x) for x in profile)
    if objective is Objective.MINISOS:
        return sum(d * d for d in dists)
    if objective is Objective.MINISUM:
        return sum(dists)
    return max(dists)


def expected_social_cost(network: TreeNetwork, dist: LocationDistribution,
                         profile: LocationProfile,
                         objective: Objective = Objective.MINISOS) -> float:
    return sum(
        prob * social_cost(network, y, profile, objective) for y, prob in dist
    )


def expected_agent_cost(network: TreeNetwork, dist: LocationDistribution,
                        x: Point) -> float:
    return sum(prob * network.distance(y, x) for y, prob in dist)


# -- weighted average (sum-of-squares minimizer) ---------------------------


def _check_weights(weights, m):
    if len(weights) != m:
        raise WeightInvalidError(f"{len(weights)} weights for {m} locations")
    if any(w < -PROB_TOL for w in weights):
        raise WeightInvalidError("weights must be nonnegative")
    total = sum(weights)
    if abs(total - 1.0) > PROB_TOL:
        raise WeightInvalidError(f"weights sum to {total}, expected 1")


def _edge_pieces(network, e, locations, loc_node_dists):
    """Per-location linear pieces of distance along edge e.

    Yields (breakpoint_or_None, c_before, g_before, c_after, g_after) where
    the distance is c + g*t on each side of the breakpoint (g in {-1, +1}).
    A None breakpoint means a single piece across the whole edge.
    """
    u, v, w = network.edges[e]
    out = []
    for i, y in enumerate(locations):
        if not y.is_node and y.edge == e:
            s = y.offset
            out.append((s, s, -1.0, -s, 1.0))
            continue
        du = loc_node_dists[i][u]
        dv = loc_node_dists[i][v]
        t_star = 0.5 * (dv + w - du)
        if t_star <= 0.0:
            out.append((None, w + dv, -1.0, 0.0, 0.0))
        elif t_star >= w:
            out.append((None, du, 1.0, 0.0, 0.0))
        else:
            out.append((t_star, du, 1.0, w + dv, -1.0))
    return out


def _minimize_piecewise_sos(network, locations, weights):
    """Global minimizer of sum_i w_i d(t, y_i)^2 over the whole network.

    Returns (Point, value).  Weights need not be normalized here.
    """
    m = len(locations)
    loc_nd = [network.point_node_distances(y) for y in locations]
    A = sum(weights)
    best = None
    if not network.edges:
        y0 = Point.at_node(0)
        val = sum(w * network.distance(y0, y) ** 2 for w, y in zip(weights, locations))
        return y0, val
    for e, (u, v, L) in enumerate(network.edges):
        pieces = _edge_pieces(network, e, locations, loc_nd)
        B = 0.0
        C = 0.0
        flips = []
        for i, (bp, c0, g0, c1, g1) in enumerate(pieces):
            wi = weights[i]
            B += wi * c0 * g0
            C += wi * c0 * c0
            if bp is not None:
                flips.append((bp, i))
        flips.sort()
        bounds = [0.0] + [bp for bp, _ in flips] + [L]
        seg = 0
        t0 = 0.0
        while True:
            t1 = bounds[seg + 1]
            # Quadratic A t^2 + 2 B t + C on [t0, t1].
            cands = [t0, t1]
            if A > 0.0:
                tv = -B / A
                if t0 < tv < t1:
                    cands.append(tv)
            for t in cands:
                val = A * t * t + 2.0 * B * t + C
                if best is None or val < best[0] - 1e-15:
                    best = (val, e, t)
            seg += 1
            if seg > len(flips):
                break
            bp, i = flips[seg - 1]
            _, c0, g0, c1, g1 = pieces[i]
            wi = weights[i]
            B += wi * (c1 * g1 - c0 * g0)
            C += wi * (c1 * c1 - c0 * c0)
            t0 = bp
    val, e, t = best
    return network.point_on_edge(e, t), max(val, 0.0)


def weighted_average(network: TreeNetwork, locations, weights) -> Point:
    """The unique point minimizing the weighted sum of squared distances."""
    locations = [network.check_point(p) for p in locations]
    if not locations:
        raise EmptyInputError("weighted_average needs at least one location")
    _check_weights(weights, len(locations))
    if len(locations) == 1:
        return locations[0]
    point, _ = _minimize_piecewise_sos(network, locations, list(weights))
    return point


def verify_wavg_condition(network: TreeNetwork, candidate: Point, locations,
                          weights, tol: float = COST_TOL):
    """Check the per-branch optimality condition at the candidate point.

    For each branch at the candidate, the weighted distance mass inside the
    branch must not exceed the mass outside it.  Returns (holds, report)
    where report lists (branch, inside_sum, outside_sum).
    """
    network.check_point(candidate)
    _check_weights(weights, len(locations))
    dists = [network.distance(candidate, y) for y in locations]
    total = sum(w * d for w, d in zip(weights, dists))
    report = []
    holds = True
    for branch in network.branches_at(candidate):
        inside = 0.0
        for i, y in enumerate(locations):
            b = network.branch_of(candidate, y)
            if b == branch:
                inside += weights[i] * dists[i]
        outside = total - inside
        report.append((branch, inside, outside))
        if inside > outside + tol:
            holds = False
    return holds, report


# -- optimal locations per objective ---------------------------------------


def _minimize_piecewise_sum(network, locations, weights):
    """Minimizer of sum_i w_i d(t, y_i); piecewise linear per edge.

    Minima occur at breakpoints or nodes; among near-ties the point closest
    to node 0 is returned, for determinism.
    """
    loc_nd = [network.point_node_distances(y) for y in locations]
    if not network.edges:
        return Point.at_node(0), 0.0
    candidates = []
    for e, (u, v, L) in enumerate(network.edges):
        pieces = _edge_pieces(network, e, locations, loc_nd)
        ts = {0.0, L}
        for bp, *_ in pieces:
            if bp is not None and 0.0 < bp < L:
                ts.add(bp)
        for t in ts:
            val = 0.0
            for i, (bp, c0, g0, c1, g1) in enumerate(pieces):
                if bp is None or t <= bp:
                    val += weights[i] * (c0 + g0 * t)
                else:
                    val += weights[i] * (c1 + g1 * t)
            candidates.append((val, e, t))
    best_val = min(c[0] for c in candidates)
    ties = [c for c in candidates if c[0] <= best_val + COST_TOL]
    origin = Point.at_node(0)
    pick = min(
        ties,
        key=lambda c: (network.distance(origin, network.point_on_edge(c[1], c[2])),
                       c[1], c[2]),
    )
    return network.point_on_edge(pick[1], pick[2]), best_val


def _minimize_piecewise_max(network, locations, weights=None):
    """Minimizer of max_i d(t, y_i); the weights are ignored."""
    loc_nd = [network.point_node_distances(y) for y in locations]
    if not network.edges:
        return Point.at_node(0), 0.0
    best = None
    for e, (u, v, L) in enumerate(network.edges):
        pieces = _edge_pieces(network, e, locations, loc_nd)
        bounds = sorted({0.0, L} | {bp for bp, *_ in pieces if bp is not None and 0.0 < bp < L})
        for t0, t1 in zip(bounds, bounds[1:]):
            # On [t0, t1] every piece is linear with slope +-1 (or flat).
            cp = cm = None  # max intercept among rising / falling pieces
            flat = None
            for bp, c0, g0, c1, g1 in pieces:
                if bp is None or t1 <= bp + 1e-15:
                    c, g = c0, g0
                else:
                    c, g = c1, g1
                if g > 0:
                    cp = c if cp is None else max(cp, c)
                elif g < 0:
                    cm = c if cm is None else max(cm, c)
                else:
                    flat = c if flat is None else max(flat, c)
            cands = [t0, t1]
            if cp is not None and cm is not None:
                tx = 0.5 * (cm - cp)
                if t0 < tx < t1:
                    cands.append(tx)
            for t in cands:
                val = max(
                    x for x in (
                        cp + t if cp is not None else None,
                        cm - t if cm is not None else None,
                        flat,
                    ) if x is not None
                )
                if best is None or val < best[0] - 1e-15:
                    best = (val, e, t)
    val, e, t = best
    return network.point_on_edge(e, t), val


def optimal_location(network: TreeNetwork, profile: LocationProfile,
                     objective: Objective = Objective.MINISOS):
    """(optimal point, optimal social cost) for the given objective."""
    if len(profile) == 0:
        raise EmptyInputError("profile is empty")
    locs = list(profile)
    ones = [1.0] * len(locs)
    if objective is Objective.MINISOS:
        return _minimize_piecewise_sos(network, locs, ones)
    if objective is Objective.MINISUM:
        return _minimize_piecewise_sum(network, locs, ones)
    return _minimize_piecewise_max(network, locs)
