"""Empirical certification: strategyproofness, the boomerang identity,
approximation ratios, adversarial instance search, and numeric checks of the
structural cost identities.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .generators import GeneratorConfig, generate, line_with_coordinates, random_point
from .mechanisms import Mechanism
from .network import (
    LocationProfile,
    Point,
    TreeNetwork,
    instance_digest,
)
from .objectives import (
    Objective,
    expected_agent_cost,
    expected_social_cost,
    optimal_location,
    social_cost,
    weighted_average,
)

SP_TOL = 1e-7
IDENTITY_TOL = 1e-9


class NotDeterministicError(ValueError):
    pass


class BadOrderingError(ValueError):
    pass


class BadParamsError(ValueError):
    pass


class HypothesisViolatedError(ValueError):
    pass


class DegenerateOptimumError(ValueError):
    pass


# -- deviation sets ---------------------------------------------------------


def deviation_points(network: TreeNetwork, profile: LocationProfile,
                     grid_divisions: int = 16):
    """Candidate misreports: all nodes, all agent locations, and a uniform
    grid on each edge at resolution length/grid_divisions."""
    seen = {}
    for i in range(network.node_count):
        p = Point.at_node(i)
        seen[p] = p
    for x in profile:
        seen[x] = x
    for e, (_, _, w) in enumerate(network.edges):
        for j in range(1, grid_divisions):
            p = network.point_on_edge(e, w * j / grid_divisions)
            seen[p] = p
    return list(seen)


# -- strategyproofness ------------------------------------------------------


@dataclass
class SPReport:
    max_regret: float
    worst_case: tuple | None  # (agent, misreport, true cost, deviated cost)
    tested_count: int

    @property
    def holds(self):
        return self.max_regret <= self.tolerance

    tolerance: float = SP_TOL


def sp_check(mechanism: Mechanism, network: TreeNetwork,
             profile: LocationProfile, deviations=None,
             tolerance: float = SP_TOL) -> SPReport:
    """Max regret any agent can gain by any tested misreport (exact
    expectations, no sampling)."""
    if deviations is None:
        deviations = deviation_points(network, profile)
    base = mechanism.run(network, profile)
    true_costs = [expected_agent_cost(network, base, x) for x in profile]
    max_regret = float("-inf")
    worst = None
    tested = 0
    for i, x in enumerate(profile):
        for p in deviations:
            if p == x:
                continue
            deviated = mechanism.run(network, profile.replace(network, i, p))
            dev_cost = expected_agent_cost(network, deviated, x)
            tested += 1
            regret = true_costs[i] - dev_cost
            if regret > max_regret:
                max_regret = regret
                worst = (i, p, true_costs[i], dev_cost)
    return SPReport(max_regret=max(max_regret, 0.0), worst_case=worst,
                    tested_count=tested, tolerance=tolerance)


@dataclass
class BoomerangReport:
    max_violation: float
    worst_case: tuple | None
    tested_count: int
    tolerance: float = SP_TOL

    @property
    def holds(self):
        return self.max_violation <= self.tolerance


def boomerang_check(mechanism: Mechanism, network: TreeNetwork,
                    profile: LocationProfile, deviations=None,
                    tolerance: float = SP_TOL) -> BoomerangReport:
    """Check that a deviator's cost increase equals the facility movement."""
    if deviations is None:
        deviations = deviation_points(network, profile)
    base = mechanism.run(network, profile)
    if not base.is_point_mass():
        raise NotDeterministicError(f"{mechanism.name} output has support > 1")
    y = base.the_point()
    max_violation = 0.0
    worst = None
    tested = 0
    for i, x in enumerate(profile):
        cost_true = network.distance(y, x)
        for p in deviations:
            if p == x:
                continue
            out = mechanism.run(network, profile.replace(network, i, p))
            if not out.is_point_mass():
                raise NotDeterministicError(f"{mechanism.name} output has support > 1")
            y2 = out.the_point()
            tested += 1
            violation = abs(
                (network.distance(y2, x) - cost_true) - network.distance(y2, y)
            )
            if violation > max_violation:
                max_violation = violation
                worst = (i, p, y, y2)
    return BoomerangReport(max_violation=max_violation, worst_case=worst,
                           tested_count=tested, tolerance=tolerance)


# -- approximation ratios ---------------------------------------------------


@dataclass
class RatioReport:
    mechanism_cost: float
    optimal_cost: float
    ratio: float | None  # None when the optimum is zero
    digest: str
    exact_zero: bool = False


def approx_ratio(mechanism: Mechanism, network: TreeNetwork,
                 profile: LocationProfile,
                 objective: Objective = Objective.MINISOS) -> RatioReport:
    dist = mechanism.run(network, profile)
    mech_cost = expected_social_cost(network, dist, profile, objective)
    _, opt_cost = optimal_location(network, profile, objective)
    digest = instance_digest(network, profile)
    if opt_cost <= 0.0:
        return RatioReport(mech_cost, opt_cost, None, digest,
                           exact_zero=(mech_cost <= IDENTITY_TOL))
    return RatioReport(mech_cost, opt_cost, mech_cost / opt_cost, digest)


def _perturb_point(rng, network, point, step) -> Point:
    """Move a point by +-step along an edge (from a node: onto a random
    incident edge)."""
    if point.is_node:
        nbrs = network.adjacency[point.node]
        if not nbrs:
            return point
        _, e = nbrs[rng.randrange(len(nbrs))]
        u, v, w = network.edges[e]
        t = min(step, w)
        return network.point_on_edge(e, t if point.node == u else w - t)
    _, _, w = network.edges[point.edge]
    delta = step if rng.random() < 0.5 else -step
    t = min(max(point.offset + delta, 0.0), w)
    return network.point_on_edge(point.edge, t)


def ratio_search(mechanism: Mechanism, objective: Objective,
                 config: GeneratorConfig, budget: int, seed: int,
                 hill_iterations: int = 200):
    """Worst approximation ratio over random instances plus local search.

    Deterministic given the seed.  Returns (RatioReport, network, profile)
    for the worst instance found; zero-optimum instances are skipped.
    """
    if budget < 1:
        raise BadParamsError("budget must be >= 1")
    worst = None
    for network, profile in generate(config.with_seed(seed), budget):
        rep = approx_ratio(mechanism, network, profile, objective)
        if rep.ratio is None:
            continue
        if worst is None or rep.ratio > worst[0].ratio:
            worst = (rep, network, profile)
    if worst is None:
        return None
    rep, network, profile = worst
    rng = random.Random(seed ^ 0x9E3779B9)
    step = max(w for _, _, w in network.edges) / 4 if network.edges else 0.0
    for _ in range(hill_iterations):
        if step <= 1e-12:
            break
        i = rng.randrange(len(profile))
        cand = profile.replace(network, i, _perturb_point(rng, network, profile[i], step))
        cand_rep = approx_ratio(mechanism, network, cand, objective)
        if cand_rep.ratio is not None and cand_rep.ratio > rep.ratio:
            rep, profile = cand_rep, cand
        else:
            step *= 0.5
    return rep, network, profile


# -- necessary-condition tests (coordinated-arrival inequalities) -----------


def immigrants_check(mechanism: Mechanism, a: float, b: float, c: float,
                     n: int, tolerance: float = SP_TOL):
    """SP necessary conditions over the two-block profiles with n-m agents at
    a and m agents at c (or b).  Violations certify non-strategyproofness.

    Returns (holds, rows) with one row per m: (m, lhs1, rhs1, lhs2, rhs2).
    """
    if not (a <= b <= c) or (a == b == c):
        raise BadOrderingError(f"need a <= b <= c with a strict inequality, got {a}, {b}, {c}")
    network, resolve = line_with_coordinates([a, b, c])
    pa, pb, pc = resolve(a), resolve(b), resolve(c)
    rows = []
    holds = True
    for m in range(1, n + 1):
        x0 = LocationProfile(network, [pa] * (n - m) + [pc] * m)
        xm = LocationProfile(network, [pa] * (n - m) + [pb] * m)
        d0 = mechanism.run(network, x0)
        dm = mechanism.run(network, xm)
        c_from_0 = expected_agent_cost(network, d0, pc)
        c_from_m = expected_agent_cost(network, dm, pc)
        b_from_m = expected_agent_cost(network, dm, pb)
        b_from_0 = expected_agent_cost(network, d0, pb)
        rows.append((m, c_from_0, c_from_m, b_from_m, b_from_0))
        if c_from_0 > c_from_m + tolerance or b_from_m > b_from_0 + tolerance:
            holds = False
    return holds, rows


# -- structural identity checks ---------------------------------------------


@dataclass
class IdentityReport:
    kind: str
    lhs: float
    rhs: float
    holds: bool


def check_wavg_movement(network, locations, moved, weights,
                        tol: float = IDENTITY_TOL) -> IdentityReport:
    """Movement of the squared-distance minimizer is bounded by the weighted
    movement of the inputs."""
    a = weighted_average(network, locations, weights)
    a2 = weighted_average(network, moved, weights)
    lhs = network.distance(a, a2)
    rhs = sum(w * network.distance(y, y2)
              for w, y, y2 in zip(weights, locations, moved))
    return IdentityReport("wavg_movement", lhs, rhs, lhs <= rhs + tol)


def _branch_toward(network, p: Point, q: Point):
    """The branch of T(G, p) containing q."""
    b = network.branch_of(p, q)
    if b is None:
        raise HypothesisViolatedError("the two anchor locations coincide")
    return b


def check_cost_difference(network, profile, a: Point, b: Point,
                          tol: float = IDENTITY_TOL) -> IdentityReport:
    """Exact difference of sum-of-squares costs between two locations when
    every agent lies behind a, behind b, or on the path between them."""
    t_b = _branch_toward(network, a, b)
    d = network.distance(a, b)
    n = len(profile)
    in_tb = 0.0
    out_tb = 0.0
    for x in profile:
        dxa = network.distance(x, a)
        if network.branch_of(a, x) == t_b:
            in_tb += dxa
        else:
            out_tb += dxa
    lhs = social_cost(network, a, profile) - social_cost(network, b, profile)
    rhs = -n * d * d - 2.0 * d * (out_tb - in_tb)
    return IdentityReport("cost_difference", lhs, rhs, abs(lhs - rhs) <= tol)


def check_flattening(network, profile, a: Point, b: Point,
                     tol: float = IDENTITY_TOL) -> IdentityReport:
    """Cost difference after straightening the far side onto a single ray:
    relocate every agent beyond b onto the path toward the farthest of them,
    preserving distance from b, then compare against the relocated optimum."""
    d = network.distance(a, b)
    n = len(profile)
    t_a = _branch_toward(network, b, a)
    beyond = [i for i, x in enumerate(profile)
              if network.branch_of(b, x) not in (None, t_a)]
    if not beyond:
        raise HypothesisViolatedError("no agents beyond the far anchor")
    far = max(beyond, key=lambda i: network.distance(b, profile[i]))
    xj = profile[far]
    new_locs = list(profile)
    for i in beyond:
        new_locs[i] = network.point_along_path(b, xj, network.distance(b, profile[i]))
    relocated = LocationProfile(network, new_locs)
    opt_pt, _ = optimal_location(network, relocated, Objective.MINISOS)
    lhs = social_cost(network, a, profile) - social_cost(network, b, profile)
    rhs = -n * d * d + 2.0 * n * d * network.distance(a, opt_pt)
    return IdentityReport("flattening", lhs, rhs, abs(lhs - rhs) <= tol)


def make_movement_instance(rng, max_nodes=12, m_max=6):
    """Random tree, locations, weights, and a perturbed copy of the
    locations, for the movement-bound check."""
    cfg = GeneratorConfig(max_nodes=max_nodes, min_agents=1, max_agents=m_max,
                          seed=rng.randrange(2 ** 60))
    network, profile = next(generate(cfg, 1))
    m = len(profile)
    raw = [rng.random() + 0.05 for _ in range(m)]
    total = sum(raw)
    weights = [w / total for w in raw]
    moved = [
        x if rng.random() < 0.5 else random_point(rng, network)
        for x in profile
    ]
    return network, list(profile), moved, weights


def make_two_anchor_instance(rng, ensure_far_opt=True, max_tries=60):
    """Spine-and-bushes instance satisfying the cost-difference hypotheses:
    two anchor nodes a, b on a path; agents behind a, beyond b, or on
    path(a, b); the optimum beyond b."""
    for _ in range(max_tries):
        spine = rng.randint(3, 6)
        lengths = [rng.uniform(0.5, 2.0) for _ in range(spine - 1)]
        edges = [(i, i + 1, lengths[i]) for i in range(spine - 1)]
        ia = rng.randint(0, spine - 3)
        ib = rng.randint(ia + 1, spine - 2)
        nxt = spine
        # Leaf bushes only behind a or at/beyond b keep the hypothesis intact.
        attach_sites = [rng.randrange(0, ia + 1) for _ in range(rng.randint(0, 2))]
        attach_sites += [rng.randrange(ib, spine) for _ in range(rng.randint(1, 2))]
        leaves = []
        for site in attach_sites:
            edges.append((site, nxt, rng.uniform(0.3, 1.5)))
            leaves.append(nxt)
            nxt += 1
        network = TreeNetwork(nxt, edges)
        a = Point.at_node(ia)
        b = Point.at_node(ib)
        spots = []
        for node in range(nxt):
            p = Point.at_node(node)
            if node >= spine:  # leaf tip
                spots.append(p)
            elif node <= ia or node >= ib:
                spots.append(p)
            else:  # interior of path(a, b)
                spots.append(p)
        n_agents = rng.randint(3, 7)
        locs = [spots[rng.randrange(len(spots))] for _ in range(n_agents)]
        # Weight the far end so the optimum falls beyond b.
        locs += [Point.at_node(spine - 1)] * (n_agents // 2 + 2)
        profile = LocationProfile(network, locs)
        if not ensure_far_opt:
            return network, profile, a, b
        opt_pt, _ = optimal_location(network, profile, Objective.MINISOS)
        t_a = network.branch_of(b, a)
        if opt_pt != b and network.branch_of(b, opt_pt) != t_a:
            return network, profile, a, b
    raise HypothesisViolatedError("could not construct a compliant instance")


def lemma_identity_check(kind: str, rng: random.Random) -> IdentityReport:
    """Generate a compliant instance and check the named identity on it."""
    if kind == "wavg_movement":
        return check_wavg_movement(*make_movement_instance(rng))
    if kind == "cost_difference":
        network, profile, a, b = make_two_anchor_instance(rng)
        return check_cost_difference(network, profile, a, b)
    if kind == "flattening":
        network, profile, a, b = make_two_anchor_instance(rng)
        return check_flattening(network, profile, a, b)
    raise BadParamsError(f"unknown identity kind {kind!r}")


def points_on_single_path(network: TreeNetwork, points,
                          tol: float = IDENTITY_TOL) -> bool:
    """True iff all points lie on the path between the farthest pair."""
    if len(points) <= 2:
        return True
    a = b = points[0]
    dmax = -1.0
    for p in points:
        for q in points:
            d = network.distance(p, q)
            if d > dmax:
                dmax, a, b = d, p, q
    return all(
        network.distance(a, y) + network.distance(y, b) <= dmax + tol
        for y in points
    )


# -- lower-bound witness profiles -------------------------------------------


def lower_bound_witness(kind: str, **params):
    """Witness profiles from the tightness arguments, for inspection and for
    feeding the ratio checker.  No proof reasoning happens here."""
    if kind == "deterministic_2":
        n = params.get("n", 4)
        if n < 2 or n % 2:
            raise BadParamsError("deterministic_2 needs an even n >= 2")
        network, resolve = line_with_coordinates([0.0, 2.0], extra_nodes=[1.0])
        profile = LocationProfile(
            network, [resolve(0.0)] * (n // 2) + [resolve(2.0)] * (n // 2)
        )
        return [(network, profile, {"coords": [0.0, 2.0]})]
    if kind == "randomized_15_family":
        n = params.get("n", 4)
        js = params.get("js", [params.get("j")] if params.get("j") is not None else [0, 1, 2])
        if n < 2 or n % 2:
            raise BadParamsError("randomized_15_family needs an even n >= 2")
        out = []
        for j in js:
            left, right = -float(j), 4.0 - float(j)
            network, resolve = line_with_coordinates(
                [left, right], extra_nodes=[left + 1, left + 2, left + 3]
            )
            profile = LocationProfile(
                network, [resolve(left)] * (n // 2) + [resolve(right)] * (n // 2)
            )
            out.append((network, profile, {"coords": [left, right], "j": j}))
        return out
    raise BadParamsError(f"unknown witness kind {kind!r}")


# -- brute-force oracle -----------------------------------------------------


def grid_optimum(network: TreeNetwork, locations, weights,
                 resolution: float = 1e-3, refine_rounds: int = 3,
                 squared: bool = True):
    """Brute-force minimizer of the (squared) distance objective by edge
    grids, refined locally.  Independent of the closed-form solver."""

    def value(p):
        if squared:
            return sum(w * network.distance(p, y) ** 2
                       for w, y in zip(weights, locations))
        return sum(w * network.distance(p, y) for w, y in zip(weights, locations))

    if not network.edges:
        p = Point.at_node(0)
        return p, value(p)
    best = None  # (value, edge, offset, grid step)
    for e, (_, _, w) in enumerate(network.edges):
        steps = max(int(w / resolution), 1)
        for j in range(steps + 1):
            t = w * j / steps
            v = value(network.point_on_edge(e, t))
            if best is None or v < best[0]:
                best = (v, e, t, w / steps)
    v, e, t, span = best
    w = network.edges[e][2]
    lo, hi = max(t - 2 * span, 0.0), min(t + 2 * span, w)
    for _ in range(refine_rounds):
        grid = [(value(network.point_on_edge(e, lo + (hi - lo) * j / 40)),
                 lo + (hi - lo) * j / 40) for j in range(41)]
        v, t = min(grid)
        span = (hi - lo) / 40
        lo, hi = max(t - 2 * span, 0.0), min(t + 2 * span, w)
    return network.point_on_edge(e, t), v


# -- CSV rows ---------------------------------------------------------------

CSV_HEADER = [
    "instance_digest", "mechanism", "objective",
    "mech_cost", "opt_cost", "ratio", "max_regret", "seed",
]


def csv_row(report: RatioReport, mechanism_name, objective, seed,
            max_regret=""):
    return [
        report.digest, mechanism_name, objective.value,
        f"{report.mechanism_cost:.12g}", f"{report.optimal_cost:.12g}",
        "" if report.ratio is None else f"{report.ratio:.12g}",
        "" if max_regret == "" else f"{max_regret:.12g}",
        str(seed),
    ]
