"""Facility-location mechanisms: boomerang primitives, the parameterized
composition over them, and the named line/tree mechanisms.

Every mechanism maps (network, profile) to a finite-support location
distribution; "randomized" mechanisms return the distribution itself, never a
sample, so evaluation is deterministic.
"""

from __future__ import annotations

from fractions import Fraction

from .network import (
    LocationProfile,
    NetworkError,
    Point,
    TreeNetwork,
    subdivide,
)
from .objectives import (
    EmptyInputError,
    LocationDistribution,
    Objective,
    WeightInvalidError,
    make_distribution,
    optimal_location,
    point_mass,
    weighted_average,
    _check_weights,
)


class MechanismError(ValueError):
    pass


class IndexOutOfRangeError(MechanismError):
    pass


class NotALineError(MechanismError):
    pass


class QOutOfRangeError(MechanismError):
    pass


class NotBoomerangError(MechanismError):
    pass


class NeedTwoAgentsError(MechanismError):
    pass


def _require_line(network):
    if not network.is_line():
        raise NotALineError("this mechanism is defined on line networks only")


def _sorted_coords(network, profile):
    return sorted(network.coordinate_of(x) for x in profile)


# -- generalized-median walks ----------------------------------------------


def _agent_context(network, profile):
    """Subdivide at agent locations so every agent sits at a node."""
    aug, pmap = subdivide(network, list(profile))
    agent_nodes = [pmap.to_augmented(x).node for x in profile]
    return aug, pmap, agent_nodes


def _descend(aug, agent_nodes, root, qualifies):
    """Walk from the root into any branch whose agent count qualifies.

    With thresholds above n/2 at most one branch can qualify, so the walk is
    deterministic; it stops at the first node where no branch qualifies.
    """
    dm = aug.node_distances()
    adj = aug.adjacency
    a = root
    while True:
        da = dm[a]
        moved = False
        for w, _ in adj[a]:
            dw = dm[w]
            count = sum(1 for x in agent_nodes if dw[x] < da[x])
            if qualifies(count):
                a = w
                moved = True
                break
        if not moved:
            return a


class Mechanism:
    """Base class; subclasses implement run()."""

    name = "mechanism"
    boomerang = False  # known member of the deterministic boomerang family
    deterministic = False

    def run(self, network: TreeNetwork, profile: LocationProfile) -> LocationDistribution:
        raise NotImplementedError

    def point(self, network, profile) -> Point:
        """Output location of a deterministic mechanism."""
        return self.run(network, profile).the_point()

    def __call__(self, network, profile):
        return self.run(network, profile)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


class Dictator(Mechanism):
    boomerang = True
    deterministic = True

    def __init__(self, i: int):
        if i < 1:
            raise IndexOutOfRangeError(f"agent index {i} must be >= 1")
        self.i = i
        self.name = f"dictator:{i}"

    def run(self, network, profile):
        if self.i > len(profile):
            raise IndexOutOfRangeError(
                f"agent index {self.i} exceeds profile size {len(profile)}"
            )
        return point_mass(profile[self.i - 1])


class KthLocation(Mechanism):
    """Point mass at the k-th smallest coordinate on a line; k='n' means the
    rightmost agent."""

    boomerang = True
    deterministic = True

    def __init__(self, k):
        if k != "n" and (not isinstance(k, int) or k < 1):
            raise IndexOutOfRangeError(f"order statistic {k!r} must be >= 1 or 'n'")
        self.k = k
        self.name = f"kth:{k}"

    def run(self, network, profile):
        _require_line(network)
        n = len(profile)
        k = n if self.k == "n" else self.k
        if k > n:
            raise IndexOutOfRangeError(f"order statistic {k} exceeds profile size {n}")
        coords = _sorted_coords(network, profile)
        return point_mass(network.point_at_coordinate(coords[k - 1]))


class TreeMedian(Mechanism):
    """Descend from node 0 into any branch holding strictly more than half
    the agents; stop when none does."""

    boomerang = True
    deterministic = True
    name = "median"

    def run(self, network, profile):
        if len(profile) == 0:
            raise EmptyInputError("profile is empty")
        aug, pmap, agent_nodes = _agent_context(network, profile)
        n = len(profile)
        stop = _descend(aug, agent_nodes, 0, lambda count: 2 * count > n)
        return point_mass(pmap.to_original(Point.at_node(stop)))


class DGM(Mechanism):
    """Dictatorial generalized median: root at agent i's report and descend
    into any branch holding at least fraction q of the agents (q > 1/2, so at
    most one branch ever qualifies)."""

    boomerang = True
    deterministic = True

    def __init__(self, i: int, q: Fraction):
        q = Fraction(q)
        if not (Fraction(1, 2) < q <= 1):
            raise QOutOfRangeError(f"q={q} must satisfy 1/2 < q <= 1")
        if i < 1:
            raise IndexOutOfRangeError(f"agent index {i} must be >= 1")
        self.i = i
        self.q = q
        self.name = f"dgm:{i}:{q}"

    def run(self, network, profile):
        if self.i > len(profile):
            raise IndexOutOfRangeError(
                f"agent index {self.i} exceeds profile size {len(profile)}"
            )
        aug, pmap, agent_nodes = _agent_context(network, profile)
        n = len(profile)
        num, den = self.q.numerator, self.q.denominator
        root = agent_nodes[self.i - 1]
        stop = _descend(aug, agent_nodes, root, lambda count: count * den >= num * n)
        return point_mass(pmap.to_original(Point.at_node(stop)))


class PB(Mechanism):
    """Composition over boomerang members: each member's output with half its
    weight, and the weighted average of all outputs with probability 1/2."""

    def __init__(self, members, weights):
        for m in members:
            if not isinstance(m, Mechanism) or not m.boomerang:
                raise NotBoomerangError(
                    f"{getattr(m, 'name', m)!r} is not a recognized boomerang mechanism"
                )
        _check_weights(weights, len(members))
        self.members = list(members)
        self.weights = list(weights)
        self.name = "pb:[{}]:[{}]".format(
            ",".join(m.name for m in members),
            ",".join(str(w) for w in weights),
        )

    def run(self, network, profile):
        ys = [m.point(network, profile) for m in self.members]
        avg = weighted_average(network, ys, self.weights)
        pairs = [(y, 0.5 * w) for y, w in zip(ys, self.weights)]
        pairs.append((avg, 0.5))
        return make_distribution(pairs)


class LRM(Mechanism):
    """Leftmost agent 1/4, rightmost agent 1/4, their midpoint 1/2."""

    name = "lrm"

    def run(self, network, profile):
        _require_line(network)
        coords = _sorted_coords(network, profile)
        lo, hi = coords[0], coords[-1]
        return make_distribution([
            (network.point_at_coordinate(lo), 0.25),
            (network.point_at_coordinate(hi), 0.25),
            (network.point_at_coordinate(0.5 * (lo + hi)), 0.5),
        ])


class RandomDictator(Mechanism):
    name = "rd"

    def run(self, network, profile):
        n = len(profile)
        if n == 0:
            raise EmptyInputError("profile is empty")
        return make_distribution((x, 1.0 / n) for x in profile)


class HalfAvgHalfRD(Mechanism):
    """The average location with probability 1/2, each agent with 1/(2n)."""

    name = "half-avg-rd"

    def run(self, network, profile):
        _require_line(network)
        n = len(profile)
        mean = sum(network.coordinate_of(x) for x in profile) / n
        pairs = [(network.point_at_coordinate(mean), 0.5)]
        pairs.extend((x, 0.5 / n) for x in profile)
        return make_distribution(pairs)


class RandomizedDGM(Mechanism):
    """PB over the n dictatorial generalized medians with uniform weights."""

    def __init__(self, q: Fraction):
        q = Fraction(q)
        if not (Fraction(1, 2) < q <= Fraction(2, 3)):
            raise QOutOfRangeError(f"q={q} must satisfy 1/2 < q <= 2/3")
        self.q = q
        self.name = f"rdgm:{q}"

    def member_points(self, network, profile):
        """The n generalized-median outputs y_1..y_n (shared subdivision)."""
        aug, pmap, agent_nodes = _agent_context(network, profile)
        n = len(profile)
        num, den = self.q.numerator, self.q.denominator
        qualifies = lambda count: count * den >= num * n
        return [
            pmap.to_original(Point.at_node(_descend(aug, agent_nodes, r, qualifies)))
            for r in agent_nodes
        ]

    def run(self, network, profile):
        n = len(profile)
        if n == 0:
            raise EmptyInputError("profile is empty")
        ys = self.member_points(network, profile)
        weights = [1.0 / n] * n
        avg = weighted_average(network, ys, weights)
        pairs = [(y, 0.5 / n) for y in ys]
        pairs.append((avg, 0.5))
        return make_distribution(pairs)


class ConsecutiveMidpoints(Mechanism):
    """Extreme agents with probability 1/(2n) each; the midpoint of every
    consecutive sorted pair with probability 1/n."""

    name = "midpoints"

    def run(self, network, profile):
        _require_line(network)
        n = len(profile)
        if n < 2:
            raise NeedTwoAgentsError("needs at least two agents")
        coords = _sorted_coords(network, profile)
        pairs = [
            (network.point_at_coordinate(coords[0]), 0.5 / n),
            (network.point_at_coordinate(coords[-1]), 0.5 / n),
        ]
        for a, b in zip(coords, coords[1:]):
            pairs.append((network.point_at_coordinate(0.5 * (a + b)), 1.0 / n))
        return make_distribution(pairs)


class Mixture(Mechanism):
    """Fixed probability mixture of mechanisms."""

    def __init__(self, components):
        probs = [p for _, p in components]
        _check_weights(probs, len(probs))
        for m, _ in components:
            if not isinstance(m, Mechanism):
                raise WeightInvalidError("mixture components must be mechanisms")
        self.components = list(components)
        self.name = "mix:[{}]".format(
            ",".join(f"({m.name},{p})" for m, p in components)
        )

    def run(self, network, profile):
        pairs = []
        for m, p in self.components:
            for y, q in m.run(network, profile):
                pairs.append((y, p * q))
        return make_distribution(pairs)


class AverageOnly(Mechanism):
    """Point mass at the sum-of-squares optimum.  Not strategyproof; kept as
    the negative control for the checkers."""

    name = "avg-only"
    deterministic = True

    def run(self, network, profile):
        point, _ = optimal_location(network, profile, Objective.MINISOS)
        return point_mass(point)


# -- textual mechanism specs -----------------------------------------------


def _split_top(text, sep=","):
    """Split on sep at bracket depth zero."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "[(":
            depth += 1
        elif ch in "])":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


def _parse_fraction(text) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise MechanismError(f"bad rational {text!r}") from None


def parse_mechanism(text: str) -> Mechanism:
    """Parse a mechanism spec string.

    Grammar: "dictator:3", "kth:1", "kth:n", "median", "dgm:3:2/3", "rd",
    "lrm", "half-avg-rd", "rdgm:2/3", "midpoints", "avg-only",
    "pb:[kth:1,kth:n]:[1/2,1/2]", "mix:[(median,1/2),(rd,1/2)]".
    """
    text = text.strip()
    head = text.split(":", 1)[0]
    try:
        if text == "median":
            return TreeMedian()
        if text == "rd":
            return RandomDictator()
        if text == "lrm":
            return LRM()
        if text == "half-avg-rd":
            return HalfAvgHalfRD()
        if text == "midpoints":
            return ConsecutiveMidpoints()
        if text == "avg-only":
            return AverageOnly()
        if head == "dictator":
            return Dictator(int(text.split(":")[1]))
        if head == "kth":
            arg = text.split(":")[1]
            return KthLocation("n" if arg == "n" else int(arg))
        if head == "dgm":
            _, i, q = text.split(":")
            return DGM(int(i), _parse_fraction(q))
        if head == "rdgm":
            return RandomizedDGM(_parse_fraction(text.split(":", 1)[1]))
        if head == "pb":
            body = text[len("pb:"):]
            mtxt, wtxt = _split_top(body, ":")
            members = [parse_mechanism(t) for t in _split_top(mtxt.strip("[]"))]
            weights = [float(_parse_fraction(t)) for t in _split_top(wtxt.strip("[]"))]
            return PB(members, weights)
        if head == "mix":
            body = text[len("mix:"):].strip("[]")
            comps = []
            for part in _split_top(body):
                part = part.strip()
                if not (part.startswith("(") and part.endswith(")")):
                    raise MechanismError(f"bad mixture component {part!r}")
                mtxt, ptxt = _split_top(part[1:-1], ",")
                comps.append((parse_mechanism(mtxt), float(_parse_fraction(ptxt))))
            return Mixture(comps)
    except (IndexError, ValueError) as exc:
        raise MechanismError(f"bad mechanism spec {text!r}: {exc}") from None
    raise MechanismError(f"unknown mechanism spec {text!r}")
