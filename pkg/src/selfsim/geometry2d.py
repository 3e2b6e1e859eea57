"""Exact rational planar geometry.

All points are pairs of ``Fraction``; orientation predicates, hull
construction, and pairwise distance scans run in exact arithmetic, so
verdicts are definite.  Square roots and angles are the only interval
quantities.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .errors import AmbiguousOrientation, DegenerateSegment, DegenerateVertex
from .precision import (
    DEFAULT_BITS,
    CertInterval,
    interval_acos,
    interval_atan,
    pi_interval,
)

Point = tuple[Fraction, Fraction]


def as_point(x, y) -> Point:
    return (Fraction(x), Fraction(y))


def cross(origin: Point, a: Point, b: Point) -> Fraction:
    """Signed double area of the triangle (origin, a, b); > 0 means a CCW turn."""
    return (a[0] - origin[0]) * (b[1] - origin[1]) - (a[1] - origin[1]) * (b[0] - origin[0])


def dot(a: Point, b: Point) -> Fraction:
    return a[0] * b[0] + a[1] * b[1]


def sub(a: Point, b: Point) -> Point:
    return (a[0] - b[0], a[1] - b[1])


def dist_sq(a: Point, b: Point) -> Fraction:
    dx, dy = a[0] - b[0], a[1] - b[1]
    return dx * dx + dy * dy


def sqrt_of_fraction(value: Fraction, bits: int = DEFAULT_BITS) -> CertInterval:
    return CertInterval.from_rational(value, bits).sqrt()


@dataclass(frozen=True)
class Polygon:
    """Convex polygon as CCW vertices; degenerate cases keep 1 or 2 vertices."""

    vertices: tuple[Point, ...]

    def edges(self) -> tuple[tuple[Point, Point], ...]:
        pts = self.vertices
        if len(pts) < 2:
            return ()
        if len(pts) == 2:
            return ((pts[0], pts[1]),)
        return tuple((pts[i], pts[(i + 1) % len(pts)]) for i in range(len(pts)))

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)


def convex_hull(points: Iterable[Point]) -> Polygon:
    """Monotone-chain hull with exact predicates; collinear points elided."""
    pts = sorted(set(points))
    if not pts:
        raise ValueError("convex_hull of empty point set")
    if len(pts) == 1:
        return Polygon((pts[0],))

    def chain(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and cross(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = chain(pts)
    upper = chain(reversed(pts))
    verts = lower[:-1] + upper[:-1]
    if len(verts) < 2:
        # all points collinear: keep the two extremes
        return Polygon((pts[0], pts[-1]))
    return Polygon(tuple(verts))


class HullPosition(enum.Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    BOUNDARY_UNDECIDED = "boundary-undecided"


@dataclass(frozen=True)
class HullVerdict:
    status: HullPosition
    # convex-combination certificate: ((vertex, weight), ...) with weights
    # nonnegative rationals summing to 1 and combining to the query point
    coefficients: Optional[tuple[tuple[Point, Fraction], ...]] = None
    # an edge whose supporting line separates the query point from the hull
    separator: Optional[tuple[Point, Point]] = None


def _margin_clears(value: Fraction, margin: Fraction, length_sq: Fraction) -> bool:
    # |value| / sqrt(length_sq) >= margin, compared exactly via squares
    if margin == 0:
        return True
    return value * value >= margin * margin * length_sq


def _barycentric_certificate(hull: Sequence[Point], x: Point):
    anchor = hull[0]
    for i in range(1, len(hull) - 1):
        b, c = hull[i], hull[i + 1]
        denom = cross(anchor, b, c)
        if denom == 0:
            continue
        wb = cross(anchor, x, c) / denom
        wc = cross(anchor, b, x) / denom
        wa = 1 - wb - wc
        if wa >= 0 and wb >= 0 and wc >= 0:
            out = []
            for pt, w in ((anchor, wa), (b, wb), (c, wc)):
                if w != 0:
                    out.append((pt, w))
            return tuple(out)
    return None


def _segment_verdict(a: Point, b: Point, x: Point, margin: Fraction) -> HullVerdict:
    ab2 = dist_sq(a, b)
    off = cross(a, b, x)
    if off != 0:
        # perpendicular distance to the supporting line bounds the hull distance
        if _margin_clears(off, margin, ab2):
            return HullVerdict(HullPosition.OUTSIDE, separator=(a, b))
        return HullVerdict(HullPosition.BOUNDARY_UNDECIDED)
    t = dot(sub(x, a), sub(b, a)) / ab2
    if 0 <= t <= 1:
        inner = min(t, 1 - t)
        if inner > 0 and (margin == 0 or inner * inner * ab2 >= margin * margin):
            return HullVerdict(HullPosition.INSIDE, coefficients=((a, 1 - t), (b, t)))
        return HullVerdict(HullPosition.BOUNDARY_UNDECIDED)
    overshoot = t if t < 0 else t - 1
    if margin == 0 or overshoot * overshoot * ab2 >= margin * margin:
        return HullVerdict(HullPosition.OUTSIDE, separator=(a, b))
    return HullVerdict(HullPosition.BOUNDARY_UNDECIDED)


def point_in_hull(x: Point, hull: Polygon, margin: Fraction = Fraction(0)) -> HullVerdict:
    """Locate x relative to a hull with an exact margin test.

    INSIDE comes with a convex-combination certificate over at most three
    vertices; OUTSIDE comes with a separating edge.  Queries closer than
    ``margin`` to the boundary are BOUNDARY_UNDECIDED.
    """
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    verts = hull.vertices
    if len(verts) == 1:
        v = verts[0]
        if x == v:
            if margin == 0:
                return HullVerdict(HullPosition.INSIDE, coefficients=((v, Fraction(1)),))
            return HullVerdict(HullPosition.BOUNDARY_UNDECIDED)
        if margin == 0 or dist_sq(x, v) >= margin * margin:
            return HullVerdict(HullPosition.OUTSIDE)
        return HullVerdict(HullPosition.BOUNDARY_UNDECIDED)
    if len(verts) == 2:
        return _segment_verdict(verts[0], verts[1], x, margin)

    strictly_inside = True
    for a, b in hull.edges():
        c = cross(a, b, x)
        if c < 0:
            if _margin_clears(c, margin, dist_sq(a, b)):
                return HullVerdict(HullPosition.OUTSIDE, separator=(a, b))
            return HullVerdict(HullPosition.BOUNDARY_UNDECIDED)
        if c == 0 or not _margin_clears(c, margin, dist_sq(a, b)):
            strictly_inside = False
    if strictly_inside:
        cert = _barycentric_certificate(verts, x)
        if cert is not None:
            return HullVerdict(HullPosition.INSIDE, coefficients=cert)
    return HullVerdict(HullPosition.BOUNDARY_UNDECIDED)


def point_segment_dist_sq(x: Point, a: Point, b: Point) -> Fraction:
    """Exact squared distance from x to the closed segment [a, b]."""
    if a == b:
        return dist_sq(x, a)
    ab = sub(b, a)
    t = dot(sub(x, a), ab) / dist_sq(a, b)
    if t <= 0:
        return dist_sq(x, a)
    if t >= 1:
        return dist_sq(x, b)
    foot = (a[0] + t * ab[0], a[1] + t * ab[1])
    return dist_sq(x, foot)


def point_hull_dist_sq(x: Point, hull: Polygon) -> Fraction:
    """Exact squared distance from x to a convex hull (0 when x lies in it)."""
    verts = hull.vertices
    if len(verts) == 1:
        return dist_sq(x, verts[0])
    if len(verts) == 2:
        return point_segment_dist_sq(x, verts[0], verts[1])
    if all(cross(a, b, x) >= 0 for a, b in hull.edges()):
        return Fraction(0)
    return min(point_segment_dist_sq(x, a, b) for a, b in hull.edges())


def angle_between(a: Point, b: Point, c: Point, bits: int = DEFAULT_BITS) -> CertInterval:
    """Certified enclosure of the angle at b between rays b->a and b->c."""
    u, w = sub(a, b), sub(c, b)
    if u == (0, 0) or w == (0, 0):
        raise DegenerateVertex("angle rays must have nonzero length")
    uu, ww, uw = dot(u, u), dot(w, w), dot(u, w)
    cos_angle = CertInterval.from_rational(uw, bits) / (
        sqrt_of_fraction(uu, bits) * sqrt_of_fraction(ww, bits)
    )
    return interval_acos(cos_angle)


class HalfPlaneVerdict(enum.Enum):
    YES = "yes"
    NO = "no"
    UNDECIDED = "undecided"


def half_plane_contains(a: Point, b: Point, v: Point, x: Point) -> HalfPlaneVerdict:
    """Is x in the closed half plane bounded by line(a,b) that contains v?"""
    if a == b:
        raise DegenerateSegment("half plane boundary needs two distinct points")
    side_v = cross(a, b, v)
    if side_v == 0:
        raise AmbiguousOrientation("orientation witness lies on the boundary line")
    side_x = cross(a, b, x)
    if side_x == 0:
        return HalfPlaneVerdict.YES
    return HalfPlaneVerdict.YES if (side_x > 0) == (side_v > 0) else HalfPlaneVerdict.NO


@dataclass(frozen=True)
class Ball:
    """Closed disk with exact rational center and certified radius."""

    center: Point
    radius: CertInterval
    pair: Optional[tuple[Point, Point]] = None


def _min_pair_sq(cloud_l: Sequence[Point], cloud_m: Sequence[Point]) -> Fraction:
    return min(dist_sq(p, r) for p in cloud_l for r in cloud_m)


def set_distance_and_rballs(
    cloud_l: Iterable[Point],
    cloud_m: Iterable[Point],
    slack: Fraction,
    bits: int = DEFAULT_BITS,
) -> tuple[CertInterval, list[Ball]]:
    """Distance between two finite clouds plus all near-minimal bridging balls.

    Every returned ball is centered at the midpoint of a pair (one point per
    cloud) whose distance is within ``slack`` of the minimum; its radius is
    half the pair distance.
    """
    left, right = sorted(set(cloud_l)), sorted(set(cloud_m))
    if not left or not right:
        raise ValueError("clouds must be nonempty")
    if slack < 0:
        raise ValueError("slack must be nonnegative")
    best_sq = _min_pair_sq(left, right)
    dist = sqrt_of_fraction(best_sq, bits)
    _, best_up = dist.to_fractions()
    threshold = (best_up + slack) ** 2
    balls = []
    seen = set()
    for p in left:
        for r in right:
            d2 = dist_sq(p, r)
            if d2 <= threshold:
                center = ((p[0] + r[0]) / 2, (p[1] + r[1]) / 2)
                key = (center, d2)
                if key in seen:
                    continue
                seen.add(key)
                radius = sqrt_of_fraction(d2 / 4, bits)
                balls.append(Ball(center=center, radius=radius, pair=(p, r)))
    balls.sort(key=lambda ball: (ball.center, ball.pair))
    return dist, balls


def hausdorff_distance(
    cloud_a: Iterable[Point], cloud_b: Iterable[Point], bits: int = DEFAULT_BITS
) -> CertInterval:
    """Certified Hausdorff distance between two finite point sets."""
    a, b = sorted(set(cloud_a)), sorted(set(cloud_b))
    if not a or not b:
        raise ValueError("clouds must be nonempty")
    forward = max(min(dist_sq(p, r) for r in b) for p in a)
    backward = max(min(dist_sq(p, r) for r in a) for p in b)
    return sqrt_of_fraction(max(forward, backward), bits)


def direction_angle_mod_pi(dx: Fraction, dy: Fraction, bits: int = DEFAULT_BITS) -> CertInterval:
    """Certified direction angle of a nonzero vector, reduced to [0, pi)."""
    if dx == 0 and dy == 0:
        raise DegenerateSegment("direction of a zero vector")
    if dx == 0:
        return pi_interval(bits) * Fraction(1, 2)
    theta = interval_atan(Fraction(dy, dx), bits)
    if dy == 0:
        return CertInterval.from_rational(0, bits)
    if Fraction(dy, dx) > 0:
        return theta
    return theta + pi_interval(bits)
