"""Convex-hull structure of attractor approximations.

Four instruments built on cylinder-center clouds:

* ``hull_census`` — per-depth hulls with edge-direction bookkeeping;
  stabilization of the (merged) vertex count and direction set over several
  consecutive depths is reported as polytope-hull evidence.
* ``edge_directions_match`` — checks that every sufficiently long hull edge
  points along an integer multiple of a given rotation angle (mod pi).
* ``gamma_estimate`` — seeded empirical lower estimate of the ratio
  dist(x, boundary of hull) / dist(x, near-boundary attractor points).
* ``cuts_well_disk`` — certifies whether a disk meets the hull boundary of
  one cylinder in a single edge with a small tangent-direction spread.

All verdicts are statements about the finite clouds together with their
certified Hausdorff slack, which every result carries; predicates on the
rational cloud data are exact.  Hulls of snapped (inexact-rotation) clouds
can split a straight support chain into micro-edges whose directions agree
to far better than any geometric feature; consecutive edges whose
directions agree within ``merge_tol`` are therefore merged before counting
vertices, and the merged chords are what the census and the disk predicate
reason about.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence

from .errors import NoMatch, NotPolytopeRegime
from .geometry2d import (
    Ball,
    Point,
    Polygon,
    convex_hull,
    cross,
    dist_sq,
    direction_angle_mod_pi,
    point_segment_dist_sq,
)
from .ifs_core import DEFAULT_NODE_BUDGET, IFS, Word, cloud_at_depth
from .precision import (
    DEFAULT_BITS,
    AngleRep,
    CertInterval,
    pi_interval,
    rational_sqrt_bounds,
)

DEFAULT_DIRECTION_TOL = Fraction(1, 10**6)

# depths over which count and directions must agree to call the census stable
STABLE_RUN = 3

_PI_MID = pi_interval(128).midpoint()


# ----------------------------------------------------------- angle helpers


def _circ_dist_mod_pi(a: Fraction, b: Fraction) -> Fraction:
    """Circular distance of two direction angles modulo pi (midpoint math)."""
    d = abs(a - b) % _PI_MID
    return min(d, _PI_MID - d)


def _circular_residual_hi(
    e: tuple[Fraction, Fraction], t: tuple[Fraction, Fraction], pi_lohi: tuple[Fraction, Fraction]
) -> Fraction:
    """Certified upper bound on the mod-pi circular distance of two enclosures.

    Reduces the difference interval by the integer multiple of pi nearest its
    midpoint; that multiple can only overestimate the circular distance, so
    the returned bound stays valid.
    """
    plo, phi = pi_lohi
    d_lo, d_hi = e[0] - t[1], e[1] - t[0]
    n = round((d_lo + d_hi) / (plo + phi))
    if n >= 0:
        s_lo, s_hi = d_lo - n * phi, d_hi - n * plo
    else:
        s_lo, s_hi = d_lo - n * plo, d_hi - n * phi
    if s_lo >= 0:
        return s_hi
    if s_hi <= 0:
        return -s_lo
    return max(-s_lo, s_hi)


# ----------------------------------------------------------- merged hulls


def _direction_mid(a: Point, b: Point, bits: int) -> Fraction:
    return direction_angle_mod_pi(b[0] - a[0], b[1] - a[1], bits).midpoint()


def _merged_chords(
    hull: Polygon, merge_tol: Fraction, bits: int
) -> tuple[tuple[Point, ...], tuple[tuple[Point, Point], ...]]:
    """Effective vertices and chord edges after merging like-direction runs.

    Consecutive hull edges whose directions agree within ``merge_tol``
    (circularly mod pi) collapse into the chord from the first to the last
    endpoint of the run.  Exact-arithmetic hulls already elide collinear
    points, so merging is a no-op there unless distinct features genuinely
    fall within the tolerance.
    """
    verts = hull.vertices
    edges = hull.edges()
    if len(verts) <= 2:
        return verts, edges
    n = len(edges)
    mids = [_direction_mid(a, b, bits) for a, b in edges]
    breaks = [
        i for i in range(n) if _circ_dist_mod_pi(mids[i], mids[(i - 1) % n]) > merge_tol
    ]
    if not breaks:
        # every edge points the same way: the polygon is a sliver, keep its
        # extreme pair
        lo, hi = min(verts), max(verts)
        return (lo, hi), ((lo, hi),)
    effective = tuple(verts[i] for i in breaks)
    m = len(effective)
    if m == 2:
        return effective, ((effective[0], effective[1]),)
    chords = tuple((effective[i], effective[(i + 1) % m]) for i in range(m))
    return effective, chords


# ---------------------------------------------------------------- census


@dataclass(frozen=True)
class DepthRecord:
    """Hull bookkeeping for one cloud depth.

    ``vertex_count`` and ``directions`` describe the merged hull;
    ``displacement`` is a certified upper bound on the two-sided vertex shift
    against the previous depth's merged vertices (None on the first record).
    """

    depth: int
    vertex_count: int
    raw_vertex_count: int
    directions: tuple[CertInterval, ...]
    displacement: Optional[Fraction]
    slack: Fraction
    hull: Polygon
    effective_vertices: tuple[Point, ...]
    chords: tuple[tuple[Point, Point], ...]


@dataclass(frozen=True)
class HullCensus:
    """Per-depth hull records plus the stabilization verdict."""

    records: tuple[DepthRecord, ...]
    stabilized: bool
    stable_from: Optional[int]
    direction_tol: Fraction

    def counts(self) -> tuple[int, ...]:
        return tuple(rec.vertex_count for rec in self.records)


def _vertex_shift(prev: Sequence[Point], cur: Sequence[Point]) -> Fraction:
    worst = Fraction(0)
    for side_a, side_b in ((prev, cur), (cur, prev)):
        for p in side_a:
            worst = max(worst, min(dist_sq(p, q) for q in side_b))
    return rational_sqrt_bounds(worst)[1]


def _directions_agree(a: DepthRecord, b: DepthRecord, tol: Fraction) -> bool:
    if len(a.directions) != len(b.directions):
        return False
    mids_a = [iv.midpoint() for iv in a.directions]
    mids_b = [iv.midpoint() for iv in b.directions]
    return all(
        any(_circ_dist_mod_pi(x, y) <= tol for y in mids_b) for x in mids_a
    ) and all(any(_circ_dist_mod_pi(x, y) <= tol for x in mids_a) for y in mids_b)


def hull_census(
    ifs: IFS,
    max_depth: int,
    budget: int = DEFAULT_NODE_BUDGET,
    bits: int = DEFAULT_BITS,
    direction_tol: Fraction = DEFAULT_DIRECTION_TOL,
) -> HullCensus:
    """Hulls of the depth-1..max_depth clouds with stabilization detection.

    The census is polytope-hull *evidence*: it reports that the merged vertex
    count and direction set agreed (pairwise-consecutively, within
    ``direction_tol``) over the last ``STABLE_RUN`` or more depths, it does
    not prove the limit hull is a polygon.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    direction_tol = Fraction(direction_tol)
    records: list[DepthRecord] = []
    prev_effective: Optional[tuple[Point, ...]] = None
    for depth in range(1, max_depth + 1):
        cloud = cloud_at_depth(ifs, depth, budget=budget, bits=bits)
        hull = convex_hull(cloud.points())
        effective, chords = _merged_chords(hull, direction_tol, bits)
        directions = tuple(
            sorted(
                (direction_angle_mod_pi(b[0] - a[0], b[1] - a[1], bits) for a, b in chords),
                key=lambda iv: iv.to_fractions(),
            )
        )
        displacement = None if prev_effective is None else _vertex_shift(prev_effective, effective)
        records.append(
            DepthRecord(
                depth=depth,
                vertex_count=len(effective),
                raw_vertex_count=hull.vertex_count,
                directions=directions,
                displacement=displacement,
                slack=cloud.slack,
                hull=hull,
                effective_vertices=effective,
                chords=chords,
            )
        )
        prev_effective = effective
    run = 1
    while run < len(records) and (
        records[-run - 1].vertex_count == records[-1].vertex_count
        and _directions_agree(records[-run - 1], records[-run], direction_tol)
    ):
        run += 1
    stabilized = run >= STABLE_RUN
    stable_from = records[-run].depth if stabilized else None
    return HullCensus(tuple(records), stabilized, stable_from, direction_tol)


# ------------------------------------------------------ direction matching


@dataclass(frozen=True)
class EdgeMatch:
    """One hull edge against the target direction family k*alpha mod pi."""

    edge: tuple[Point, Point]
    length_sq: Fraction
    direction: CertInterval
    matched_k: Optional[int]
    residual: Fraction


@dataclass(frozen=True)
class EdgeDirectionReport:
    depth: int
    alpha: AngleRep
    k_max: int
    tol: Fraction
    slack: Fraction
    matches: tuple[EdgeMatch, ...]
    short_edges: int

    def matched_ks(self) -> tuple[int, ...]:
        return tuple(m.matched_k for m in self.matches if m.matched_k is not None)


def edge_directions_match(
    ifs: IFS,
    depth: int,
    alpha: AngleRep,
    k_max: int,
    tol: Fraction,
    budget: int = DEFAULT_NODE_BUDGET,
    bits: int = DEFAULT_BITS,
) -> EdgeDirectionReport:
    """Match every long hull edge of the depth-d cloud to some k*alpha mod pi.

    An edge is *long* when its length exceeds twice the cloud slack (the
    uniform cylinder diameter bound); shorter edges are approximation
    artifacts and are only counted.  A match is certified: the upper bound of
    the circular mod-pi distance between the edge-direction enclosure and the
    k*alpha enclosure must not exceed ``tol``; the smallest such k wins.
    Raises ``NoMatch`` (carrying the report) if a long edge matches no k.
    """
    if depth < 3:
        raise ValueError("depth must be at least 3")
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    tol = Fraction(tol)
    if tol <= 0:
        raise ValueError("tol must be positive")
    cloud = cloud_at_depth(ifs, depth, budget=budget, bits=bits)
    hull = convex_hull(cloud.points())
    pi_lohi = pi_interval(bits).to_fractions()
    targets = [alpha.scale(k).to_interval(bits).to_fractions() for k in range(k_max + 1)]
    long_sq = (2 * cloud.slack) ** 2
    matches: list[EdgeMatch] = []
    short_edges = 0
    for a, b in hull.edges():
        length_sq = dist_sq(a, b)
        if length_sq <= long_sq:
            short_edges += 1
            continue
        direction = direction_angle_mod_pi(b[0] - a[0], b[1] - a[1], bits)
        e_lohi = direction.to_fractions()
        matched_k: Optional[int] = None
        best = None
        for k, t_lohi in enumerate(targets):
            res_hi = _circular_residual_hi(e_lohi, t_lohi, pi_lohi)
            if best is None or res_hi < best:
                best = res_hi
            if res_hi <= tol:
                matched_k = k
                best = res_hi
                break
        matches.append(EdgeMatch((a, b), length_sq, direction, matched_k, best))
    report = EdgeDirectionReport(
        depth, alpha, k_max, tol, cloud.slack, tuple(matches), short_edges
    )
    unmatched = [m for m in matches if m.matched_k is None]
    if unmatched:
        worst = max(m.residual for m in unmatched)
        raise NoMatch(
            f"{len(unmatched)} hull edge(s) match no multiple of alpha up to "
            f"k_max={k_max} within tol={float(tol):.3e} (closest residual "
            f"{float(worst):.3e})",
            report=report,
        )
    return report


# ----------------------------------------------------------- gamma ratio


@dataclass(frozen=True)
class GammaEstimate:
    """Empirical minimum of dist(x, hull boundary) / dist(x, boundary points).

    ``gamma_hat`` is a certified lower bound of the minimum ratio over the
    sampled cloud points; ``vacuous`` marks the degenerate case where every
    sample sat on the boundary set and no ratio constrained the estimate.
    """

    gamma_hat: Fraction
    samples: int
    witness: Optional[Point]
    depth: int
    slack: Fraction
    skipped: int
    vacuous: bool


def _boundary_dist_sq(x: Point, hull: Polygon) -> Fraction:
    edges = hull.edges()
    if not edges:
        return dist_sq(x, hull.vertices[0])
    return min(point_segment_dist_sq(x, a, b) for a, b in edges)


def gamma_estimate(
    ifs: IFS,
    depth: int,
    samples: int,
    seed: int,
    budget: int = DEFAULT_NODE_BUDGET,
    bits: int = DEFAULT_BITS,
) -> GammaEstimate:
    """Sampled lower estimate of the interior/boundary distance ratio.

    Requires the hull census up to ``depth`` to report stabilization
    (polytope-hull regime), else raises ``NotPolytopeRegime``.  The boundary
    set is the cloud points within twice the cloud slack of the hull
    boundary; samples falling in that set contribute no ratio (the 0/0
    convention) and are counted as skipped.  Deterministic given ``seed``.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    census = hull_census(ifs, depth, budget=budget, bits=bits)
    if not census.stabilized:
        raise NotPolytopeRegime(
            f"hull census up to depth {depth} has not stabilized: "
            f"vertex counts {census.counts()}"
        )
    cloud = cloud_at_depth(ifs, depth, budget=budget, bits=bits)
    pts = cloud.points()
    hull = convex_hull(pts)
    near_sq = (2 * cloud.slack) ** 2
    boundary = [p for p in pts if _boundary_dist_sq(p, hull) <= near_sq]
    rng = random.Random(seed)
    if samples >= len(pts):
        chosen = list(range(len(pts)))
    else:
        chosen = sorted(rng.sample(range(len(pts)), samples))
    gamma_hat: Optional[Fraction] = None
    witness: Optional[Point] = None
    skipped = 0
    for idx in chosen:
        x = pts[idx]
        den_sq = min(dist_sq(x, b) for b in boundary)
        if den_sq == 0:
            skipped += 1
            continue
        num_sq = _boundary_dist_sq(x, hull)
        ratio = rational_sqrt_bounds(num_sq)[0] / rational_sqrt_bounds(den_sq)[1]
        if gamma_hat is None or ratio < gamma_hat:
            gamma_hat, witness = ratio, x
    if gamma_hat is None:
        return GammaEstimate(Fraction(1), len(chosen), None, depth, cloud.slack, skipped, True)
    return GammaEstimate(gamma_hat, len(chosen), witness, depth, cloud.slack, skipped, False)


# ------------------------------------------------------------- well cuts


class CutsWellVerdict(Enum):
    YES = "yes"
    NO = "no"
    UNDECIDED = "undecided"


def _line_dist_sq(c: Point, a: Point, b: Point) -> Fraction:
    area2 = cross(a, b, c)
    return area2 * area2 / dist_sq(a, b)


def cuts_well_disk(
    ifs: IFS,
    I: Word,
    disk: Ball,
    eps: Fraction,
    depth: int = 6,
    budget: int = DEFAULT_NODE_BUDGET,
    bits: int = DEFAULT_BITS,
    merge_tol: Fraction = DEFAULT_DIRECTION_TOL,
) -> CutsWellVerdict:
    """Does the disk cut the hull boundary of cylinder ``I`` eps-well?

    YES certifies, on the depth-``depth`` cloud of the cylinder, that the
    disk meets exactly one (merged) hull edge, both edge endpoints stay
    outside the disk, and the central angle subtended by the cut chord —
    which equals the disk's tangent-direction difference at the chord
    endpoints — is at most ``eps``.  NO certifies an empty boundary
    intersection, a multi-edge intersection, or a tangent spread exceeding
    ``eps``; anything short of a certificate is UNDECIDED.
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    cloud = cloud_at_depth(ifs, depth, budget=budget, bits=bits, root_word=tuple(I))
    hull = convex_hull(cloud.points())
    _, chords = _merged_chords(hull, Fraction(merge_tol), bits)
    if not chords:
        return CutsWellVerdict.UNDECIDED
    c = (Fraction(disk.center[0]), Fraction(disk.center[1]))
    r_lo, r_hi = disk.radius.to_fractions()
    if r_hi < 0:
        raise ValueError("disk radius must be nonnegative")
    r_lo = max(r_lo, Fraction(0))
    rlo2, rhi2 = r_lo * r_lo, r_hi * r_hi
    meets: list[tuple[Point, Point]] = []
    grazes = 0
    for a, b in chords:
        d2 = point_segment_dist_sq(c, a, b)
        if d2 < rlo2:
            meets.append((a, b))
        elif d2 <= rhi2:
            grazes += 1
    if len(meets) >= 2:
        return CutsWellVerdict.NO
    if grazes:
        return CutsWellVerdict.UNDECIDED
    if not meets:
        return CutsWellVerdict.NO
    a, b = meets[0]
    end_a, end_b = dist_sq(a, c), dist_sq(b, c)
    if end_a < rlo2 or end_b < rlo2:
        # an intersection endpoint sits inside the open disk, where the
        # tangent-direction condition is ill-posed
        return CutsWellVerdict.NO
    if end_a <= rhi2 or end_b <= rhi2:
        return CutsWellVerdict.UNDECIDED
    line_d2 = _line_dist_sq(c, a, b)
    chord_sq_lo = 4 * (rlo2 - line_d2)
    chord_sq_hi = 4 * (rhi2 - line_d2)
    pi_lohi = pi_interval(bits).to_fractions()
    if eps >= pi_lohi[1]:
        return CutsWellVerdict.YES
    sin_lo, sin_hi = AngleRep.from_rational(eps / 2).sin(bits).to_fractions()
    sin_lo = max(sin_lo, Fraction(0))
    t_lo = 4 * rlo2 * sin_lo * sin_lo
    t_hi = 4 * rhi2 * sin_hi * sin_hi
    if chord_sq_hi <= t_lo:
        return CutsWellVerdict.YES
    if chord_sq_lo > t_hi:
        return CutsWellVerdict.NO
    return CutsWellVerdict.UNDECIDED
