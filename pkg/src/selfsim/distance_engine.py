"""Certified point-to-attractor distances, near sets, and criticality.

dist(x, K) is computed by best-first branch and bound over cylinder
enclosure balls; nearest-point sets, convex-hull criticality certificates,
segment scans, and the isolated-value check build on top of it.  All
bookkeeping stays in exact rational arithmetic (integer-square-root
brackets stand in for square roots), so every verdict is deterministic and
carries explicit tolerances.
"""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .errors import BudgetExceeded, OnAttractor
from .geometry2d import (
    HullPosition,
    Point,
    Polygon,
    convex_hull,
    dist_sq,
    dot,
    point_hull_dist_sq,
    point_in_hull,
    sub,
)
from .ifs_core import (
    IFS,
    Word,
    _exact_children,
    _interval_children,
    _snap,
    state_center,
    word_lex_key,
    word_state,
)
from .precision import DEFAULT_BITS, CertInterval, rational_sqrt_bounds

DEFAULT_EXPANSION_BUDGET = 500_000

# width of the integer-sqrt brackets used for ball bounds (2^-64 absolute)
_SQRT_BITS = 64

# eta ladder: levels per criticality call and shrink factor between levels
_ETA_LEVELS = 3
_ETA_SHRINK = 4


def _as_point(v) -> Point:
    return (Fraction(v[0]), Fraction(v[1]))


def _state_ball(
    state, anchor: Point, radius0: Fraction, exact: bool, trig_cache: dict, bits: int
) -> tuple[Point, Fraction]:
    """Rational center and certified radius of a composed state's cylinder ball."""
    center = state_center(state, anchor, exact, trig_cache, bits)
    if exact:
        return center, state[0] * radius0
    ix, iy = center
    cx, cy = _snap(ix.midpoint()), _snap(iy.midpoint())
    err = max(abs(cx - fx) for fx in ix.to_fractions()) + max(
        abs(cy - fy) for fy in iy.to_fractions()
    )
    return (cx, cy), state[0] * radius0 + err


def _ball_dist_bounds(x: Point, center: Point, radius: Fraction) -> tuple[Fraction, Fraction]:
    """Rational bounds on dist(x, S) for any nonempty S inside B(center, radius)."""
    lo, hi = rational_sqrt_bounds(dist_sq(x, center), _SQRT_BITS)
    lb = lo - radius
    return (lb if lb > 0 else Fraction(0)), hi + radius


# ------------------------------------------------------------- distances


@dataclass(frozen=True)
class DistanceResult:
    """Certified enclosure of dist(x, K) with the cylinders that realize it."""

    value: CertInterval
    witnesses: tuple[tuple[Word, Point], ...]
    expansions: int


def distance_to_attractor(
    ifs: IFS,
    x,
    eps,
    root_word: Word = (),
    budget: int = DEFAULT_EXPANSION_BUDGET,
    bits: int = DEFAULT_BITS,
) -> DistanceResult:
    """Best-first branch and bound for dist(x, K) to interval width <= eps.

    Cylinder balls enter a priority queue keyed by their rational
    distance lower bound (ties broken by lexicographic word order); a node
    is pruned when its lower bound exceeds the global upper bound.
    Geometric radius decay guarantees termination.  When ``root_word`` is
    given the search is restricted to that cylinder.
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = _as_point(x)
    root_word = tuple(root_word)
    exact = ifs.is_exact()
    anchor, radius0 = ifs.root_ball()
    trig_cache: dict = {}

    state = word_state(ifs, root_word, bits)
    center, radius = _state_ball(state, anchor, radius0, exact, trig_cache, bits)
    lb, ub = _ball_dist_bounds(x, center, radius)
    best_ub = ub
    heap = [(lb, word_lex_key(ifs, root_word), root_word, state, center)]
    expansions = 0

    while heap:
        lb, key, word, state, center = heapq.heappop(heap)
        if lb > best_ub:
            continue
        if best_ub - lb <= eps:
            witnesses = [(key, word, center)]
            witnesses += [(k, w, c) for (l, k, w, s, c) in heap if l <= best_ub]
            witnesses.sort(key=lambda item: item[0])
            return DistanceResult(
                value=CertInterval.from_endpoints(lb, best_ub, bits),
                witnesses=tuple((w, c) for _, w, c in witnesses),
                expansions=expansions,
            )
        expansions += 1
        if expansions > budget:
            raise BudgetExceeded(
                f"distance search expanded {expansions} cylinders", spent=expansions, budget=budget
            )
        children = (
            _exact_children(ifs, state)
            if exact
            else _interval_children(ifs, state, trig_cache, bits)
        )
        for symbol, child in children:
            c_center, c_radius = _state_ball(child, anchor, radius0, exact, trig_cache, bits)
            c_lb, c_ub = _ball_dist_bounds(x, c_center, c_radius)
            # the parent's bound covers the nested child ball, so bounds stay
            # monotone along refinement despite sqrt-bracket slop
            if c_lb < lb:
                c_lb = lb
            if c_ub < best_ub:
                best_ub = c_ub
            if c_lb <= best_ub:
                heapq.heappush(
                    heap,
                    (c_lb, key + (ifs.label_index(symbol),), word + (symbol,), child, c_center),
                )
    raise RuntimeError("distance frontier exhausted without certification")


# -------------------------------------------------------------- near sets


def near_set(
    ifs: IFS,
    x,
    eta,
    eps,
    budget: int = DEFAULT_EXPANSION_BUDGET,
    bits: int = DEFAULT_BITS,
) -> tuple[Point, ...]:
    """Representative points of all cylinders meeting B(x, dist + eta).

    Cylinders are refined until their diameter is at most eps, so every
    true nearest point of the attractor lies within eta + eps of the
    returned set.  Inclusion is conservative: a cylinder is kept whenever
    it cannot be certified to miss the ball.
    """
    eta, eps = Fraction(eta), Fraction(eps)
    if not eta > eps > 0:
        raise ValueError("need eta > eps > 0")
    dres = distance_to_attractor(ifs, x, eps / 2, budget=budget, bits=bits)
    return _near_points(ifs, _as_point(x), eta, eps, dres, budget, bits)


def _near_points(
    ifs: IFS,
    x: Point,
    eta: Fraction,
    eps: Fraction,
    dres: DistanceResult,
    budget: int,
    bits: int,
) -> tuple[Point, ...]:
    cutoff = dres.value.to_fractions()[1] + eta
    exact = ifs.is_exact()
    anchor, radius0 = ifs.root_ball()
    trig_cache: dict = {}
    stack = [word_state(ifs, (), bits)]
    points = set()
    visited = 0
    while stack:
        state = stack.pop()
        visited += 1
        if visited > budget:
            raise BudgetExceeded(
                f"near-set refinement visited {visited} cylinders", spent=visited, budget=budget
            )
        center, radius = _state_ball(state, anchor, radius0, exact, trig_cache, bits)
        lb, _ = _ball_dist_bounds(x, center, radius)
        if lb > cutoff:
            continue
        if 2 * radius <= eps:
            points.add(center)
            continue
        children = (
            _exact_children(ifs, state)
            if exact
            else _interval_children(ifs, state, trig_cache, bits)
        )
        stack.extend(child for _, child in children)
    return tuple(sorted(points))


@dataclass(frozen=True)
class Cluster:
    """A merged group of near-set points with its exact centroid."""

    centroid: Point
    members: tuple[Point, ...]


def cluster_points(points: Sequence[Point], radius) -> tuple[Cluster, ...]:
    """Merge points into clusters by single-linkage at the given radius.

    Linkage compares exact squared distances, so the partition is
    deterministic; each cluster carries the exact mean of its members.
    """
    pts = sorted(points)
    r2 = Fraction(radius) ** 2
    parent = list(range(len(pts)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if dist_sq(pts[i], pts[j]) <= r2:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri
    groups: dict[int, list[Point]] = {}
    for i in range(len(pts)):
        groups.setdefault(find(i), []).append(pts[i])
    clusters = []
    for members in groups.values():
        n = len(members)
        cx = sum((p[0] for p in members), Fraction(0)) / n
        cy = sum((p[1] for p in members), Fraction(0)) / n
        clusters.append(Cluster(centroid=(cx, cy), members=tuple(members)))
    return tuple(sorted(clusters, key=lambda c: c.centroid))


# ------------------------------------------------------------ criticality


class CriticalityStatus(enum.Enum):
    CRITICAL = "CRITICAL"
    NOT_CRITICAL = "NOT_CRITICAL"
    UNDECIDED = "UNDECIDED"


@dataclass(frozen=True)
class CriticalityVerdict:
    """Three-valued verdict with an explicit certificate and tolerances.

    CRITICAL carries convex coefficients over near-set witness points that
    reconstruct x exactly; NOT_CRITICAL carries a half-plane
    ``{y : (y - anchor) . normal >= |normal|^2}`` that contains every
    near-set point while x sits on its boundary line, with clearance
    exceeding the near-set slack eta + eps.
    """

    status: CriticalityStatus
    point: Point
    distance: CertInterval
    coefficients: Optional[tuple[tuple[Point, Fraction], ...]]
    separator: Optional[tuple[Point, Point]]
    eta: Fraction
    eps: Fraction


def _closest_hull_point(x: Point, hull: Polygon) -> Point:
    """Exact nearest point of a convex hull to x (lexicographic tie-break)."""
    verts = hull.vertices
    if len(verts) == 1:
        return verts[0]
    edges = hull.edges()
    best: Optional[tuple[Fraction, Point]] = None
    for a, b in edges:
        ab2 = dist_sq(a, b)
        t = dot(sub(x, a), sub(b, a)) / ab2
        if t <= 0:
            foot = a
        elif t >= 1:
            foot = b
        else:
            foot = (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
        cand = (dist_sq(x, foot), foot)
        if best is None or cand < best:
            best = cand
    return best[1]


def criticality(
    ifs: IFS,
    x,
    eps,
    budget: int = DEFAULT_EXPANSION_BUDGET,
    bits: int = DEFAULT_BITS,
) -> CriticalityVerdict:
    """Decide whether x lies in the convex hull of its nearest attractor points.

    The near set is approximated at a ladder of eta tolerances shrinking
    from dist/4 down to a floor tied to eps.  CRITICAL requires x to sit
    inside the hull of merged near-set clusters with margin 2*(eta + eps)
    at every level, with an exact convex-combination certificate;
    NOT_CRITICAL requires x to clear the hull of raw near-set points by
    more than eta + eps at some level.  Anything else is UNDECIDED at the
    tolerances used.  Raises OnAttractor when no positive distance lower
    bound can be certified.
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    verdict, _ = _criticality_full(ifs, _as_point(x), eps, budget, bits)
    return verdict


def _criticality_full(
    ifs: IFS, x: Point, eps: Fraction, budget: int, bits: int
) -> tuple[CriticalityVerdict, tuple[Point, ...]]:
    """Criticality verdict plus the raw near points from the finest level used."""
    dres = distance_to_attractor(ifs, x, eps / 2, budget=budget, bits=bits)
    d_lo = dres.value.to_fractions()[0]
    if d_lo == 0:
        for finer in (eps / 8, eps / 32):
            dres = distance_to_attractor(ifs, x, finer, budget=budget, bits=bits)
            d_lo = dres.value.to_fractions()[0]
            if d_lo > 0:
                break
        if d_lo == 0:
            hi = dres.value.to_fractions()[1]
            raise OnAttractor(f"point {x} is within {hi} of the attractor; need dist > 0")

    floor = 4 * eps
    etas = []
    for level in range(_ETA_LEVELS):
        eta = d_lo / 4 / _ETA_SHRINK**level
        if eta < floor:
            eta = floor
        if not etas or eta != etas[-1]:
            etas.append(eta)

    inside_all = True
    coefficients = None
    raw: tuple[Point, ...] = ()
    eta_used, eps_used = etas[0], etas[0] / 8
    for eta in etas:
        eps_near = eta / 8
        raw = _near_points(ifs, x, eta, eps_near, dres, budget, bits)
        eta_used, eps_used = eta, eps_near
        slack = eta + eps_near
        hull_raw = convex_hull(raw)
        if point_hull_dist_sq(x, hull_raw) > slack * slack:
            anchor = _closest_hull_point(x, hull_raw)
            normal = sub(anchor, x)
            verdict = CriticalityVerdict(
                status=CriticalityStatus.NOT_CRITICAL,
                point=x,
                distance=dres.value,
                coefficients=None,
                separator=(x, normal),
                eta=eta,
                eps=eps_near,
            )
            return verdict, raw
        clusters = cluster_points(raw, 2 * eps_near)
        hull_merged = convex_hull(tuple(c.centroid for c in clusters))
        placed = point_in_hull(x, hull_merged, margin=2 * slack)
        if placed.status is HullPosition.INSIDE:
            coefficients = placed.coefficients
        else:
            inside_all = False
    if inside_all and coefficients is not None:
        status = CriticalityStatus.CRITICAL
    else:
        status = CriticalityStatus.UNDECIDED
        coefficients = None
    verdict = CriticalityVerdict(
        status=status,
        point=x,
        distance=dres.value,
        coefficients=coefficients,
        separator=None,
        eta=eta_used,
        eps=eps_used,
    )
    return verdict, raw


# ------------------------------------------------------------------ scans


@dataclass(frozen=True)
class ScanEntry:
    """One reportable sample of a segment scan (CRITICAL or UNDECIDED)."""

    point: Point
    value: CertInterval
    status: CriticalityStatus
    refined: bool = False


def _side_of(x: Point, reps: Sequence[Point], direction: Point) -> Optional[int]:
    """Which side of x (along direction) the nearest near-set points lie on.

    -1 means the closest representative projects negatively, +1 positively,
    0 an exact two-sided tie; None when nothing projects off zero.
    """
    left = None
    right = None
    for r in reps:
        proj = dot(sub(r, x), direction)
        if proj == 0:
            continue
        d2 = dist_sq(x, r)
        if proj < 0:
            left = d2 if left is None or d2 < left else left
        else:
            right = d2 if right is None or d2 < right else right
    if left is not None and right is not None:
        if left == right:
            return 0
        return -1 if left < right else 1
    if left is not None:
        return -1
    if right is not None:
        return 1
    return None


def critical_scan(
    ifs: IFS,
    segment: tuple,
    steps: int,
    eps,
    budget: int = DEFAULT_EXPANSION_BUDGET,
    bits: int = DEFAULT_BITS,
    refine_brackets: bool = True,
    max_bisect: int = 24,
) -> list[ScanEntry]:
    """Criticality sweep over equally spaced samples of a segment.

    Only CRITICAL and UNDECIDED samples are reported, each with its
    certified distance value.  When the nearest-point side flips between
    two adjacent NOT_CRITICAL samples, the bracket is bisected (attractor
    hits abandon it), which pins gap-midpoint critical points that the
    grid itself misses.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    a, b = _as_point(segment[0]), _as_point(segment[1])
    direction = sub(b, a)

    def at(t: Fraction) -> Point:
        return (a[0] + t * direction[0], a[1] + t * direction[1])

    def evaluate(t: Fraction):
        point = at(t)
        try:
            verdict, reps = _criticality_full(ifs, point, eps, budget, bits)
        except OnAttractor:
            return None, None
        return verdict, _side_of(point, reps, direction)

    found: list[tuple[Fraction, ScanEntry]] = []
    sides: list[Optional[int]] = []
    params = [Fraction(i, steps - 1) for i in range(steps)]
    for t in params:
        verdict, side = evaluate(t)
        sides.append(side)
        if verdict is not None and verdict.status is not CriticalityStatus.NOT_CRITICAL:
            found.append(
                (t, ScanEntry(point=verdict.point, value=verdict.distance, status=verdict.status))
            )

    if refine_brackets:
        for i in range(steps - 1):
            s_lo, s_hi = sides[i], sides[i + 1]
            if s_lo is None or s_hi is None or s_lo * s_hi >= 0:
                continue
            t_lo, t_hi = params[i], params[i + 1]
            for _ in range(max_bisect):
                t_mid = (t_lo + t_hi) / 2
                verdict, side = evaluate(t_mid)
                if verdict is None:
                    break
                if verdict.status is not CriticalityStatus.NOT_CRITICAL:
                    found.append(
                        (
                            t_mid,
                            ScanEntry(
                                point=verdict.point,
                                value=verdict.distance,
                                status=verdict.status,
                                refined=True,
                            ),
                        )
                    )
                    break
                if side == 0 or side is None:
                    break
                if side == s_lo:
                    t_lo = t_mid
                else:
                    t_hi = t_mid
    found.sort(key=lambda item: item[0])
    return [entry for _, entry in found]


# -------------------------------------------------------------- isolation


class IsolationStatus(enum.Enum):
    ISOLATED_BELOW = "ISOLATED_BELOW"
    VIOLATION = "VIOLATION"
    UNDECIDED = "UNDECIDED"


def isolation_check(
    values: Sequence[CertInterval],
    r: CertInterval,
    resolution: Fraction = Fraction(1, 2**20),
) -> IsolationStatus:
    """Is r certifiably isolated from below among the given values?

    Everything is resolved at the stated resolution: values within one
    resolution of r (including values indistinguishable from r itself) are
    treated as sitting at r.  ISOLATED_BELOW when every value certifiably
    below r keeps a gap larger than the resolution (vacuously when none
    are below).  VIOLATION when at least three certifiably increasing
    values approach r from below to within the resolution.  A value that
    straddles r by more than the resolution is ambiguous: UNDECIDED.
    """
    lows = [v.to_fractions()[0] for v in values]
    if lows != sorted(lows):
        raise ValueError("values must be sorted by lower bound")
    r_lo, r_hi = r.to_fractions()
    below = []
    for v in values:
        v_lo, v_hi = v.to_fractions()
        if v_hi < r_lo:
            below.append((v_lo, v_hi))
        elif v_lo >= r_lo - resolution:
            continue  # within one resolution of r: treated as at r, not below
        else:
            return IsolationStatus.UNDECIDED
    if not below:
        return IsolationStatus.ISOLATED_BELOW
    gap = r_lo - max(hi for _, hi in below)
    if gap > resolution:
        return IsolationStatus.ISOLATED_BELOW
    run = 1
    best_run = 1
    for prev, cur in zip(below, below[1:]):
        run = run + 1 if prev[1] < cur[0] else 1
        best_run = max(best_run, run)
    if best_run >= 3:
        return IsolationStatus.VIOLATION
    return IsolationStatus.UNDECIDED
