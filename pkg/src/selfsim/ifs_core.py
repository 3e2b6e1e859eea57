"""Planar iterated function systems of similarities.

Maps are ``x -> ratio * R(angle) * F^reflect * x + translation`` with exact
rational ratios/translations and exact ``AngleRep`` rotations.  Word
compositions keep their translation as a symbolic sum of rotated rational
vectors, so composition is exact even for irrational rotation angles;
numeric coordinates appear only when a map is applied.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Optional, Sequence

from .errors import BudgetExceeded, ConfigError, UnknownSymbol
from .geometry2d import Point, convex_hull, dist_sq
from .precision import DEFAULT_BITS, AngleRep, CertInterval, rational_sqrt_bounds

Word = tuple
IntervalPoint = tuple[CertInterval, CertInterval]

DEFAULT_NODE_BUDGET = 10_000_000

# dyadic grid used to snap inexact cylinder centers to small rationals
_SNAP_BITS = 80


def _rotate_exact(trig: tuple[int, int], flip: bool, pt: Point) -> Point:
    x, y = pt
    if flip:
        y = -y
    c, s = trig
    return (c * x - s * y, s * x + c * y)


@dataclass(frozen=True)
class Similarity:
    """One contracting similarity ``x -> ratio * R * x + translation``."""

    ratio: Fraction
    rotation: AngleRep
    reflect: bool
    translation: Point

    def __post_init__(self):
        if not 0 < self.ratio < 1:
            raise ConfigError(f"similarity ratio must be in (0,1), got {self.ratio}")


@dataclass(frozen=True)
class TransTerm:
    """One summand ``scale * R(angle) * F^flip * vec`` of a composed translation."""

    scale: Fraction
    angle: AngleRep
    flip: bool
    vec: Point


@dataclass(frozen=True)
class WordMap:
    """Exact composition of similarities along a word."""

    ratio: Fraction
    rotation: AngleRep
    reflect: bool
    terms: tuple[TransTerm, ...]

    @classmethod
    def identity(cls) -> "WordMap":
        return cls(Fraction(1), AngleRep(), False, ())

    @classmethod
    def from_similarity(cls, sim: Similarity) -> "WordMap":
        term = TransTerm(Fraction(1), AngleRep(), False, sim.translation)
        return cls(sim.ratio, sim.rotation, sim.reflect, (term,))

    def compose(self, other: "WordMap") -> "WordMap":
        sign = -1 if self.reflect else 1
        lifted = tuple(
            TransTerm(
                self.ratio * t.scale,
                self.rotation + t.angle.scale(sign),
                self.reflect != t.flip,
                t.vec,
            )
            for t in other.terms
        )
        return WordMap(
            self.ratio * other.ratio,
            self.rotation + other.rotation.scale(sign),
            self.reflect != other.reflect,
            self.terms + lifted,
        )

    def is_exact(self) -> bool:
        if self.rotation.exact_trig() is None:
            return False
        return all(t.angle.exact_trig() is not None for t in self.terms)

    def translation_exact(self) -> Point:
        x, y = Fraction(0), Fraction(0)
        for t in self.terms:
            trig = t.angle.exact_trig()
            if trig is None:
                raise ValueError("translation is not exactly evaluable at this rotation")
            vx, vy = _rotate_exact(trig, t.flip, t.vec)
            x += t.scale * vx
            y += t.scale * vy
        return (x, y)

    def translation_interval(self, bits: int = DEFAULT_BITS) -> IntervalPoint:
        x = CertInterval.from_rational(0, bits)
        y = CertInterval.from_rational(0, bits)
        trig_cache: dict = {}
        for t in self.terms:
            key = t.angle.normalized()
            if key not in trig_cache:
                trig_cache[key] = (key.cos(bits), key.sin(bits))
            c, s = trig_cache[key]
            vx, vy = t.vec
            if t.flip:
                vy = -vy
            x = x + (c * vx - s * vy) * t.scale
            y = y + (s * vx + c * vy) * t.scale
        return (x, y)

    def apply_exact(self, pt: Point) -> Point:
        trig = self.rotation.exact_trig()
        if trig is None:
            raise ValueError("rotation is not an exact quarter turn")
        rx, ry = _rotate_exact(trig, self.reflect, pt)
        tx, ty = self.translation_exact()
        return (self.ratio * rx + tx, self.ratio * ry + ty)

    def apply_interval(self, pt: Point, bits: int = DEFAULT_BITS) -> IntervalPoint:
        c = self.rotation.cos(bits)
        s = self.rotation.sin(bits)
        x, y = pt
        if self.reflect:
            y = -y
        tx, ty = self.translation_interval(bits)
        return (
            (c * x - s * y) * self.ratio + tx,
            (s * x + c * y) * self.ratio + ty,
        )


@dataclass(frozen=True)
class IFS:
    """Ordered list of similarities with distinct symbolic labels."""

    maps: tuple[Similarity, ...]
    labels: tuple

    def __post_init__(self):
        if len(self.maps) < 2:
            raise ConfigError("an IFS needs at least two maps")
        if len(self.labels) != len(self.maps):
            raise ConfigError("labels and maps must have matching lengths")
        if len(set(self.labels)) != len(self.labels):
            raise ConfigError("labels must be distinct")

    def map_for(self, symbol) -> Similarity:
        try:
            return self.maps[self.labels.index(symbol)]
        except ValueError:
            raise UnknownSymbol(f"symbol {symbol!r} is not an IFS label") from None

    def label_index(self, symbol) -> int:
        try:
            return self.labels.index(symbol)
        except ValueError:
            raise UnknownSymbol(f"symbol {symbol!r} is not an IFS label") from None

    def max_ratio(self) -> Fraction:
        return max(m.ratio for m in self.maps)

    def root_ball(self) -> tuple[Point, Fraction]:
        """Ball certifiably containing the attractor, with rational data."""
        return _root_ball(self)

    def is_exact(self) -> bool:
        return all(m.rotation.exact_trig() is not None for m in self.maps)


def _mean_map_center(maps: tuple[Similarity, ...]) -> Optional[Point]:
    """Exact fixed point of the averaged similarity, when rotations are exact.

    The average of the maps is an affine contraction whose fixed point is a
    symmetry-respecting anchor: any relabeling symmetry of the IFS fixes it,
    so enclosure balls centered here inherit the attractor's symmetries.
    """
    n = len(maps)
    a11 = a12 = a21 = a22 = Fraction(0)
    bx = by = Fraction(0)
    for m in maps:
        trig = m.rotation.exact_trig()
        if trig is None:
            return None
        c, s = trig
        f = -1 if m.reflect else 1
        a11 += m.ratio * c
        a12 += m.ratio * (-s) * f
        a21 += m.ratio * s
        a22 += m.ratio * c * f
        bx += m.translation[0]
        by += m.translation[1]
    m11, m12 = 1 - a11 / n, -a12 / n
    m21, m22 = -a21 / n, 1 - a22 / n
    det = m11 * m22 - m12 * m21
    if det == 0:
        return None
    bx, by = bx / n, by / n
    return ((m22 * bx - m12 * by) / det, (m11 * by - m21 * bx) / det)


@lru_cache(maxsize=256)
def _root_ball(ifs: IFS) -> tuple[Point, Fraction]:
    """Smallest of two certified enclosure balls for the attractor.

    Fallback: origin-centered with radius max_i(|vx|+|vy|) / (1 - max ratio)
    (the L1 norm dominates the Euclidean norm).  For exact-rotation systems
    a ball centered at the mean-map fixed point c with radius
    max_i|phi_i(c) - c| / (1 - max ratio) is also certified -- it is mapped
    into itself by every phi_i -- and is usually much tighter.
    """
    top = max(abs(m.translation[0]) + abs(m.translation[1]) for m in ifs.maps)
    shrink = 1 - ifs.max_ratio()
    best = ((Fraction(0), Fraction(0)), top / shrink)
    center = _mean_map_center(ifs.maps) if ifs.is_exact() else None
    if center is not None:
        dev = Fraction(0)
        for m in ifs.maps:
            rx, ry = _rotate_exact(m.rotation.exact_trig(), m.reflect, center)
            image = (m.ratio * rx + m.translation[0], m.ratio * ry + m.translation[1])
            dev = max(dev, rational_sqrt_bounds(dist_sq(image, center))[1])
        if dev / shrink < best[1]:
            best = (center, dev / shrink)
    return best


# ------------------------------------------------------------------ words


def word_concat(left: Word, right: Word) -> Word:
    return tuple(left) + tuple(right)


def word_is_prefix(prefix: Word, word: Word) -> bool:
    return len(prefix) <= len(word) and tuple(word[: len(prefix)]) == tuple(prefix)


def word_lex_key(ifs: IFS, word: Word) -> tuple:
    return tuple(ifs.label_index(s) for s in word)


def word_lex_less(ifs: IFS, left: Word, right: Word) -> bool:
    """Strict lexicographic order induced by the IFS label order."""
    return word_lex_key(ifs, left) < word_lex_key(ifs, right)


def compose_word(ifs: IFS, word: Word) -> WordMap:
    """Exact composition of the maps named by ``word``, left to right."""
    composed = WordMap.identity()
    for symbol in word:
        composed = composed.compose(WordMap.from_similarity(ifs.map_for(symbol)))
    return composed


def word_ratio(ifs: IFS, word: Word) -> Fraction:
    ratio = Fraction(1)
    for symbol in word:
        ratio *= ifs.map_for(symbol).ratio
    return ratio


# ------------------------------------------------------------- cylinders


@dataclass(frozen=True)
class CylinderBall:
    """Certified enclosure of one cylinder set: ``|K_word - center| <= radius``.

    ``center`` is an interval point; ``center_exact`` is set when the center
    is an exact rational point (quarter-turn rotations all the way down).
    """

    word: Word
    center: IntervalPoint
    radius: Fraction
    center_exact: Optional[Point] = None

    def center_midpoint(self) -> Point:
        if self.center_exact is not None:
            return self.center_exact
        return (self.center[0].midpoint(), self.center[1].midpoint())


def cylinder_ball(
    ifs: IFS,
    word: Word,
    root: Optional[tuple[Point, Fraction]] = None,
    bits: int = DEFAULT_BITS,
) -> CylinderBall:
    """Image of a root enclosure ball under the word's composed map."""
    center0, radius0 = root if root is not None else ifs.root_ball()
    composed = compose_word(ifs, word)
    radius = composed.ratio * radius0
    if composed.is_exact():
        exact = composed.apply_exact(center0)
        iv = (
            CertInterval.from_rational(exact[0], bits),
            CertInterval.from_rational(exact[1], bits),
        )
        return CylinderBall(tuple(word), iv, radius, center_exact=exact)
    return CylinderBall(tuple(word), composed.apply_interval(center0, bits), radius)


def _snap(value: Fraction) -> Fraction:
    return Fraction(round(value * (1 << _SNAP_BITS)), 1 << _SNAP_BITS)


@dataclass(frozen=True)
class Cloud:
    """Finite rational point set within certified Hausdorff slack of K."""

    entries: tuple[tuple[Word, Point], ...]
    slack: Fraction
    depth: int

    def points(self) -> tuple[Point, ...]:
        return tuple(sorted({pt for _, pt in self.entries}))


def _uniform_depth(ifs: IFS, eps: Fraction) -> int:
    _, radius = ifs.root_ball()
    r = ifs.max_ratio()
    depth, spread = 0, 2 * radius
    while spread > eps:
        depth += 1
        spread *= r
    return depth


def _exact_children(ifs: IFS, state):
    ratio, rot, flip, trans = state
    trig = rot.exact_trig()
    sign = -1 if flip else 1
    for symbol, sim in zip(ifs.labels, ifs.maps):
        vx, vy = _rotate_exact(trig, flip, sim.translation)
        yield symbol, (
            ratio * sim.ratio,
            rot + sim.rotation.scale(sign),
            flip != sim.reflect,
            (trans[0] + ratio * vx, trans[1] + ratio * vy),
        )


def _interval_children(ifs: IFS, state, trig_cache, bits):
    ratio, rot, flip, trans = state
    key = rot.normalized()
    if key not in trig_cache:
        trig_cache[key] = (key.cos(bits), key.sin(bits))
    c, s = trig_cache[key]
    sign = -1 if flip else 1
    for symbol, sim in zip(ifs.labels, ifs.maps):
        vx, vy = sim.translation
        if flip:
            vy = -vy
        yield symbol, (
            ratio * sim.ratio,
            rot + sim.rotation.scale(sign),
            flip != sim.reflect,
            (trans[0] + (c * vx - s * vy) * ratio, trans[1] + (s * vx + c * vy) * ratio),
        )


def state_center(state, anchor: Point, exact: bool, trig_cache: dict, bits: int = DEFAULT_BITS):
    """Image of the root anchor under a composed state: the cylinder ball center.

    Returns an exact Point on the quarter-turn path, an interval point
    otherwise.
    """
    ratio, rot, flip, trans = state
    if exact:
        rx, ry = _rotate_exact(rot.exact_trig(), flip, anchor)
        return (trans[0] + ratio * rx, trans[1] + ratio * ry)
    key = rot.normalized()
    if key not in trig_cache:
        trig_cache[key] = (key.cos(bits), key.sin(bits))
    c, s = trig_cache[key]
    x, y = anchor
    if flip:
        y = -y
    return (trans[0] + (c * x - s * y) * ratio, trans[1] + (s * x + c * y) * ratio)


def word_state(ifs: IFS, word: Word = (), bits: int = DEFAULT_BITS):
    """Composed (ratio, rotation, reflect, translation) state of ``word``.

    The translation is an exact Point for quarter-turn systems, an interval
    point otherwise.
    """
    if not word:
        zero = Fraction(0)
        if ifs.is_exact():
            return (Fraction(1), AngleRep(), False, (zero, zero))
        z = CertInterval.from_rational(0, bits)
        return (Fraction(1), AngleRep(), False, (z, z))
    composed = compose_word(ifs, word)
    if ifs.is_exact():
        trans = composed.translation_exact()
    else:
        trans = composed.translation_interval(bits)
    return (composed.ratio, composed.rotation, composed.reflect, trans)


def iterate_cylinders(ifs: IFS, depth: int, bits: int = DEFAULT_BITS, root_word: Word = ()):
    """Yield (word, composed-state) ``depth`` levels below ``root_word``.

    Words are absolute (``root_word`` plus ``depth`` symbols), generated in
    label order.  The state is (ratio, rotation, reflect, translation);
    translation is an exact Point for quarter-turn systems, an interval
    point otherwise.  Equivalent to compose_word per word, but incremental.
    """
    exact = ifs.is_exact()
    root = word_state(ifs, root_word, bits)
    stop = len(root_word) + depth
    trig_cache: dict = {}

    def walk(word, state):
        if len(word) == stop:
            yield word, state
            return
        children = (
            _exact_children(ifs, state)
            if exact
            else _interval_children(ifs, state, trig_cache, bits)
        )
        for symbol, child in children:
            yield from walk(word + (symbol,), child)

    yield from walk(tuple(root_word), root)


def cloud_at_depth(
    ifs: IFS,
    depth: int,
    budget: int = DEFAULT_NODE_BUDGET,
    bits: int = DEFAULT_BITS,
    root_word: Word = (),
) -> Cloud:
    """Cylinder-center cloud ``depth`` levels below the ``root_word`` cylinder.

    Every point of the cylinder set lies within the returned slack of some
    cloud point and vice versa; centers of inexact rotations are snapped to a
    dyadic grid and the snap error is folded into the certified slack.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    count = len(ifs.maps) ** depth
    if count > budget:
        raise BudgetExceeded(
            f"cloud at depth {depth} needs {count} cylinders", spent=count, budget=budget
        )
    anchor, radius0 = ifs.root_ball()
    base_slack = word_ratio(ifs, root_word) * ifs.max_ratio() ** depth * radius0
    exact = ifs.is_exact()
    trig_cache: dict = {}
    entries = []
    extra = Fraction(0)
    for word, state in iterate_cylinders(ifs, depth, bits, root_word):
        center = state_center(state, anchor, exact, trig_cache, bits)
        if exact:
            pt = center
        else:
            ix, iy = center
            pt = (_snap(ix.midpoint()), _snap(iy.midpoint()))
            err = max(abs(pt[0] - fx) for fx in ix.to_fractions()) + max(
                abs(pt[1] - fy) for fy in iy.to_fractions()
            )
            extra = max(extra, err)
        entries.append((word, pt))
    return Cloud(tuple(entries), base_slack + extra, depth)


def attractor_cloud(
    ifs: IFS,
    eps: Fraction,
    budget: int = DEFAULT_NODE_BUDGET,
    bits: int = DEFAULT_BITS,
) -> Cloud:
    """Uniform-depth cylinder-center cloud with Hausdorff distance <= eps from K.

    Depth is the first at which every cylinder diameter bound 2 r^d R0 drops
    to eps.
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    return cloud_at_depth(ifs, _uniform_depth(ifs, eps), budget, bits)


@lru_cache(maxsize=64)
def _diam_lower(ifs: IFS, eps: Fraction) -> Fraction:
    return diam_certified(ifs, eps).to_fractions()[0]


def sigma_delta(ifs: IFS, delta: Fraction, diam_eps: Fraction = Fraction(1, 10**3)) -> set:
    """Prefix-free cover scale: words with r_I * D <= delta < r_parent * D.

    D is a certified rational lower bound on diam K, so the returned words
    form the first refinement level at which cylinder size certifiably drops
    to delta.
    """
    delta = Fraction(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    diam_lo = _diam_lower(ifs, diam_eps)
    if delta >= diam_lo:
        raise ValueError("delta must be certifiably below diam K")
    out = set()
    frontier = [(Fraction(1), ())]
    while frontier:
        ratio, word = frontier.pop()
        for symbol in ifs.labels:
            child_ratio = ratio * ifs.map_for(symbol).ratio
            child = word + (symbol,)
            if child_ratio * diam_lo <= delta:
                out.add(child)
            else:
                frontier.append((child_ratio, child))
    return out


def diam_certified(
    ifs: IFS,
    eps: Fraction = Fraction(1, 10**4),
    budget: int = DEFAULT_NODE_BUDGET,
    bits: int = DEFAULT_BITS,
) -> CertInterval:
    """Interval of width <= eps containing diam K.

    Uses the max pairwise distance over hull vertices of a cloud whose slack
    is at most eps/5, padded outward by twice the slack.
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    cloud = attractor_cloud(ifs, eps=Fraction(2, 5) * eps, budget=budget, bits=bits)
    hull = convex_hull(cloud.points())
    verts = hull.vertices
    best = max(
        (dist_sq(verts[i], verts[j]) for i in range(len(verts)) for j in range(i, len(verts))),
    )
    spread = CertInterval.from_rational(best, bits).sqrt()
    pad = 2 * cloud.slack
    lo = spread - pad
    if lo.to_fractions()[0] < 0:
        lo = lo.hull(CertInterval.from_rational(0, bits))
    return CertInterval(lo.lo, (spread + pad).hi, bits)


# ---------------------------------------------------------- constructions


def cantor_ifs() -> IFS:
    third = Fraction(1, 3)
    return IFS(
        maps=(
            Similarity(third, AngleRep(), False, (Fraction(0), Fraction(0))),
            Similarity(third, AngleRep(), False, (Fraction(2, 3), Fraction(0))),
        ),
        labels=(1, 2),
    )


def segment_ifs() -> IFS:
    half = Fraction(1, 2)
    return IFS(
        maps=(
            Similarity(half, AngleRep(), False, (Fraction(0), Fraction(0))),
            Similarity(half, AngleRep(), False, (half, Fraction(0))),
        ),
        labels=(1, 2),
    )


def rot_pair_ifs(ratio: Fraction = Fraction(1, 5), rotation: AngleRep = AngleRep()) -> IFS:
    """Two maps with a common rotation and translations +-e1."""
    return IFS(
        maps=(
            Similarity(ratio, rotation, False, (Fraction(1), Fraction(0))),
            Similarity(ratio, rotation, False, (Fraction(-1), Fraction(0))),
        ),
        labels=(1, 2),
    )


def sierpinski_ifs() -> IFS:
    half = Fraction(1, 2)
    zero = Fraction(0)
    return IFS(
        maps=(
            Similarity(half, AngleRep(), False, (zero, zero)),
            Similarity(half, AngleRep(), False, (half, zero)),
            Similarity(half, AngleRep(), False, (zero, half)),
        ),
        labels=(1, 2, 3),
    )


# ------------------------------------------------------------------ JSON


def _fraction_from_json(value, where: str) -> Fraction:
    if not isinstance(value, str):
        raise ConfigError(f"{where}: exact rational string required, got {type(value).__name__}")
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: invalid rational {value!r}") from exc


def _angle_from_json(value, where: str) -> AngleRep:
    if not isinstance(value, dict) or set(value) != {"pi_coeff", "remainder"}:
        raise ConfigError(f"{where}: rotation must have exactly pi_coeff and remainder")
    return AngleRep(
        _fraction_from_json(value["pi_coeff"], f"{where}.pi_coeff"),
        _fraction_from_json(value["remainder"], f"{where}.remainder"),
    )


def ifs_from_json(doc: dict) -> IFS:
    """Build an IFS from a JSON document with exact-string rationals."""
    if not isinstance(doc, dict):
        raise ConfigError("IFS document must be a JSON object")
    allowed = {"labels", "maps", "schema_version"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown IFS document keys: {sorted(unknown)}")
    if "labels" not in doc or "maps" not in doc:
        raise ConfigError("IFS document needs labels and maps")
    labels = doc["labels"]
    maps_doc = doc["maps"]
    if not isinstance(labels, list) or not isinstance(maps_doc, list):
        raise ConfigError("labels and maps must be arrays")
    if not all(isinstance(lab, (str, int)) for lab in labels):
        raise ConfigError("labels must be strings or integers")
    maps = []
    for i, entry in enumerate(maps_doc):
        where = f"maps[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where}: must be an object")
        keys = {"ratio", "rotation", "reflect", "translation"}
        if set(entry) != keys:
            raise ConfigError(f"{where}: must have exactly keys {sorted(keys)}")
        if not isinstance(entry["reflect"], bool):
            raise ConfigError(f"{where}.reflect: must be a boolean")
        translation = entry["translation"]
        if not isinstance(translation, list) or len(translation) != 2:
            raise ConfigError(f"{where}.translation: must be a pair")
        maps.append(
            Similarity(
                ratio=_fraction_from_json(entry["ratio"], f"{where}.ratio"),
                rotation=_angle_from_json(entry["rotation"], f"{where}.rotation"),
                reflect=entry["reflect"],
                translation=(
                    _fraction_from_json(translation[0], f"{where}.translation[0]"),
                    _fraction_from_json(translation[1], f"{where}.translation[1]"),
                ),
            )
        )
    return IFS(maps=tuple(maps), labels=tuple(labels))


def load_ifs(path) -> IFS:
    with open(path, "r", encoding="utf-8") as fh:
        return ifs_from_json(json.load(fh))
